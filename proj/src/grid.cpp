#include "veritas/grid.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "veritas/rng.hpp"

namespace veritas {

GridSpec GridSpec::with_pattern(PilotPattern p) {
    GridSpec spec;
    switch (p) {
        case PilotPattern::A: spec.pilot_symbol_indices = {2}; break;
        case PilotPattern::B: spec.pilot_symbol_indices = {2, 11}; break;
        case PilotPattern::C: spec.pilot_symbol_indices = {2, 7, 11}; break;
        case PilotPattern::D: spec.pilot_symbol_indices = {2, 5, 8, 11}; break;
    }
    spec.pilot_subcarrier_indices.resize(36);
    for (int i = 0; i < 36; ++i) spec.pilot_subcarrier_indices[i] = 2 * i;
    spec.validate();
    return spec;
}

void GridSpec::validate() const {
    if (n_symbols <= 0 || n_subcarriers <= 0 || n_subframes_per_frame <= 0 || bits_per_symbol <= 0)
        throw std::invalid_argument("GridSpec: dimensions must be positive");
    std::set<int> seen;
    for (int s : pilot_symbol_indices) {
        if (s < 0 || s >= n_symbols) throw std::invalid_argument("GridSpec: pilot symbol index out of range");
        if (!seen.insert(s).second) throw std::invalid_argument("GridSpec: repeated pilot symbol index");
    }
    seen.clear();
    for (int c : pilot_subcarrier_indices) {
        if (c < 0 || c >= n_subcarriers) throw std::invalid_argument("GridSpec: pilot subcarrier index out of range");
        if (!seen.insert(c).second) throw std::invalid_argument("GridSpec: repeated pilot subcarrier index");
    }
}

long Masks::pilot_count() const {
    long n = 0;
    for (auto v : pilot) n += v != 0;
    return n;
}

long Masks::data_count() const {
    long n = 0;
    for (auto v : data) n += v != 0;
    return n;
}

Masks extract_masks(const GridSpec& spec) {
    spec.validate();
    Masks m;
    m.n_symbols = spec.n_symbols;
    m.n_subcarriers = spec.n_subcarriers;
    m.pilot.assign(std::size_t(spec.n_symbols) * spec.n_subcarriers, 0);
    m.data.assign(std::size_t(spec.n_symbols) * spec.n_subcarriers, 1);
    for (int s : spec.pilot_symbol_indices) {
        for (int c : spec.pilot_subcarrier_indices) {
            m.pilot[std::size_t(s) * spec.n_subcarriers + c] = 1;
            m.data[std::size_t(s) * spec.n_subcarriers + c] = 0;
        }
    }
    return m;
}

PilotTable make_pilot_sequence(const GridSpec& spec, std::uint64_t seed) {
    spec.validate();
    PilotTable table;
    table.spec = spec;
    table.seed = seed;
    const std::size_t count =
        std::size_t(spec.n_subframes_per_frame) * spec.n_pilot_symbols() * spec.n_pilot_subcarriers();
    table.symbols.resize(count);
    const float amp = float(1.0 / std::sqrt(2.0));
    const std::uint64_t base = splitmix64(seed);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t word = splitmix64(base + i);
        float re = (word & 1) ? -amp : amp;
        float im = (word & 2) ? -amp : amp;
        table.symbols[i] = cf32(re, im);
    }
    return table;
}

std::complex<double> map_16qam_point(int b0, int b1, int b2, int b3) {
    const double scale = 1.0 / std::sqrt(10.0);
    const double re = double((1 - 2 * b0) * (2 - (1 - 2 * b2))) * scale;
    const double im = double((1 - 2 * b1) * (2 - (1 - 2 * b3))) * scale;
    return {re, im};
}

std::vector<cf32> map_bits_16qam(std::span<const std::uint8_t> bits) {
    if (bits.size() % 4 != 0) throw std::invalid_argument("map_bits_16qam: bit count must be divisible by 4");
    std::vector<cf32> out(bits.size() / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = cf32(map_16qam_point(bits[4 * i] & 1, bits[4 * i + 1] & 1, bits[4 * i + 2] & 1,
                                      bits[4 * i + 3] & 1));
    }
    return out;
}

std::vector<std::uint8_t> demap_16qam_hard(std::span<const cf32> symbols) {
    std::vector<std::uint8_t> bits(symbols.size() * 4);
    const float boundary = float(2.0 / std::sqrt(10.0));
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        float re = symbols[i].real();
        float im = symbols[i].imag();
        bits[4 * i] = re < 0.f;
        bits[4 * i + 1] = im < 0.f;
        bits[4 * i + 2] = std::abs(re) > boundary;
        bits[4 * i + 3] = std::abs(im) > boundary;
    }
    return bits;
}

std::vector<cf32> TxFrame::full_grid() const {
    std::vector<cf32> grid;
    grid.reserve(std::size_t(spec.symbols_per_frame()) * spec.n_subcarriers);
    for (const auto& sf : subframes) grid.insert(grid.end(), sf.symbols.begin(), sf.symbols.end());
    return grid;
}

TxFrame build_tx_frame(const GridSpec& spec, std::uint64_t seed, const PilotTable& pilots) {
    spec.validate();
    TxFrame frame;
    frame.spec = spec;
    frame.rng_seed = seed;

    Rng rng(derive_seed(seed, 0x62697473ULL));  // payload bit stream
    frame.payload_bits.resize(std::size_t(spec.bits_per_frame()));
    for (auto& b : frame.payload_bits) b = std::uint8_t(rng.bit());

    const Masks masks = extract_masks(spec);
    std::vector<cf32> data_symbols = map_bits_16qam(frame.payload_bits);

    frame.subframes.resize(std::size_t(spec.n_subframes_per_frame));
    std::size_t next_data = 0;
    for (int sf = 0; sf < spec.n_subframes_per_frame; ++sf) {
        ResourceGrid& g = frame.subframes[std::size_t(sf)];
        g.subframe_index = sf;
        g.n_symbols = spec.n_symbols;
        g.n_subcarriers = spec.n_subcarriers;
        g.symbols.assign(std::size_t(spec.res_per_subframe()), cf32(0.f, 0.f));
        for (int sym = 0; sym < spec.n_symbols; ++sym) {
            for (int sc = 0; sc < spec.n_subcarriers; ++sc) {
                if (masks.is_data(sym, sc)) g.at(sym, sc) = data_symbols[next_data++];
            }
        }
        for (int ps = 0; ps < spec.n_pilot_symbols(); ++ps) {
            for (int pc = 0; pc < spec.n_pilot_subcarriers(); ++pc) {
                g.at(spec.pilot_symbol_indices[std::size_t(ps)], spec.pilot_subcarrier_indices[std::size_t(pc)]) =
                    pilots.at(sf, ps, pc);
            }
        }
    }
    return frame;
}

}  // namespace veritas
