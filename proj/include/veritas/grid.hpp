#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace veritas {

using cf32 = std::complex<float>;

// Pilot symbol layouts per subframe: a=[2], b=[2,11], c=[2,7,11], d=[2,5,8,11].
enum class PilotPattern { A, B, C, D };

struct GridSpec {
    int n_symbols = 14;
    int n_subcarriers = 72;  // 6 PRBs
    std::vector<int> pilot_symbol_indices;
    std::vector<int> pilot_subcarrier_indices;  // even comb 0,2,...,70
    int n_subframes_per_frame = 10;
    int bits_per_symbol = 4;  // 16QAM payload

    static GridSpec with_pattern(PilotPattern p);

    int n_pilot_symbols() const { return int(pilot_symbol_indices.size()); }
    int n_pilot_subcarriers() const { return int(pilot_subcarrier_indices.size()); }
    int res_per_subframe() const { return n_symbols * n_subcarriers; }
    int pilot_res_per_subframe() const { return n_pilot_symbols() * n_pilot_subcarriers(); }
    int data_res_per_subframe() const { return res_per_subframe() - pilot_res_per_subframe(); }
    int bits_per_subframe() const { return data_res_per_subframe() * bits_per_symbol; }
    int bits_per_frame() const { return bits_per_subframe() * n_subframes_per_frame; }
    int symbols_per_frame() const { return n_symbols * n_subframes_per_frame; }

    // throws std::invalid_argument when indices are out of range or repeated
    void validate() const;
};

// Disjoint boolean masks covering the full subframe grid, symbol-major.
struct Masks {
    int n_symbols = 0;
    int n_subcarriers = 0;
    std::vector<std::uint8_t> pilot;
    std::vector<std::uint8_t> data;

    bool is_pilot(int sym, int sc) const { return pilot[std::size_t(sym) * n_subcarriers + sc] != 0; }
    bool is_data(int sym, int sc) const { return data[std::size_t(sym) * n_subcarriers + sc] != 0; }
    long pilot_count() const;
    long data_count() const;
};

Masks extract_masks(const GridSpec& spec);

// Deterministic QPSK pilot symbols for every pilot RE of every subframe in a
// frame; the same table is reused for all frames of a deployment.
struct PilotTable {
    GridSpec spec;
    std::uint64_t seed = 0;
    // [subframe][pilot_symbol][pilot_subcarrier], flattened
    std::vector<cf32> symbols;

    cf32 at(int subframe, int pilot_sym, int pilot_sc) const {
        return symbols[(std::size_t(subframe) * spec.n_pilot_symbols() + pilot_sym) * spec.n_pilot_subcarriers() +
                       pilot_sc];
    }
};

PilotTable make_pilot_sequence(const GridSpec& spec, std::uint64_t seed);

// One Gray-labeled 16QAM point at unit average constellation energy.
std::complex<double> map_16qam_point(int b0, int b1, int b2, int b3);

// Gray-mapped unit-average-energy 16QAM; bits consumed in groups of four.
// throws std::invalid_argument when the length is not divisible by four
std::vector<cf32> map_bits_16qam(std::span<const std::uint8_t> bits);

// Nearest-constellation hard demapper (test and tooling aid).
std::vector<std::uint8_t> demap_16qam_hard(std::span<const cf32> symbols);

struct ResourceGrid {
    int subframe_index = 0;
    int n_symbols = 0;
    int n_subcarriers = 0;
    std::vector<cf32> symbols;  // symbol-major

    cf32 at(int sym, int sc) const { return symbols[std::size_t(sym) * n_subcarriers + sc]; }
    cf32& at(int sym, int sc) { return symbols[std::size_t(sym) * n_subcarriers + sc]; }
};

struct TxFrame {
    GridSpec spec;
    std::vector<ResourceGrid> subframes;
    std::vector<std::uint8_t> payload_bits;
    std::uint64_t rng_seed = 0;

    // frame grid flattened to (n_symbols * n_subframes) x n_subcarriers
    std::vector<cf32> full_grid() const;
};

// Random payload bits mapped into the data REs, pilots from the shared table.
// Data REs are filled in symbol-major raster order inside each subframe; the
// payload bit order follows the same raster, four bits per RE.
TxFrame build_tx_frame(const GridSpec& spec, std::uint64_t seed, const PilotTable& pilots);

}  // namespace veritas
