#include "veritas/tradrx.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace veritas {
namespace {

struct ConstellationPoint {
    double re, im;
    std::uint8_t bits[4];
};

const std::array<ConstellationPoint, 16>& constellation_16qam() {
    static const auto table = [] {
        std::array<ConstellationPoint, 16> t{};
        for (int idx = 0; idx < 16; ++idx) {
            const std::uint8_t b0 = (idx >> 3) & 1, b1 = (idx >> 2) & 1, b2 = (idx >> 1) & 1, b3 = idx & 1;
            const std::complex<double> s = map_16qam_point(b0, b1, b2, b3);
            t[std::size_t(idx)] = {s.real(), s.imag(), {b0, b1, b2, b3}};
        }
        return t;
    }();
    return table;
}

}  // namespace

ChannelEstimate ls_estimate(std::span<const cf32> rx_grid, const PilotTable& pilots) {
    const GridSpec& spec = pilots.spec;
    const int n_sym = spec.n_symbols;
    const int n_sc = spec.n_subcarriers;
    const int n_frame_sym = spec.symbols_per_frame();
    if (long(rx_grid.size()) != long(n_frame_sym) * n_sc)
        throw std::invalid_argument("ls_estimate: grid size does not match the spec");

    ChannelEstimate est;
    est.n_symbols = n_frame_sym;
    est.n_subcarriers = n_sc;
    est.h_hat.resize(rx_grid.size());
    est.raw_pilot_estimates.resize(std::size_t(spec.n_subframes_per_frame) * spec.pilot_res_per_subframe());

    const auto& psyms = spec.pilot_symbol_indices;
    const auto& pscs = spec.pilot_subcarrier_indices;
    const int n_ps = spec.n_pilot_symbols();
    const int n_pc = spec.n_pilot_subcarriers();

    // per pilot symbol: frequency-interpolated row estimate
    std::vector<std::complex<double>> row(static_cast<std::size_t>(n_sc));
    std::vector<std::complex<double>> raw(static_cast<std::size_t>(n_pc));
    std::vector<std::vector<std::complex<double>>> rows;
    rows.resize(std::size_t(n_ps));

    for (int sf = 0; sf < spec.n_subframes_per_frame; ++sf) {
        for (int ps = 0; ps < n_ps; ++ps) {
            const int sym = sf * n_sym + psyms[std::size_t(ps)];
            for (int pc = 0; pc < n_pc; ++pc) {
                const cf32 y = rx_grid[std::size_t(sym) * n_sc + pscs[std::size_t(pc)]];
                const cf32 x = pilots.at(sf, ps, pc);
                const std::complex<double> h = std::complex<double>(y) / std::complex<double>(x);
                raw[std::size_t(pc)] = h;
                est.raw_pilot_estimates[(std::size_t(sf) * n_ps + ps) * n_pc + pc] = cf32(h);
            }
            // frequency: linear between comb pilots, nearest pilot at edges
            int left = 0;
            for (int sc = 0; sc < n_sc; ++sc) {
                if (sc <= pscs.front()) {
                    row[std::size_t(sc)] = raw.front();
                    continue;
                }
                if (sc >= pscs.back()) {
                    row[std::size_t(sc)] = raw.back();
                    continue;
                }
                while (pscs[std::size_t(left) + 1] < sc) ++left;
                const double lo = pscs[std::size_t(left)];
                const double hi = pscs[std::size_t(left) + 1];
                const double w = (sc - lo) / (hi - lo);
                row[std::size_t(sc)] = raw[std::size_t(left)] * (1.0 - w) + raw[std::size_t(left) + 1] * w;
            }
            rows[std::size_t(ps)] = row;
        }

        // time: linear interpolation between pilot symbols, linear
        // extrapolation outside them; constant when only one pilot symbol
        for (int t = 0; t < n_sym; ++t) {
            const int sym = sf * n_sym + t;
            int seg = 0;
            if (n_ps >= 2) {
                while (seg + 2 < n_ps && psyms[std::size_t(seg) + 1] < t) ++seg;
            }
            for (int sc = 0; sc < n_sc; ++sc) {
                std::complex<double> h;
                if (n_ps == 1) {
                    h = rows[0][std::size_t(sc)];
                } else {
                    const double t0 = psyms[std::size_t(seg)];
                    const double t1 = psyms[std::size_t(seg) + 1];
                    const double w = (t - t0) / (t1 - t0);
                    h = rows[std::size_t(seg)][std::size_t(sc)] * (1.0 - w) +
                        rows[std::size_t(seg) + 1][std::size_t(sc)] * w;
                }
                est.h_hat[std::size_t(sym) * n_sc + sc] = cf32(h);
            }
        }
    }
    return est;
}

Equalized lmmse_equalize(std::span<const cf32> rx_grid, const ChannelEstimate& est, double noise_variance,
                         const GridSpec& spec) {
    if (noise_variance < 0) throw std::invalid_argument("lmmse_equalize: noise variance must be >= 0");
    if (rx_grid.size() != est.h_hat.size()) throw std::invalid_argument("lmmse_equalize: shape mismatch");

    const Masks masks = extract_masks(spec);
    Equalized out;
    out.x_hat.reserve(std::size_t(spec.data_res_per_subframe()) * spec.n_subframes_per_frame);
    out.eff_var.reserve(out.x_hat.capacity());

    const int n_sc = spec.n_subcarriers;
    for (int sf = 0; sf < spec.n_subframes_per_frame; ++sf) {
        for (int t = 0; t < spec.n_symbols; ++t) {
            const int sym = sf * spec.n_symbols + t;
            for (int sc = 0; sc < n_sc; ++sc) {
                if (!masks.is_data(t, sc)) continue;
                const std::complex<double> h = est.h_hat[std::size_t(sym) * n_sc + sc];
                const std::complex<double> y = rx_grid[std::size_t(sym) * n_sc + sc];
                const double denom = std::norm(h) + noise_variance;
                out.x_hat.push_back(cf32(std::conj(h) * y / denom));
                // zero noise would hand the demapper a zero variance; the
                // floor keeps LLRs finite in that limit
                out.eff_var.push_back(float(std::max(noise_variance / denom, 1e-12)));
            }
        }
    }
    return out;
}

SoftBitBlock demap_maxlog(const Equalized& eq) {
    const auto& points = constellation_16qam();
    SoftBitBlock block;
    block.llrs.resize(eq.x_hat.size() * 4);
    for (std::size_t i = 0; i < eq.x_hat.size(); ++i) {
        const double var = eq.eff_var[i];
        if (!(var > 0)) throw std::invalid_argument("demap_maxlog: effective variance must be > 0");
        const double xr = eq.x_hat[i].real();
        const double xi = eq.x_hat[i].imag();
        double min0[4], min1[4];
        for (int b = 0; b < 4; ++b) {
            min0[b] = std::numeric_limits<double>::infinity();
            min1[b] = std::numeric_limits<double>::infinity();
        }
        for (const auto& p : points) {
            const double dr = xr - p.re;
            const double di = xi - p.im;
            const double d2 = dr * dr + di * di;
            for (int b = 0; b < 4; ++b) {
                if (p.bits[b]) {
                    if (d2 < min1[b]) min1[b] = d2;
                } else {
                    if (d2 < min0[b]) min0[b] = d2;
                }
            }
        }
        for (int b = 0; b < 4; ++b) block.llrs[4 * i + b] = float((min1[b] - min0[b]) / var);
    }
    return block;
}

SoftBitBlock tradrx_decode(std::span<const cf32> rx_grid, const PilotTable& pilots, double noise_variance) {
    const ChannelEstimate est = ls_estimate(rx_grid, pilots);
    const Equalized eq = lmmse_equalize(rx_grid, est, noise_variance, pilots.spec);
    return demap_maxlog(eq);
}

std::vector<std::uint8_t> hard_bits(const SoftBitBlock& block) {
    std::vector<std::uint8_t> bits(block.llrs.size());
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = block.llrs[i] < 0.f;
    return bits;
}

double bit_error_rate(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    if (a.size() != b.size()) throw std::invalid_argument("bit_error_rate: length mismatch");
    if (a.empty()) return 0.0;
    long errors = 0;
    for (std::size_t i = 0; i < a.size(); ++i) errors += (a[i] != 0) != (b[i] != 0);
    return double(errors) / double(a.size());
}

}  // namespace veritas
