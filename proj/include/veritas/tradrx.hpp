#pragma once

#include <complex>
#include <span>
#include <vector>

#include "veritas/grid.hpp"

namespace veritas {

struct ChannelEstimate {
    int n_symbols = 0;
    int n_subcarriers = 0;
    std::vector<cf32> h_hat;            // full frame grid, symbol-major
    std::vector<cf32> raw_pilot_estimates;  // [subframe][pilot_symbol][pilot_subcarrier]

    cf32 at(int sym, int sc) const { return h_hat[std::size_t(sym) * n_subcarriers + sc]; }
};

// LS estimates Y/X at pilot REs, then linear interpolation across the pilot
// comb in frequency (nearest pilot at the grid edge) and linear
// interpolation/extrapolation across the pilot symbols in time, per subframe.
ChannelEstimate ls_estimate(std::span<const cf32> rx_grid, const PilotTable& pilots);

struct Equalized {
    std::vector<cf32> x_hat;       // data REs in payload order
    std::vector<float> eff_var;    // post-equalization noise variance per data RE
};

// Per-RE scalar LMMSE: x_hat = conj(H) y / (|H|^2 + noise_var),
// eff_var = noise_var / (|H|^2 + noise_var).
Equalized lmmse_equalize(std::span<const cf32> rx_grid, const ChannelEstimate& est, double noise_variance,
                         const GridSpec& spec);

// Ordered LLRs over the valid data bits of one frame; LLR = ln(P0/P1), so a
// positive value favors bit 0.
struct SoftBitBlock {
    std::vector<float> llrs;
};

// Max-log soft demapping over the Gray 16QAM constellation.
// throws std::invalid_argument on non-positive effective variance
SoftBitBlock demap_maxlog(const Equalized& eq);

// LS estimation -> LMMSE equalization -> max-log demapping for one frame.
SoftBitBlock tradrx_decode(std::span<const cf32> rx_grid, const PilotTable& pilots, double noise_variance);

// Hard rule shared with the comparator: P > 0.5 maps to logical 1, which is
// LLR < 0; LLR = 0 stays at bit 0.
std::vector<std::uint8_t> hard_bits(const SoftBitBlock& block);

double bit_error_rate(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

}  // namespace veritas
