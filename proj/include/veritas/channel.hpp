#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "veritas/grid.hpp"

namespace veritas {

enum class ChannelProfile { TdlA, TdlB, TdlC, TdlD, TdlE };

ChannelProfile profile_from_string(const std::string& name);  // "tdl_a".."tdl_e"
std::string profile_to_string(ChannelProfile p);
bool profile_is_los(ChannelProfile p);

struct ChannelConfig {
    ChannelProfile profile = ChannelProfile::TdlA;
    double speed_mps = 0.0;
    double delay_spread_ns = 100.0;
    double ebn0_db = 10.0;
    double carrier_hz = 3.5e9;
    double subcarrier_spacing_hz = 15e3;
    std::uint64_t seed = 0;

    void validate() const;  // throws std::invalid_argument
    double max_doppler_hz() const;
    // OFDM symbol duration implied by a 14-symbol, 1 ms subframe at 15 kHz,
    // scaled with the configured spacing
    double symbol_duration_s() const { return (1e-3 / 14.0) * (15e3 / subcarrier_spacing_hz); }
};

struct Tap {
    double delay_s = 0.0;
    double power = 0.0;  // linear, fractions of unit total
    bool los = false;
};

struct TapSet {
    ChannelProfile profile = ChannelProfile::TdlA;
    std::vector<Tap> taps;
    bool los_flag = false;

    double total_power() const;
    double rms_delay_spread_s() const;
};

// Embedded TR 38.901 normalized power-delay profile scaled to the requested
// RMS delay spread; tap powers normalized to unit total.
TapSet make_tapset(ChannelProfile profile, double delay_spread_ns);

struct ChannelRealization {
    int n_symbols = 0;      // 140 per frame
    int n_subcarriers = 0;  // 72
    std::vector<cf32> h;    // symbol-major
    ChannelConfig config;

    cf32 at(int sym, int sc) const { return h[std::size_t(sym) * n_subcarriers + sc]; }
};

// Frequency response per OFDM symbol of one frame. Per-tap fading uses a
// sum-of-sinusoids generator with a Jakes spectrum; LOS taps are a
// deterministic component with their own Doppler shift. Sinusoid parameters
// derive from config.seed only, so consecutive frame indices see one
// continuous, stationary process.
ChannelRealization realize_channel(const TapSet& taps, const ChannelConfig& config, long frame_index);

// Elementwise Y = H X on the full frame grid.
// throws std::invalid_argument on shape mismatch
std::vector<cf32> apply_channel(const TxFrame& frame, const ChannelRealization& h);

struct AwgnResult {
    std::vector<cf32> grid;
    double noise_variance = 0.0;  // complex variance per RE
};

// Complex white Gaussian noise at Eb/N0 with unit symbol energy and unit code
// rate: variance = 1 / (10^(ebn0/10) * bits_per_symbol).
AwgnResult add_awgn(std::span<const cf32> grid, double ebn0_db, int bits_per_symbol, std::uint64_t seed);

}  // namespace veritas
