#include "veritas/channel.hpp"

#include <cmath>
#include <stdexcept>

#include "veritas/rng.hpp"

namespace veritas {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kSpeedOfLight = 299792458.0;
constexpr int kSinusoids = 16;  // per tap, per quadrature

struct PdpEntry {
    double delay;  // normalized so the profile RMS delay spread is 1
    double power_db;
    bool los;
};

// TR 38.901 tables 7.7.2-1..5. For TDL-D/E the first tap is split into its
// specular and Rayleigh parts at the same delay.
const PdpEntry kTdlA[] = {
    {0.0000, -13.4, false}, {0.3819, 0.0, false},   {0.4025, -2.2, false},  {0.5868, -4.0, false},
    {0.4610, -6.0, false},  {0.5375, -8.2, false},  {0.6708, -9.9, false},  {0.5750, -10.5, false},
    {0.7618, -7.5, false},  {1.5375, -15.9, false}, {1.8978, -6.6, false},  {2.2242, -16.7, false},
    {2.1718, -12.4, false}, {2.4942, -15.2, false}, {2.5119, -10.8, false}, {3.0582, -11.3, false},
    {4.0810, -12.7, false}, {4.4579, -16.2, false}, {4.5695, -18.3, false}, {4.7966, -18.9, false},
    {5.0066, -16.6, false}, {5.3043, -19.9, false}, {9.6586, -29.7, false},
};

const PdpEntry kTdlB[] = {
    {0.0000, 0.0, false},  {0.1072, -2.2, false},  {0.2155, -4.0, false}, {0.2095, -3.2, false},
    {0.2870, -9.8, false}, {0.2986, -1.2, false},  {0.3752, -3.4, false}, {0.5055, -5.2, false},
    {0.3681, -7.6, false}, {0.3697, -3.0, false},  {0.5700, -8.9, false}, {0.5283, -9.0, false},
    {1.1021, -4.8, false}, {1.2756, -5.7, false},  {1.5474, -7.5, false}, {1.7842, -1.9, false},
    {2.0169, -7.6, false}, {2.8294, -12.2, false}, {3.0219, -9.8, false}, {3.6187, -11.4, false},
    {4.1067, -14.9, false}, {4.2790, -9.2, false}, {4.7834, -11.3, false},
};

const PdpEntry kTdlC[] = {
    {0.0000, -4.4, false},  {0.2099, -1.2, false},  {0.2219, -3.5, false},  {0.2329, -5.2, false},
    {0.2176, -2.5, false},  {0.6366, 0.0, false},   {0.6448, -2.2, false},  {0.6560, -3.9, false},
    {0.6584, -7.4, false},  {0.7935, -7.1, false},  {0.8213, -10.7, false}, {0.9336, -11.1, false},
    {1.2285, -5.1, false},  {1.3083, -6.8, false},  {2.1704, -8.7, false},  {2.7105, -13.2, false},
    {4.2589, -13.9, false}, {4.6003, -13.9, false}, {5.4902, -15.8, false}, {5.6077, -17.1, false},
    {6.3065, -16.0, false}, {6.6374, -15.7, false}, {7.0427, -21.6, false}, {8.6523, -22.8, false},
};

const PdpEntry kTdlD[] = {
    {0.0000, -0.2, true},   {0.0000, -13.5, false}, {0.0350, -18.8, false}, {0.6120, -21.0, false},
    {1.3630, -22.8, false}, {1.4050, -17.9, false}, {1.8040, -20.1, false}, {2.5960, -21.9, false},
    {1.7750, -22.9, false}, {4.0420, -27.8, false}, {7.9370, -23.6, false}, {9.4240, -24.8, false},
    {9.7080, -30.0, false}, {12.525, -27.7, false},
};

const PdpEntry kTdlE[] = {
    {0.0000, -0.03, true},  {0.0000, -22.03, false}, {0.5133, -15.8, false}, {0.5440, -18.1, false},
    {0.5630, -19.8, false}, {0.5440, -22.9, false},  {0.7112, -22.4, false}, {1.9092, -18.6, false},
    {1.9293, -20.8, false}, {1.9589, -22.6, false},  {2.6426, -22.3, false}, {3.7136, -25.6, false},
    {5.4524, -20.2, false}, {12.0034, -29.8, false}, {20.6519, -29.2, false},
};

std::span<const PdpEntry> pdp_table(ChannelProfile p) {
    switch (p) {
        case ChannelProfile::TdlA: return kTdlA;
        case ChannelProfile::TdlB: return kTdlB;
        case ChannelProfile::TdlC: return kTdlC;
        case ChannelProfile::TdlD: return kTdlD;
        case ChannelProfile::TdlE: return kTdlE;
    }
    throw std::invalid_argument("unknown channel profile");
}

// One tap's fading process: Zheng-Xiao sum of sinusoids for Rayleigh taps,
// a rotating deterministic component for the LOS tap.
struct TapProcess {
    double amplitude = 0.0;
    bool los = false;
    double los_freq = 0.0;
    double los_phase = 0.0;
    double cos_freq[kSinusoids];
    double cos_phase[kSinusoids];
    double sin_freq[kSinusoids];
    double sin_phase[kSinusoids];

    std::complex<double> value(double t) const {
        if (los) return amplitude * std::polar(1.0, los_freq * t + los_phase);
        double re = 0.0, im = 0.0;
        for (int m = 0; m < kSinusoids; ++m) {
            re += std::cos(cos_freq[m] * t + cos_phase[m]);
            im += std::cos(sin_freq[m] * t + sin_phase[m]);
        }
        const double norm = amplitude / std::sqrt(double(kSinusoids));
        return {norm * re, norm * im};
    }
};

TapProcess make_tap_process(const Tap& tap, double max_doppler_hz, Rng& rng) {
    TapProcess p;
    p.los = tap.los;
    if (tap.los) {
        p.amplitude = std::sqrt(tap.power);
        double aoa = rng.uniform(-M_PI, M_PI);
        p.los_freq = kTwoPi * max_doppler_hz * std::cos(aoa);
        p.los_phase = rng.uniform(-M_PI, M_PI);
        return p;
    }
    p.amplitude = std::sqrt(tap.power / 2.0);  // each quadrature carries half the power
    double theta = rng.uniform(-M_PI, M_PI);
    for (int m = 0; m < kSinusoids; ++m) {
        double alpha = (kTwoPi * (m + 1) - M_PI + theta) / (4.0 * kSinusoids);
        p.cos_freq[m] = kTwoPi * max_doppler_hz * std::cos(alpha);
        p.sin_freq[m] = kTwoPi * max_doppler_hz * std::sin(alpha);
        p.cos_phase[m] = rng.uniform(-M_PI, M_PI);
        p.sin_phase[m] = rng.uniform(-M_PI, M_PI);
    }
    // the amplitude of each quadrature sum is sqrt(2/M) in the Zheng-Xiao
    // model; fold the sqrt(2) into the power split above
    p.amplitude *= std::sqrt(2.0);
    return p;
}

}  // namespace

ChannelProfile profile_from_string(const std::string& name) {
    if (name == "tdl_a") return ChannelProfile::TdlA;
    if (name == "tdl_b") return ChannelProfile::TdlB;
    if (name == "tdl_c") return ChannelProfile::TdlC;
    if (name == "tdl_d") return ChannelProfile::TdlD;
    if (name == "tdl_e") return ChannelProfile::TdlE;
    throw std::invalid_argument("unknown channel profile: " + name);
}

std::string profile_to_string(ChannelProfile p) {
    switch (p) {
        case ChannelProfile::TdlA: return "tdl_a";
        case ChannelProfile::TdlB: return "tdl_b";
        case ChannelProfile::TdlC: return "tdl_c";
        case ChannelProfile::TdlD: return "tdl_d";
        case ChannelProfile::TdlE: return "tdl_e";
    }
    throw std::invalid_argument("unknown channel profile");
}

bool profile_is_los(ChannelProfile p) { return p == ChannelProfile::TdlD || p == ChannelProfile::TdlE; }

void ChannelConfig::validate() const {
    if (speed_mps < 0) throw std::invalid_argument("ChannelConfig: speed must be >= 0");
    if (delay_spread_ns <= 0) throw std::invalid_argument("ChannelConfig: delay spread must be > 0");
    if (carrier_hz <= 0 || subcarrier_spacing_hz <= 0)
        throw std::invalid_argument("ChannelConfig: carrier and subcarrier spacing must be > 0");
}

double ChannelConfig::max_doppler_hz() const { return speed_mps * carrier_hz / kSpeedOfLight; }

double TapSet::total_power() const {
    double p = 0.0;
    for (const auto& t : taps) p += t.power;
    return p;
}

double TapSet::rms_delay_spread_s() const {
    double p = 0.0, mean = 0.0, second = 0.0;
    for (const auto& t : taps) {
        p += t.power;
        mean += t.power * t.delay_s;
        second += t.power * t.delay_s * t.delay_s;
    }
    mean /= p;
    return std::sqrt(second / p - mean * mean);
}

TapSet make_tapset(ChannelProfile profile, double delay_spread_ns) {
    if (delay_spread_ns <= 0) throw std::invalid_argument("make_tapset: delay spread must be > 0");
    auto table = pdp_table(profile);
    TapSet set;
    set.profile = profile;
    set.los_flag = profile_is_los(profile);
    double total = 0.0;
    for (const auto& e : table) total += std::pow(10.0, e.power_db / 10.0);
    set.taps.reserve(table.size());
    for (const auto& e : table) {
        Tap t;
        t.delay_s = e.delay * delay_spread_ns * 1e-9;
        t.power = std::pow(10.0, e.power_db / 10.0) / total;
        t.los = e.los;
        set.taps.push_back(t);
    }
    return set;
}

ChannelRealization realize_channel(const TapSet& taps, const ChannelConfig& config, long frame_index) {
    config.validate();
    if (taps.taps.empty()) throw std::invalid_argument("realize_channel: empty tap set");

    const int n_sym = 140;
    const int n_sc = 72;
    const double t_sym = config.symbol_duration_s();
    const double fd = config.max_doppler_hz();

    Rng rng(derive_seed(config.seed, 0x74617073ULL));
    std::vector<TapProcess> procs;
    procs.reserve(taps.taps.size());
    for (const auto& tap : taps.taps) procs.push_back(make_tap_process(tap, fd, rng));

    ChannelRealization out;
    out.n_symbols = n_sym;
    out.n_subcarriers = n_sc;
    out.config = config;
    out.h.resize(std::size_t(n_sym) * n_sc);

    std::vector<std::complex<double>> gains(taps.taps.size());
    // per-tap frequency rotation across one subcarrier step
    std::vector<std::complex<double>> step(taps.taps.size());
    std::vector<std::complex<double>> start(taps.taps.size());
    for (std::size_t l = 0; l < taps.taps.size(); ++l) {
        double ph = -kTwoPi * config.subcarrier_spacing_hz * taps.taps[l].delay_s;
        step[l] = std::polar(1.0, ph);
        start[l] = std::polar(1.0, ph * double(-n_sc / 2));  // grid centered on the carrier
    }

    for (int sym = 0; sym < n_sym; ++sym) {
        const double t = (double(frame_index) * n_sym + sym) * t_sym;
        for (std::size_t l = 0; l < procs.size(); ++l) gains[l] = procs[l].value(t);
        std::vector<std::complex<double>> rot = start;
        for (int sc = 0; sc < n_sc; ++sc) {
            std::complex<double> acc{0.0, 0.0};
            for (std::size_t l = 0; l < procs.size(); ++l) {
                acc += gains[l] * rot[l];
                rot[l] *= step[l];
            }
            out.h[std::size_t(sym) * n_sc + sc] = cf32(float(acc.real()), float(acc.imag()));
        }
    }
    return out;
}

std::vector<cf32> apply_channel(const TxFrame& frame, const ChannelRealization& h) {
    std::vector<cf32> x = frame.full_grid();
    if (long(x.size()) != long(h.n_symbols) * h.n_subcarriers)
        throw std::invalid_argument("apply_channel: frame and realization shapes disagree");
    for (std::size_t i = 0; i < x.size(); ++i) x[i] *= h.h[i];
    return x;
}

AwgnResult add_awgn(std::span<const cf32> grid, double ebn0_db, int bits_per_symbol, std::uint64_t seed) {
    if (bits_per_symbol <= 0) throw std::invalid_argument("add_awgn: bits_per_symbol must be > 0");
    AwgnResult out;
    out.noise_variance = 1.0 / (std::pow(10.0, ebn0_db / 10.0) * bits_per_symbol);
    const double sigma = std::sqrt(out.noise_variance / 2.0);  // per real dimension
    out.grid.assign(grid.begin(), grid.end());
    Rng rng(derive_seed(seed, 0x6e6f697365ULL));
    for (auto& v : out.grid) {
        v += cf32(float(sigma * rng.normal()), float(sigma * rng.normal()));
    }
    return out;
}

}  // namespace veritas
