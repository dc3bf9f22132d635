// numpy-facing bindings for the link simulator, receivers, monitor and
// comparator.

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "veritas/channel.hpp"
#include "veritas/comparator.hpp"
#include "veritas/grid.hpp"
#include "veritas/harness.hpp"
#include "veritas/monitor.hpp"
#include "veritas/neuralrx.hpp"
#include "veritas/rng.hpp"
#include "veritas/tradrx.hpp"

namespace py = pybind11;
using namespace veritas;

namespace {

PilotPattern pattern_of(const std::string& s) {
    if (s == "a") return PilotPattern::A;
    if (s == "b") return PilotPattern::B;
    if (s == "c") return PilotPattern::C;
    if (s == "d") return PilotPattern::D;
    throw std::invalid_argument("unknown pilot pattern: " + s);
}

std::vector<cf32> grid_from_array(const py::array_t<std::complex<float>, py::array::c_style>& arr, long rows,
                                  long cols, const char* what) {
    if (arr.ndim() != 2 || arr.shape(0) != rows || arr.shape(1) != cols)
        throw std::invalid_argument(std::string(what) + ": expected shape (" + std::to_string(rows) + ", " +
                                    std::to_string(cols) + ")");
    const auto* p = arr.data();
    return std::vector<cf32>(p, p + rows * cols);
}

py::array_t<std::complex<float>> grid_to_array(const std::vector<cf32>& grid, long rows, long cols) {
    py::array_t<std::complex<float>> out({rows, cols});
    std::copy(grid.begin(), grid.end(), out.mutable_data());
    return out;
}

py::array_t<float> floats_to_array(const std::vector<float>& v) {
    py::array_t<float> out(long(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

nn::Tensor tensor_from_array(const py::array_t<float, py::array::c_style>& arr) {
    std::vector<long> shape(arr.ndim());
    for (py::ssize_t i = 0; i < arr.ndim(); ++i) shape[std::size_t(i)] = arr.shape(i);
    std::vector<float> data(arr.data(), arr.data() + arr.size());
    return nn::Tensor(std::move(shape), std::move(data));
}

py::array_t<float> tensor_to_array(const nn::Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
    py::array_t<float> out(shape);
    std::copy(t.v.begin(), t.v.end(), out.mutable_data());
    return out;
}

SoftBitBlock llrs_from_array(const py::array_t<float, py::array::c_style>& arr) {
    SoftBitBlock b;
    b.llrs.assign(arr.data(), arr.data() + arr.size());
    return b;
}

// Encoder plus detector bundle mirroring the deployment artifacts.
struct PyMonitor {
    nn::Model encoder;
    OodModel ood;
    std::vector<double> loss_history;
    MonitorEncoderConfig encoder_config;
};

struct PyReceiver {
    GridSpec spec;
    PilotTable pilots;
    NeuralReceiver rx;

    PyReceiver(const std::string& pattern, std::uint64_t pilot_seed, std::uint64_t init_seed, int channels,
               int blocks)
        : spec(GridSpec::with_pattern(pattern_of(pattern))),
          pilots(make_pilot_sequence(spec, pilot_seed)),
          rx(spec, init_seed, channels, blocks) {}
};

}  // namespace

PYBIND11_MODULE(_veritas, m) {
    m.doc() = "Link-level 5G simulator with a verified neural receiver loop";

    py::class_<GridSpec>(m, "GridSpec")
        .def(py::init([](const std::string& pattern) { return GridSpec::with_pattern(pattern_of(pattern)); }),
             py::arg("pattern") = "c")
        .def_readonly("n_symbols", &GridSpec::n_symbols)
        .def_readonly("n_subcarriers", &GridSpec::n_subcarriers)
        .def_readonly("pilot_symbol_indices", &GridSpec::pilot_symbol_indices)
        .def_readonly("pilot_subcarrier_indices", &GridSpec::pilot_subcarrier_indices)
        .def_readonly("n_subframes_per_frame", &GridSpec::n_subframes_per_frame)
        .def_readonly("bits_per_symbol", &GridSpec::bits_per_symbol)
        .def_property_readonly("data_res_per_subframe", &GridSpec::data_res_per_subframe)
        .def_property_readonly("bits_per_frame", &GridSpec::bits_per_frame);

    m.def(
        "extract_masks",
        [](const std::string& pattern) {
            const GridSpec spec = GridSpec::with_pattern(pattern_of(pattern));
            const Masks masks = extract_masks(spec);
            py::array_t<bool> pilot({long(spec.n_symbols), long(spec.n_subcarriers)});
            py::array_t<bool> data({long(spec.n_symbols), long(spec.n_subcarriers)});
            for (long i = 0; i < long(masks.pilot.size()); ++i) {
                pilot.mutable_data()[i] = masks.pilot[std::size_t(i)] != 0;
                data.mutable_data()[i] = masks.data[std::size_t(i)] != 0;
            }
            return py::make_tuple(pilot, data);
        },
        py::arg("pattern") = "c", "Pilot and data masks of one subframe, as (pilot, data) boolean arrays");

    m.def(
        "make_pilot_sequence",
        [](const std::string& pattern, std::uint64_t seed) {
            const GridSpec spec = GridSpec::with_pattern(pattern_of(pattern));
            const PilotTable table = make_pilot_sequence(spec, seed);
            py::array_t<std::complex<float>> out(
                {long(spec.n_subframes_per_frame), long(spec.n_pilot_symbols()), long(spec.n_pilot_subcarriers())});
            std::copy(table.symbols.begin(), table.symbols.end(), out.mutable_data());
            return out;
        },
        py::arg("pattern") = "c", py::arg("seed") = 42);

    m.def(
        "map_bits_16qam",
        [](const py::array_t<std::uint8_t, py::array::c_style>& bits) {
            std::vector<std::uint8_t> b(bits.data(), bits.data() + bits.size());
            const auto symbols = map_bits_16qam(b);
            py::array_t<std::complex<float>> out(long(symbols.size()));
            std::copy(symbols.begin(), symbols.end(), out.mutable_data());
            return out;
        },
        py::arg("bits"));

    m.def(
        "build_tx_frame",
        [](const std::string& pattern, std::uint64_t seed, std::uint64_t pilot_seed) {
            const GridSpec spec = GridSpec::with_pattern(pattern_of(pattern));
            const PilotTable pilots = make_pilot_sequence(spec, pilot_seed);
            const TxFrame frame = build_tx_frame(spec, seed, pilots);
            py::array_t<std::uint8_t> bits(long(frame.payload_bits.size()));
            std::copy(frame.payload_bits.begin(), frame.payload_bits.end(), bits.mutable_data());
            py::dict out;
            out["bits"] = bits;
            out["grid"] = grid_to_array(frame.full_grid(), spec.symbols_per_frame(), spec.n_subcarriers);
            return out;
        },
        py::arg("pattern") = "c", py::arg("seed") = 0, py::arg("pilot_seed") = 42);

    m.def(
        "make_tapset",
        [](const std::string& profile, double delay_spread_ns) {
            const TapSet set = make_tapset(profile_from_string(profile), delay_spread_ns);
            py::dict out;
            std::vector<double> delays, powers;
            std::vector<bool> los;
            for (const auto& t : set.taps) {
                delays.push_back(t.delay_s);
                powers.push_back(t.power);
                los.push_back(t.los);
            }
            out["delays_s"] = delays;
            out["powers"] = powers;
            out["los"] = los;
            out["rms_delay_spread_s"] = set.rms_delay_spread_s();
            return out;
        },
        py::arg("profile"), py::arg("delay_spread_ns"));

    m.def(
        "simulate_frame",
        [](const std::string& pattern, const std::string& profile, double speed_mps, double delay_spread_ns,
           double ebn0_db, std::uint64_t seed, long frame_index, std::uint64_t pilot_seed, double carrier_hz,
           double subcarrier_spacing_hz) {
            ExperimentConfig cfg;
            cfg.pattern = pattern_of(pattern);
            cfg.pilot_seed = pilot_seed;
            cfg.carrier_hz = carrier_hz;
            cfg.subcarrier_spacing_hz = subcarrier_spacing_hz;
            cfg.train_triples = {{profile_from_string(profile), speed_mps, delay_spread_ns}};
            const GridSpec spec = cfg.grid_spec();
            const PilotTable pilots = make_pilot_sequence(spec, pilot_seed);
            const FrameRecord rec =
                simulate_frame(spec, pilots, cfg.train_triples[0], ebn0_db, cfg, seed, frame_index);
            py::array_t<std::uint8_t> bits(long(rec.tx_bits.size()));
            std::copy(rec.tx_bits.begin(), rec.tx_bits.end(), bits.mutable_data());
            py::dict out;
            out["bits"] = bits;
            out["tx_grid"] = grid_to_array(rec.tx_grid, spec.symbols_per_frame(), spec.n_subcarriers);
            out["rx_grid"] = grid_to_array(rec.rx_grid, spec.symbols_per_frame(), spec.n_subcarriers);
            out["noise_variance"] = rec.noise_variance;
            return out;
        },
        py::arg("pattern"), py::arg("profile"), py::arg("speed_mps"), py::arg("delay_spread_ns"),
        py::arg("ebn0_db"), py::arg("seed") = 0, py::arg("frame_index") = 0, py::arg("pilot_seed") = 42,
        py::arg("carrier_hz") = 3.5e9, py::arg("subcarrier_spacing_hz") = 15e3,
        "Generate one frame through the fading channel and noise; returns bits and grids");

    m.def(
        "tradrx_decode",
        [](const py::array_t<std::complex<float>, py::array::c_style>& rx_grid, double noise_variance,
           const std::string& pattern, std::uint64_t pilot_seed) {
            const GridSpec spec = GridSpec::with_pattern(pattern_of(pattern));
            const PilotTable pilots = make_pilot_sequence(spec, pilot_seed);
            const auto grid = grid_from_array(rx_grid, spec.symbols_per_frame(), spec.n_subcarriers, "rx_grid");
            return floats_to_array(tradrx_decode(grid, pilots, noise_variance).llrs);
        },
        py::arg("rx_grid"), py::arg("noise_variance"), py::arg("pattern") = "c", py::arg("pilot_seed") = 42,
        "LS estimation, LMMSE equalization and max-log demapping of one frame");

    m.def(
        "ls_estimate",
        [](const py::array_t<std::complex<float>, py::array::c_style>& rx_grid, const std::string& pattern,
           std::uint64_t pilot_seed) {
            const GridSpec spec = GridSpec::with_pattern(pattern_of(pattern));
            const PilotTable pilots = make_pilot_sequence(spec, pilot_seed);
            const auto grid = grid_from_array(rx_grid, spec.symbols_per_frame(), spec.n_subcarriers, "rx_grid");
            const ChannelEstimate est = ls_estimate(grid, pilots);
            return grid_to_array(est.h_hat, est.n_symbols, est.n_subcarriers);
        },
        py::arg("rx_grid"), py::arg("pattern") = "c", py::arg("pilot_seed") = 42);

    m.def("hard_bits", [](const py::array_t<float, py::array::c_style>& llrs) {
        const auto bits = hard_bits(llrs_from_array(llrs));
        py::array_t<std::uint8_t> out(long(bits.size()));
        std::copy(bits.begin(), bits.end(), out.mutable_data());
        return out;
    });

    m.def("bit_error_rate", [](const py::array_t<std::uint8_t, py::array::c_style>& a,
                               const py::array_t<std::uint8_t, py::array::c_style>& b) {
        std::vector<std::uint8_t> va(a.data(), a.data() + a.size());
        std::vector<std::uint8_t> vb(b.data(), b.data() + b.size());
        return bit_error_rate(va, vb);
    });

    py::class_<PyReceiver>(m, "NeuralReceiver")
        .def(py::init<const std::string&, std::uint64_t, std::uint64_t, int, int>(), py::arg("pattern") = "c",
             py::arg("pilot_seed") = 42, py::arg("init_seed") = 0, py::arg("channels") = 32,
             py::arg("blocks") = 3)
        .def_property_readonly("parameter_count", [](PyReceiver& r) { return r.rx.parameter_count(); })
        .def("save", [](PyReceiver& r, const std::string& path) { r.rx.save(path); })
        .def("load", [](PyReceiver& r, const std::string& path) { r.rx.load(path); })
        .def(
            "forward_subframe",
            [](PyReceiver& r, const py::array_t<std::complex<float>, py::array::c_style>& rx_subframe,
               int subframe_index) {
                const auto grid =
                    grid_from_array(rx_subframe, r.spec.n_symbols, r.spec.n_subcarriers, "rx_subframe");
                const RxOutput out = r.rx.forward(build_rx_input(grid, r.pilots, subframe_index));
                py::dict d;
                d["llrs_raw"] = tensor_to_array(out.llrs_raw);
                d["llrs_valid"] = floats_to_array(out.llrs_valid);
                return d;
            },
            py::arg("rx_subframe"), py::arg("subframe_index") = 0,
            "Raw (14, 72, 8) LLRs and the valid slice for one subframe")
        .def(
            "decode_frame",
            [](PyReceiver& r, const py::array_t<std::complex<float>, py::array::c_style>& rx_grid) {
                const auto grid =
                    grid_from_array(rx_grid, r.spec.symbols_per_frame(), r.spec.n_subcarriers, "rx_grid");
                return floats_to_array(r.rx.decode_frame(grid, r.pilots).llrs);
            },
            py::arg("rx_grid"))
        .def(
            "train_on_frames",
            [](PyReceiver& r, const py::array_t<std::complex<float>, py::array::c_style>& rx_grids,
               const py::array_t<std::uint8_t, py::array::c_style>& bits, int epochs, int batch_size,
               double learning_rate, double momentum, std::uint64_t seed, long samples_per_epoch) {
                const long frame_res = long(r.spec.symbols_per_frame()) * r.spec.n_subcarriers;
                if (rx_grids.ndim() != 3 || rx_grids.shape(1) != r.spec.symbols_per_frame() ||
                    rx_grids.shape(2) != r.spec.n_subcarriers)
                    throw std::invalid_argument("train_on_frames: rx_grids must be (N, 140, 72)");
                if (bits.ndim() != 2 || bits.shape(0) != rx_grids.shape(0) ||
                    bits.shape(1) != r.spec.bits_per_frame())
                    throw std::invalid_argument("train_on_frames: bits must be (N, bits_per_frame)");

                std::vector<RxInput> inputs;
                std::vector<std::vector<std::uint8_t>> labels;
                const long per = r.spec.res_per_subframe();
                for (long f = 0; f < rx_grids.shape(0); ++f) {
                    const cf32* grid = reinterpret_cast<const cf32*>(rx_grids.data()) + f * frame_res;
                    const std::uint8_t* fb = bits.data() + f * r.spec.bits_per_frame();
                    for (int sf = 0; sf < r.spec.n_subframes_per_frame; ++sf) {
                        inputs.push_back(build_rx_input(
                            std::span<const cf32>(grid + sf * per, std::size_t(per)), r.pilots, sf));
                        labels.emplace_back(fb + long(sf) * r.spec.bits_per_subframe(),
                                            fb + long(sf + 1) * r.spec.bits_per_subframe());
                    }
                }
                NeuralRxTrainSettings s;
                s.epochs = epochs;
                s.batch_size = batch_size;
                s.learning_rate = learning_rate;
                s.momentum = momentum;
                s.seed = seed;
                s.samples_per_epoch = samples_per_epoch;
                return r.rx.train(inputs, labels, s);
            },
            py::arg("rx_grids"), py::arg("bits"), py::arg("epochs") = 8, py::arg("batch_size") = 12,
            py::arg("learning_rate") = 0.15, py::arg("momentum") = 0.9, py::arg("seed") = 0,
            py::arg("samples_per_epoch") = 0, "Masked BCE training on whole frames; returns per-epoch losses");

    m.def(
        "build_monitor_input",
        [](const py::array_t<std::complex<float>, py::array::c_style>& frames, const std::string& pattern) {
            const GridSpec spec = GridSpec::with_pattern(pattern_of(pattern));
            if (frames.ndim() != 3 || frames.shape(0) != 3)
                throw std::invalid_argument("build_monitor_input: expected (3, 140, 72)");
            std::vector<std::vector<cf32>> grids;
            const long frame_res = frames.shape(1) * frames.shape(2);
            for (int f = 0; f < 3; ++f) {
                const cf32* p = reinterpret_cast<const cf32*>(frames.data()) + f * frame_res;
                grids.emplace_back(p, p + frame_res);
            }
            return tensor_to_array(build_monitor_input(grids, spec).tensor);
        },
        py::arg("frames"), py::arg("pattern") = "c",
        "Pilot tensor (2, 90, 36) from three consecutive frame grids");

    m.def(
        "make_uniform_noise_aux",
        [](const py::array_t<float, py::array::c_style>& tensor, std::uint64_t seed) {
            MonitorInput src;
            src.tensor = tensor_from_array(tensor);
            return tensor_to_array(make_uniform_noise_aux(src, seed).tensor);
        },
        py::arg("tensor"), py::arg("seed") = 0);

    py::class_<PyMonitor>(m, "Monitor")
        .def_property_readonly("loss_history", [](const PyMonitor& m_) { return m_.loss_history; })
        .def_property_readonly("k", [](const PyMonitor& m_) { return m_.ood.k; })
        .def_property_readonly("lambda_", [](const PyMonitor& m_) { return m_.ood.lambda; })
        .def_property_readonly("feature_dim", [](const PyMonitor& m_) { return m_.ood.feature_dim; })
        .def_property_readonly("class_names", [](const PyMonitor& m_) { return m_.ood.class_names; })
        .def_property_readonly("cluster_radii",
                               [](const PyMonitor& m_) {
                                   std::vector<float> radii;
                                   for (const auto& c : m_.ood.clusters) radii.push_back(c.radius);
                                   return radii;
                               })
        .def("encode",
             [](PyMonitor& m_, const py::array_t<float, py::array::c_style>& tensor) {
                 MonitorInput in;
                 in.tensor = tensor_from_array(tensor);
                 return floats_to_array(encode(m_.encoder, in).y);
             })
        .def(
            "classify",
            [](PyMonitor& m_, const py::array_t<float, py::array::c_style>& feature, int k) {
                FeatureVector f;
                f.y.assign(feature.data(), feature.data() + feature.size());
                const Verdict v = k > 0 ? classify_ood(m_.ood, f, k) : classify_ood(m_.ood, f);
                py::dict out;
                out["ood"] = v.is_ood();
                out["votes"] = v.votes;
                out["neighbor_ids"] = v.neighbor_ids;
                return out;
            },
            py::arg("feature"), py::arg("k") = 0)
        .def("save",
             [](PyMonitor& m_, const std::string& encoder_path, const std::string& ood_path) {
                 nn::save_checkpoint(encoder_path, m_.encoder);
                 save_ood_model(ood_path, m_.ood);
             })
        .def_static(
            "load",
            [](const std::string& encoder_path, const std::string& ood_path, int conv_channels,
               int residual_channels, int feature_dim, double dropout) {
                auto m_ = std::make_unique<PyMonitor>();
                m_.get()->encoder_config = {conv_channels, residual_channels, feature_dim, dropout};
                m_.get()->encoder = make_monitor_encoder(m_.get()->encoder_config, 0);
                nn::load_checkpoint(encoder_path, m_.get()->encoder);
                m_.get()->ood = load_ood_model(ood_path);
                return m_;
            },
            py::arg("encoder_path"), py::arg("ood_path"), py::arg("conv_channels") = 16,
            py::arg("residual_channels") = 32, py::arg("feature_dim") = 512, py::arg("dropout") = 0.1);

    m.def(
        "train_monitor",
        [](const py::array_t<float, py::array::c_style>& inputs, const std::vector<int>& labels,
           const std::vector<std::string>& class_names, int conv_channels, int residual_channels,
           int feature_dim, double dropout, double margin, double lambda, int k, int epochs, int batch_triplets,
           double learning_rate, double momentum, long triplets_per_epoch, std::uint64_t seed) {
            if (inputs.ndim() != 4 || inputs.shape(1) != 2 || inputs.shape(2) != 90 || inputs.shape(3) != 36)
                throw std::invalid_argument("train_monitor: inputs must be (N, 2, 90, 36)");
            std::vector<MonitorInput> in;
            const long per = inputs.shape(1) * inputs.shape(2) * inputs.shape(3);
            for (long i = 0; i < inputs.shape(0); ++i) {
                MonitorInput one;
                one.tensor = nn::Tensor({2, 90, 36});
                std::copy(inputs.data() + i * per, inputs.data() + (i + 1) * per, one.tensor.v.begin());
                in.push_back(std::move(one));
            }
            MonitorTrainSettings s;
            s.encoder = {conv_channels, residual_channels, feature_dim, dropout};
            s.margin = margin;
            s.lambda = lambda;
            s.k = k;
            s.epochs = epochs;
            s.batch_triplets = batch_triplets;
            s.learning_rate = learning_rate;
            s.momentum = momentum;
            s.triplets_per_epoch = triplets_per_epoch;
            s.seed = seed;
            MonitorTrainResult r = train_monitor(in, labels, class_names, s);
            auto out = std::make_unique<PyMonitor>();
            out.get()->encoder = std::move(r.encoder);
            out.get()->ood = std::move(r.ood);
            out.get()->loss_history = std::move(r.loss_history);
            out.get()->encoder_config = s.encoder;
            return out;
        },
        py::arg("inputs"), py::arg("labels"), py::arg("class_names"), py::arg("conv_channels") = 16,
        py::arg("residual_channels") = 32, py::arg("feature_dim") = 512, py::arg("dropout") = 0.1,
        py::arg("margin") = 0.2, py::arg("lambda_") = 0.95, py::arg("k") = 5, py::arg("epochs") = 100,
        py::arg("batch_triplets") = 32, py::arg("learning_rate") = 1e-3, py::arg("momentum") = 0.9,
        py::arg("triplets_per_epoch") = 0, py::arg("seed") = 0,
        "Triplet-train the encoder and projection, characterize clusters, fit the KNN detector");

    m.def("llr_to_prob", [](const py::array_t<float, py::array::c_style>& llrs) {
        const ProbabilityBlock p = llr_to_prob(llrs_from_array(llrs));
        py::array_t<double> out(long(p.probs.size()));
        std::copy(p.probs.begin(), p.probs.end(), out.mutable_data());
        return out;
    });

    m.def("bin_probabilities", [](const py::array_t<double, py::array::c_style>& probs) {
        ProbabilityBlock p;
        p.probs.assign(probs.data(), probs.data() + probs.size());
        const HistogramBins bins = bin_probabilities(p);
        py::array_t<long> out(10);
        std::copy(bins.counts.begin(), bins.counts.end(), out.mutable_data());
        return out;
    });

    m.def("uncertainty_count", [](const py::array_t<double, py::array::c_style>& probs) {
        ProbabilityBlock p;
        p.probs.assign(probs.data(), probs.data() + probs.size());
        return uncertainty_count(bin_probabilities(p));
    });

    m.def(
        "compare",
        [](const py::array_t<float, py::array::c_style>& neural_llrs,
           const py::array_t<float, py::array::c_style>& trad_llrs) {
            const ComparatorDecision d = compare(llrs_from_array(neural_llrs), llrs_from_array(trad_llrs));
            py::dict out;
            out["u_neural"] = d.u_neural;
            out["u_trad"] = d.u_trad;
            out["retraining_needed"] = d.retraining == Retraining::Needed;
            return out;
        },
        py::arg("neural_llrs"), py::arg("trad_llrs"),
        "Histogram-binning comparison of two soft-bit blocks from the same frames");

    m.def(
        "generate_dataset",
        [](const std::string& config_path, const std::string& split, const std::string& out_dir) {
            const ExperimentConfig cfg = ExperimentConfig::load(config_path);
            const RecordedDataset data =
                generate_dataset(cfg, split == "train" ? DatasetSplit::Train : DatasetSplit::Test);
            data.save(out_dir);
            return data.total_frames();
        },
        py::arg("config_path"), py::arg("split"), py::arg("out_dir"),
        "Simulate a dataset per the experiment config and persist it per stage");
}
