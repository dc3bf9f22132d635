#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "veritas/harness.hpp"
#include "veritas/rng.hpp"

namespace veritas {
namespace {

using nlohmann::json;

std::vector<std::vector<cf32>> window_grids(const DatasetGroup& g, std::size_t start) {
    return {g.frames[start].rx_grid, g.frames[start + 1].rx_grid, g.frames[start + 2].rx_grid};
}

}  // namespace

void ResultTable::append(const std::string& triple, double ebn0_db, const std::string& metric, double value) {
    rows.push_back({triple, ebn0_db, metric, value});
}

void ResultTable::validate() const {
    for (const auto& r : rows) {
        if (!std::isfinite(r.value)) throw std::runtime_error("ResultTable: non-finite value for " + r.metric);
        if (r.metric.rfind("ber", 0) == 0) {
            // a per-group mean BER stays below one half up to sampling noise
            if (r.value < 0.0 || r.value > 0.52)
                throw std::runtime_error("ResultTable: BER out of range: " + std::to_string(r.value));
        } else if (r.value < 0.0 || r.value > 1.0) {
            throw std::runtime_error("ResultTable: rate out of range for " + r.metric + ": " +
                                     std::to_string(r.value));
        }
    }
}

std::string ResultTable::to_csv() const {
    std::ostringstream os;
    os << "triple,ebn0_db,metric,value\n";
    for (const auto& r : rows) os << r.triple << "," << r.ebn0_db << "," << r.metric << "," << r.value << "\n";
    return os.str();
}

void ResultTable::save_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("ResultTable: cannot open " + path + " for writing");
    os << to_csv();
}

ResultTable ResultTable::from_csv_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("ResultTable: cannot open " + path);
    ResultTable table;
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        ResultRow row;
        std::string ebn0, value;
        std::getline(ls, row.triple, ',');
        std::getline(ls, ebn0, ',');
        std::getline(ls, row.metric, ',');
        std::getline(ls, value, ',');
        row.ebn0_db = std::stod(ebn0);
        row.value = std::stod(value);
        table.rows.push_back(std::move(row));
    }
    return table;
}

ResultTable sweep_ber(const RecordedDataset& data, NeuralReceiver* neural) {
    const GridSpec spec = data.grid_spec();
    const PilotTable pilots = make_pilot_sequence(spec, data.pilot_seed);

    ResultTable table;
    for (const auto& g : data.groups) {
        const long n = long(g.frames.size());
        std::vector<double> trad_ber(static_cast<std::size_t>(n));
        std::vector<double> neural_ber(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic)
        for (long f = 0; f < n; ++f) {
            const FrameRecord& fr = g.frames[std::size_t(f)];
            const SoftBitBlock trad = tradrx_decode(fr.rx_grid, pilots, fr.noise_variance);
            trad_ber[std::size_t(f)] = bit_error_rate(hard_bits(trad), fr.tx_bits);
        }
        if (neural) {
            for (long f = 0; f < n; ++f) {
                const FrameRecord& fr = g.frames[std::size_t(f)];
                const SoftBitBlock nb = neural->decode_frame(fr.rx_grid, pilots);
                neural_ber[std::size_t(f)] = bit_error_rate(hard_bits(nb), fr.tx_bits);
            }
        }
        double trad_mean = 0.0, neural_mean = 0.0;
        for (long f = 0; f < n; ++f) {
            trad_mean += trad_ber[std::size_t(f)];
            neural_mean += neural_ber[std::size_t(f)];
        }
        table.append(g.triple.str(), g.ebn0_db, "ber_trad", trad_mean / double(n));
        if (neural) table.append(g.triple.str(), g.ebn0_db, "ber_neural", neural_mean / double(n));
    }
    table.validate();
    return table;
}

ResultTable sweep_ood(const RecordedDataset& data, nn::Model& encoder, const OodModel& ood,
                      std::span<const int> k_values) {
    const GridSpec spec = data.grid_spec();
    ResultTable table;
    for (const auto& g : data.groups) {
        if (g.frames.size() < 3) continue;
        std::vector<FeatureVector> features;
        for (std::size_t start = 0; start + 3 <= g.frames.size(); start += 3) {
            MonitorInput input = build_monitor_input(window_grids(g, start), spec);
            features.push_back(encode(encoder, input));
        }
        for (int k : k_values) {
            long ood_count = 0;
            for (const auto& f : features) ood_count += classify_ood(ood, f, k).is_ood();
            table.append(g.triple.str(), g.ebn0_db, "ood_rate_k" + std::to_string(k),
                         double(ood_count) / double(features.size()));
        }
    }
    table.validate();
    return table;
}

std::string decision_log_csv(std::span<const DecisionLogRow> rows) {
    std::ostringstream os;
    os << "frame,u_neural,u_trad,decision,ber_neural,ber_trad\n";
    for (const auto& r : rows) {
        os << r.frame << "," << r.u_neural << "," << r.u_trad << ","
           << (r.decision == Retraining::Needed ? "needed" : "not_needed") << ",";
        if (r.ber_neural) os << *r.ber_neural;
        os << ",";
        if (r.ber_trad) os << *r.ber_trad;
        os << "\n";
    }
    return os.str();
}

ResultTable comparator_experiment(const RecordedDataset& data, NeuralReceiver& neural,
                                  std::vector<DecisionLogRow>* log) {
    const GridSpec spec = data.grid_spec();
    const PilotTable pilots = make_pilot_sequence(spec, data.pilot_seed);

    ResultTable table;
    for (const auto& g : data.groups) {
        std::vector<ComparatorDecision> decisions;
        std::vector<FrameBerPair> bers;
        for (const auto& fr : g.frames) {
            const SoftBitBlock trad = tradrx_decode(fr.rx_grid, pilots, fr.noise_variance);
            const SoftBitBlock nb = neural.decode_frame(fr.rx_grid, pilots);
            const ComparatorDecision d = compare(nb, trad);
            decisions.push_back(d);
            FrameBerPair pair;
            pair.ber_neural = bit_error_rate(hard_bits(nb), fr.tx_bits);
            pair.ber_trad = bit_error_rate(hard_bits(trad), fr.tx_bits);
            bers.push_back(pair);
            if (log) {
                DecisionLogRow row;
                row.frame = fr.frame_index;
                row.u_neural = d.u_neural;
                row.u_trad = d.u_trad;
                row.decision = d.retraining;
                row.ber_neural = pair.ber_neural;
                row.ber_trad = pair.ber_trad;
                log->push_back(row);
            }
        }
        table.append(g.triple.str(), g.ebn0_db, "comparator_accuracy", comparator_accuracy(decisions, bers));
    }
    table.validate();
    return table;
}

NeuralReceiver train_receiver(const RecordedDataset& train, const ExperimentConfig& cfg,
                              std::vector<double>* loss_history) {
    const GridSpec spec = train.grid_spec();
    const PilotTable pilots = make_pilot_sequence(spec, train.pilot_seed);

    std::vector<RxInput> inputs;
    std::vector<std::vector<std::uint8_t>> labels;
    const long per_subframe = spec.res_per_subframe();
    for (const auto& g : train.groups) {
        for (const auto& fr : g.frames) {
            for (int sf = 0; sf < spec.n_subframes_per_frame; ++sf) {
                inputs.push_back(build_rx_input(
                    std::span<const cf32>(fr.rx_grid).subspan(std::size_t(sf) * per_subframe,
                                                              std::size_t(per_subframe)),
                    pilots, sf));
                labels.emplace_back(fr.tx_bits.begin() + long(sf) * spec.bits_per_subframe(),
                                    fr.tx_bits.begin() + long(sf + 1) * spec.bits_per_subframe());
            }
        }
    }

    NeuralReceiver rx(spec, derive_seed(cfg.seed, 0x6e657572ULL), cfg.rx_channels, cfg.rx_blocks);
    auto history = rx.train(inputs, labels, cfg.neuralrx);
    if (loss_history) *loss_history = std::move(history);
    return rx;
}

void monitor_windows_from_dataset(const RecordedDataset& data, std::vector<MonitorInput>& inputs,
                                  std::vector<int>& labels, std::vector<std::string>& names) {
    const GridSpec spec = data.grid_spec();
    inputs.clear();
    labels.clear();
    names.clear();

    std::vector<ConfigTriple> triples;
    for (const auto& g : data.groups) {
        if (std::find(triples.begin(), triples.end(), g.triple) == triples.end()) triples.push_back(g.triple);
    }
    for (const auto& t : triples) names.push_back(t.str());

    for (const auto& g : data.groups) {
        const int cls = int(std::find(triples.begin(), triples.end(), g.triple) - triples.begin());
        for (std::size_t start = 0; start + 3 <= g.frames.size(); start += 3) {
            inputs.push_back(build_monitor_input(window_grids(g, start), spec));
            labels.push_back(cls);
        }
    }
}

MonitorTrainResult train_monitor_from_dataset(const RecordedDataset& train, const ExperimentConfig& cfg) {
    std::vector<MonitorInput> inputs;
    std::vector<int> labels;
    std::vector<std::string> names;
    monitor_windows_from_dataset(train, inputs, labels, names);
    MonitorTrainSettings settings = cfg.monitor;
    settings.seed = cfg.seed;
    return train_monitor(inputs, labels, names, settings);
}

SimulatedStream simulate_stream(std::span<const StreamSegment> segments, const ExperimentConfig& cfg) {
    const GridSpec spec = cfg.grid_spec();
    const PilotTable pilots = make_pilot_sequence(spec, cfg.pilot_seed);

    SimulatedStream stream;
    long frame_counter = 0;
    for (std::size_t si = 0; si < segments.size(); ++si) {
        const StreamSegment& seg = segments[si];
        const std::uint64_t channel_seed = derive_seed(cfg.seed, 0x73747265616dULL + si);
        for (int f = 0; f < seg.n_frames; ++f) {
            FrameRecord rec = simulate_frame(spec, pilots, seg.triple, seg.ebn0_db, cfg, channel_seed, f);
            rec.frame_index = frame_counter++;
            stream.frames.push_back({std::move(rec.rx_grid), rec.noise_variance});
            stream.tx_bits.push_back(std::move(rec.tx_bits));
        }
    }
    return stream;
}

json VeritasRunResult::to_json() const {
    json j;
    j["events"] = json::array();
    for (const auto& e : events) {
        json ej;
        ej["frame"] = e.frame;
        ej["type"] = e.type;
        if (!e.detail.is_null()) ej["detail"] = e.detail;
        j["events"].push_back(ej);
    }
    j["decisions"] = json::array();
    for (const auto& d : decisions) {
        j["decisions"].push_back(json{{"frame", d.frame},
                                      {"u_neural", d.u_neural},
                                      {"u_trad", d.u_trad},
                                      {"decision", d.decision == Retraining::Needed ? "needed" : "not_needed"}});
    }
    return j;
}

VeritasRunResult run_veritas(std::span<const RxFrameSample> frames, nn::Model& encoder, const OodModel& ood,
                             NeuralReceiver& neural, const PilotTable& pilots, int window_frames,
                             int consecutive_ood) {
    if (window_frames < 1) throw std::invalid_argument("run_veritas: window must be >= 1");
    if (consecutive_ood < 1) throw std::invalid_argument("run_veritas: consecutive-OOD threshold must be >= 1");

    const GridSpec& spec = pilots.spec;
    VeritasRunResult result;
    std::vector<std::vector<cf32>> window;
    int ood_streak = 0;
    long tradrx_remaining = 0;  // frames the reference receiver still runs for

    for (std::size_t fi = 0; fi < frames.size(); ++fi) {
        const long frame = long(fi);

        // reference receiver active: compare both receivers on this frame
        if (tradrx_remaining > 0) {
            --tradrx_remaining;
            const SoftBitBlock trad = tradrx_decode(frames[fi].rx_grid, pilots, frames[fi].noise_variance);
            const SoftBitBlock nb = neural.decode_frame(frames[fi].rx_grid, pilots);
            const ComparatorDecision d = compare(nb, trad);
            DecisionLogRow row;
            row.frame = frame;
            row.u_neural = d.u_neural;
            row.u_trad = d.u_trad;
            row.decision = d.retraining;
            result.decisions.push_back(row);
            result.events.push_back({frame, "comparator_decision",
                                     json{{"u_neural", d.u_neural},
                                          {"u_trad", d.u_trad},
                                          {"decision", d.retraining == Retraining::Needed ? "needed" : "not_needed"}}});
            if (d.retraining == Retraining::Needed) result.events.push_back({frame, "retrain_flag", json()});
        }

        window.push_back(frames[fi].rx_grid);
        if (window.size() == 3) {
            MonitorInput input = build_monitor_input(window, spec);
            window.clear();
            const Verdict verdict = classify_ood(ood, encode(encoder, input));
            result.events.push_back(
                {frame, "monitor_verdict", json{{"decision", verdict.is_ood() ? "OOD" : "ID"}}});
            if (verdict.is_ood()) {
                ++ood_streak;
                if (ood_streak >= consecutive_ood) {
                    if (tradrx_remaining == 0)
                        result.events.push_back({frame, "tradrx_activated", json{{"window", window_frames}}});
                    tradrx_remaining = window_frames;  // repeated verdicts extend the run
                    ood_streak = 0;
                }
            } else {
                ood_streak = 0;
            }
        }
    }
    return result;
}

}  // namespace veritas
