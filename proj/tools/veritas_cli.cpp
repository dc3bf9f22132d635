// Command-line driver for the link simulator and the verification loop.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "veritas/harness.hpp"
#include "veritas/rng.hpp"

namespace {

using namespace veritas;
using nlohmann::json;

RecordedDataset dataset_or_generate(const std::string& dataset_dir, const ExperimentConfig& cfg, DatasetSplit split) {
    if (!dataset_dir.empty()) return RecordedDataset::load(dataset_dir);
    return generate_dataset(cfg, split);
}

NeuralReceiver load_receiver(const ExperimentConfig& cfg, const std::string& path) {
    NeuralReceiver rx(cfg.grid_spec(), derive_seed(cfg.seed, 0x6e657572ULL), cfg.rx_channels, cfg.rx_blocks);
    rx.load(path);
    return rx;
}

nn::Model load_encoder(const ExperimentConfig& cfg, const std::string& path) {
    nn::Model enc = make_monitor_encoder(cfg.monitor.encoder, 0);
    nn::load_checkpoint(path, enc);
    return enc;
}

std::vector<StreamSegment> load_stream(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("stream: cannot open " + path);
    json j;
    is >> j;
    std::vector<StreamSegment> segments;
    for (const auto& s : j.at("segments")) {
        StreamSegment seg;
        seg.triple.profile = profile_from_string(s.at("profile").get<std::string>());
        seg.triple.speed_mps = s.at("speed_mps").get<double>();
        seg.triple.delay_spread_ns = s.at("delay_spread_ns").get<double>();
        seg.ebn0_db = s.at("ebn0_db").get<double>();
        seg.n_frames = s.at("n_frames").get<int>();
        segments.push_back(seg);
    }
    return segments;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << content;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"5G link-level simulator with neural-receiver verification"};
    app.require_subcommand(1);

    std::string config_path, dataset_dir, out_path, split = "train";
    std::string rx_model_path, encoder_path, ood_path, stream_path, log_path;
    double lambda_override = -1.0;
    std::vector<std::string> report_inputs;

    auto add_config = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment config JSON")->required();
    };

    auto* generate = app.add_subcommand("generate", "simulate frames and persist them per processing stage");
    add_config(generate);
    generate->add_option("--out", out_path, "output dataset directory")->required();
    generate->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}));

    auto* train_rx = app.add_subcommand("train-rx", "train the compact neural receiver");
    add_config(train_rx);
    train_rx->add_option("--dataset", dataset_dir, "recorded dataset directory (default: simulate from config)");
    train_rx->add_option("--out", out_path, "checkpoint path")->required();

    auto* train_mon = app.add_subcommand("train-monitor", "train the environment-change detector");
    add_config(train_mon);
    train_mon->add_option("--dataset", dataset_dir, "recorded dataset directory (default: simulate from config)");
    train_mon->add_option("--encoder-out", encoder_path, "encoder checkpoint path")->required();
    train_mon->add_option("--ood-out", ood_path, "detector model path")->required();

    auto* characterize = app.add_subcommand("characterize", "rebuild clusters and the KNN index from an encoder");
    add_config(characterize);
    characterize->add_option("--dataset", dataset_dir, "recorded dataset directory (default: simulate from config)");
    characterize->add_option("--encoder", encoder_path, "encoder checkpoint")->required();
    characterize->add_option("--lambda", lambda_override, "quantile for cluster radii");
    characterize->add_option("--out", ood_path, "detector model path")->required();

    auto* sweep_ber_cmd = app.add_subcommand("sweep-ber", "BER vs Eb/N0 for both receivers");
    add_config(sweep_ber_cmd);
    sweep_ber_cmd->add_option("--dataset", dataset_dir, "test dataset directory (default: simulate from config)");
    sweep_ber_cmd->add_option("--rx-model", rx_model_path, "neural receiver checkpoint");
    sweep_ber_cmd->add_option("--out", out_path, "result CSV")->required();

    auto* sweep_ood_cmd = app.add_subcommand("sweep-ood", "OOD detection rate per class, Eb/N0 and K");
    add_config(sweep_ood_cmd);
    sweep_ood_cmd->add_option("--dataset", dataset_dir, "test dataset directory (default: simulate from config)");
    sweep_ood_cmd->add_option("--encoder", encoder_path, "encoder checkpoint")->required();
    sweep_ood_cmd->add_option("--ood", ood_path, "detector model")->required();
    sweep_ood_cmd->add_option("--out", out_path, "result CSV")->required();

    auto* compare_cmd = app.add_subcommand("compare", "per-frame comparator decisions scored against true BER");
    add_config(compare_cmd);
    compare_cmd->add_option("--dataset", dataset_dir, "test dataset directory (default: simulate from config)");
    compare_cmd->add_option("--rx-model", rx_model_path, "neural receiver checkpoint")->required();
    compare_cmd->add_option("--out", out_path, "result CSV")->required();
    compare_cmd->add_option("--log", log_path, "per-frame decision log CSV");

    auto* run_cmd = app.add_subcommand("run-veritas", "full loop on a simulated frame stream");
    add_config(run_cmd);
    run_cmd->add_option("--rx-model", rx_model_path, "neural receiver checkpoint")->required();
    run_cmd->add_option("--encoder", encoder_path, "encoder checkpoint")->required();
    run_cmd->add_option("--ood", ood_path, "detector model")->required();
    run_cmd->add_option("--stream", stream_path, "stream description JSON")->required();
    run_cmd->add_option("--out", out_path, "event log JSON")->required();

    auto* report = app.add_subcommand("report", "summarize result CSV files");
    report->add_option("--in", report_inputs, "result CSV files")->required()->expected(-1);
    report->add_option("--out", out_path, "merged CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*generate) {
            const auto cfg = ExperimentConfig::load(config_path);
            const auto data =
                generate_dataset(cfg, split == "train" ? DatasetSplit::Train : DatasetSplit::Test);
            data.save(out_path);
            std::cout << "wrote " << data.total_frames() << " frames to " << out_path << "\n";
        } else if (*train_rx) {
            const auto cfg = ExperimentConfig::load(config_path);
            const auto data = dataset_or_generate(dataset_dir, cfg, DatasetSplit::Train);
            std::vector<double> history;
            NeuralReceiver rx = train_receiver(data, cfg, &history);
            rx.save(out_path);
            std::cout << "trained on " << data.total_frames() << " frames";
            if (!history.empty()) std::cout << "; loss " << history.front() << " -> " << history.back();
            std::cout << "; checkpoint " << out_path << "\n";
        } else if (*train_mon) {
            const auto cfg = ExperimentConfig::load(config_path);
            const auto data = dataset_or_generate(dataset_dir, cfg, DatasetSplit::Train);
            MonitorTrainResult result = train_monitor_from_dataset(data, cfg);
            nn::save_checkpoint(encoder_path, result.encoder);
            save_ood_model(ood_path, result.ood);
            std::cout << "monitor trained; loss ";
            if (!result.loss_history.empty())
                std::cout << result.loss_history.front() << " -> " << result.loss_history.back();
            std::cout << "; encoder " << encoder_path << "; detector " << ood_path << "\n";
        } else if (*characterize) {
            auto cfg = ExperimentConfig::load(config_path);
            if (lambda_override > 0) cfg.monitor.lambda = lambda_override;
            const auto data = dataset_or_generate(dataset_dir, cfg, DatasetSplit::Train);
            nn::Model enc = load_encoder(cfg, encoder_path);

            std::vector<MonitorInput> inputs;
            std::vector<int> labels;
            std::vector<std::string> names;
            monitor_windows_from_dataset(data, inputs, labels, names);
            std::vector<FeatureVector> features;
            features.reserve(inputs.size());
            for (const auto& in : inputs) features.push_back(encode(enc, in));

            OodModel ood;
            ood.clusters = characterize_clusters(features, labels, cfg.monitor.lambda);
            ood.id_features = std::move(features);
            ood.feature_class = labels;
            ood.class_names = names;
            ood.k = cfg.monitor.k;
            ood.lambda = cfg.monitor.lambda;
            ood.feature_dim = cfg.monitor.encoder.feature_dim;
            save_ood_model(ood_path, ood);
            std::cout << "characterized " << ood.clusters.size() << " clusters from " << ood.id_features.size()
                      << " features; detector " << ood_path << "\n";
        } else if (*sweep_ber_cmd) {
            const auto cfg = ExperimentConfig::load(config_path);
            const auto data = dataset_or_generate(dataset_dir, cfg, DatasetSplit::Test);
            ResultTable table;
            if (!rx_model_path.empty()) {
                NeuralReceiver rx = load_receiver(cfg, rx_model_path);
                table = sweep_ber(data, &rx);
            } else {
                table = sweep_ber(data, nullptr);
            }
            table.save_csv(out_path);
            std::cout << table.to_csv();
        } else if (*sweep_ood_cmd) {
            const auto cfg = ExperimentConfig::load(config_path);
            const auto data = dataset_or_generate(dataset_dir, cfg, DatasetSplit::Test);
            nn::Model enc = load_encoder(cfg, encoder_path);
            const OodModel ood = load_ood_model(ood_path);
            const ResultTable table = sweep_ood(data, enc, ood, cfg.ood_k_values);
            table.save_csv(out_path);
            std::cout << table.to_csv();
        } else if (*compare_cmd) {
            const auto cfg = ExperimentConfig::load(config_path);
            const auto data = dataset_or_generate(dataset_dir, cfg, DatasetSplit::Test);
            NeuralReceiver rx = load_receiver(cfg, rx_model_path);
            std::vector<DecisionLogRow> log;
            const ResultTable table = comparator_experiment(data, rx, log_path.empty() ? nullptr : &log);
            table.save_csv(out_path);
            if (!log_path.empty()) write_text(log_path, decision_log_csv(log));
            std::cout << table.to_csv();
        } else if (*run_cmd) {
            const auto cfg = ExperimentConfig::load(config_path);
            NeuralReceiver rx = load_receiver(cfg, rx_model_path);
            nn::Model enc = load_encoder(cfg, encoder_path);
            const OodModel ood = load_ood_model(ood_path);
            const auto segments = load_stream(stream_path);
            const SimulatedStream stream = simulate_stream(segments, cfg);
            const PilotTable pilots = make_pilot_sequence(cfg.grid_spec(), cfg.pilot_seed);
            const VeritasRunResult result =
                run_veritas(stream.frames, enc, ood, rx, pilots, cfg.window_frames, cfg.consecutive_ood);
            write_text(out_path, result.to_json().dump(2) + "\n");
            std::cout << result.events.size() << " events over " << stream.frames.size() << " frames -> "
                      << out_path << "\n";
        } else if (*report) {
            ResultTable merged;
            for (const auto& path : report_inputs) {
                const ResultTable t = ResultTable::from_csv_file(path);
                merged.rows.insert(merged.rows.end(), t.rows.begin(), t.rows.end());
            }
            merged.validate();
            if (!out_path.empty()) merged.save_csv(out_path);
            std::cout << merged.to_csv();
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
