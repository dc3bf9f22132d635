#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "veritas/channel.hpp"
#include "veritas/comparator.hpp"
#include "veritas/grid.hpp"
#include "veritas/monitor.hpp"
#include "veritas/neuralrx.hpp"
#include "veritas/tradrx.hpp"

namespace veritas {

struct ConfigTriple {
    ChannelProfile profile = ChannelProfile::TdlA;
    double speed_mps = 0.0;
    double delay_spread_ns = 100.0;

    std::string str() const;
    bool operator==(const ConfigTriple&) const = default;
};

struct Ebn0Sweep {
    double start_db = 0.0;
    double stop_db = 20.0;
    double step_db = 2.0;

    void validate() const;  // throws std::invalid_argument
    std::vector<double> levels() const;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::uint64_t pilot_seed = 42;
    PilotPattern pattern = PilotPattern::C;
    double carrier_hz = 3.5e9;
    double subcarrier_spacing_hz = 15e3;

    std::vector<ConfigTriple> train_triples;
    std::vector<ConfigTriple> test_triples;
    Ebn0Sweep ebn0;
    int train_frames_per_ebn0 = 200;
    int test_frames_per_ebn0 = 50;

    MonitorTrainSettings monitor;
    std::vector<int> ood_k_values = {5, 10, 15};
    int consecutive_ood = 1;
    int window_frames = 50;     // TradRx parallel-run length after a trigger
    int comparator_window = 1;  // frames pooled per comparator decision

    NeuralRxTrainSettings neuralrx;
    int rx_channels = 32;
    int rx_blocks = 3;

    GridSpec grid_spec() const { return GridSpec::with_pattern(pattern); }
    void validate() const;

    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    static ExperimentConfig load(const std::string& path);
    void save(const std::string& path) const;
};

struct FrameRecord {
    long frame_index = 0;
    ConfigTriple triple;
    double ebn0_db = 0.0;
    std::uint64_t frame_seed = 0;
    double noise_variance = 0.0;
    std::vector<std::uint8_t> tx_bits;
    std::vector<cf32> tx_grid;
    std::vector<cf32> rx_grid;
};

struct DatasetGroup {
    ConfigTriple triple;
    double ebn0_db = 0.0;
    std::uint64_t channel_seed = 0;
    std::vector<FrameRecord> frames;
};

// Frames per (triple, Eb/N0) group; frames inside a group share one fading
// process so consecutive indices form a continuous stream.
struct RecordedDataset {
    PilotPattern pattern = PilotPattern::C;
    std::uint64_t pilot_seed = 42;
    double carrier_hz = 3.5e9;
    double subcarrier_spacing_hz = 15e3;
    std::vector<DatasetGroup> groups;

    GridSpec grid_spec() const { return GridSpec::with_pattern(pattern); }
    long total_frames() const;

    // SigMF-style persistence: JSON metadata plus raw little-endian samples
    // per (group, stage); bit-exact round trip.
    void save(const std::string& dir) const;
    static RecordedDataset load(const std::string& dir);
};

enum class DatasetSplit { Train, Test };

FrameRecord simulate_frame(const GridSpec& spec, const PilotTable& pilots, const ConfigTriple& triple,
                           double ebn0_db, const ExperimentConfig& cfg, std::uint64_t channel_seed,
                           long frame_index);

RecordedDataset generate_dataset(const ExperimentConfig& cfg, DatasetSplit split);

struct ResultRow {
    std::string triple;
    double ebn0_db = 0.0;
    std::string metric;
    double value = 0.0;
};

struct ResultTable {
    std::vector<ResultRow> rows;

    void append(const std::string& triple, double ebn0_db, const std::string& metric, double value);
    void validate() const;  // throws std::runtime_error on out-of-range metrics
    std::string to_csv() const;
    void save_csv(const std::string& path) const;
    static ResultTable from_csv_file(const std::string& path);
};

// Per (triple, Eb/N0): mean BER of TradRx and, when a receiver is supplied,
// of the neural receiver over all frames of the group.
ResultTable sweep_ber(const RecordedDataset& data, NeuralReceiver* neural);

// Per (triple, Eb/N0, k): fraction of tumbling 3-frame windows classified OOD.
ResultTable sweep_ood(const RecordedDataset& data, nn::Model& encoder, const OodModel& ood,
                      std::span<const int> k_values);

struct DecisionLogRow {
    long frame = 0;
    long u_neural = 0;
    long u_trad = 0;
    Retraining decision = Retraining::NotNeeded;
    std::optional<double> ber_neural;
    std::optional<double> ber_trad;
};

std::string decision_log_csv(std::span<const DecisionLogRow> rows);

// Per-frame comparator decisions scored against measured BER orderings.
ResultTable comparator_experiment(const RecordedDataset& data, NeuralReceiver& neural,
                                  std::vector<DecisionLogRow>* log);

// Training-set assembly helpers shared by the CLI and tests.
NeuralReceiver train_receiver(const RecordedDataset& train, const ExperimentConfig& cfg,
                              std::vector<double>* loss_history);
MonitorTrainResult train_monitor_from_dataset(const RecordedDataset& train, const ExperimentConfig& cfg);

// Labeled monitor windows: one class per training triple (pooled over Eb/N0).
void monitor_windows_from_dataset(const RecordedDataset& data, std::vector<MonitorInput>& inputs,
                                  std::vector<int>& labels, std::vector<std::string>& names);

struct StreamSegment {
    ConfigTriple triple;
    double ebn0_db = 10.0;
    int n_frames = 0;
};

struct RxFrameSample {
    std::vector<cf32> rx_grid;
    double noise_variance = 0.0;
};

struct SimulatedStream {
    std::vector<RxFrameSample> frames;          // what the receivers see
    std::vector<std::vector<std::uint8_t>> tx_bits;  // for scoring only
};

SimulatedStream simulate_stream(std::span<const StreamSegment> segments, const ExperimentConfig& cfg);

struct VeritasEvent {
    long frame = -1;
    std::string type;
    nlohmann::json detail;
};

struct VeritasRunResult {
    std::vector<VeritasEvent> events;
    std::vector<DecisionLogRow> decisions;
    nlohmann::json to_json() const;
};

// The live loop: the monitor votes on every tumbling 3-frame window; after
// the configured run of consecutive OOD verdicts TradRx runs in parallel for
// window_frames frames, the comparator decides per frame and a retraining
// flag is raised exactly when it answers "needed". True bits never enter
// this loop.
VeritasRunResult run_veritas(std::span<const RxFrameSample> frames, nn::Model& encoder, const OodModel& ood,
                             NeuralReceiver& neural, const PilotTable& pilots, int window_frames,
                             int consecutive_ood);

}  // namespace veritas
