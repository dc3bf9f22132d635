#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "veritas/grid.hpp"
#include "veritas/nn.hpp"

namespace veritas {

// (2, 90, 36) pilot tensor built from three consecutive frames: re/im plane
// x (3 frames x 10 subframes x 3 pilot symbols) rows x 36 pilot subcarriers.
struct MonitorInput {
    nn::Tensor tensor;
};

// Rows are ordered frame-major, then subframe, then pilot symbol ascending.
// throws std::invalid_argument unless exactly 3 frame grids are provided
MonitorInput build_monitor_input(const std::vector<std::vector<cf32>>& frames, const GridSpec& spec);

// Auxiliary training class: i.i.d. uniform noise over [min, max] of the
// source tensor's combined re/im entries, same shape.
MonitorInput make_uniform_noise_aux(const MonitorInput& source, std::uint64_t seed);

struct FeatureVector {
    std::vector<float> y;
};

// Evaluation-mode encoder output for one monitor input; the encoder's final
// layer applies the max-abs normalization, the projection head is not used.
FeatureVector encode(nn::Model& encoder, const MonitorInput& input);

struct Cluster {
    int class_id = 0;
    std::vector<float> center;
    float radius = 0.f;
    long population = 0;
};

// Center = per-class feature mean; radius = distance of the ceil(lambda*N)-th
// closest feature to the center (ascending order).
// throws std::invalid_argument on an empty class or bad lambda
std::vector<Cluster> characterize_clusters(const std::vector<FeatureVector>& features,
                                           const std::vector<int>& labels, double lambda);

struct OodModel {
    std::vector<Cluster> clusters;
    std::vector<FeatureVector> id_features;
    std::vector<int> feature_class;
    std::vector<std::string> class_names;
    int k = 5;
    double lambda = 0.95;
    int feature_dim = 0;

    const Cluster& cluster_of_class(int class_id) const;
};

struct Neighbor {
    double distance = 0.0;
    long index = -1;
};

// Exact brute-force K nearest neighbors by Euclidean distance, ties broken
// by the lower feature index.
std::vector<Neighbor> knn_query(const OodModel& model, const FeatureVector& query, int k);

struct Verdict {
    enum class Decision { ID, OOD };
    Decision decision = Decision::OOD;
    std::vector<std::uint8_t> votes;  // 1 = ID
    std::vector<long> neighbor_ids;

    bool is_ood() const { return decision == Decision::OOD; }
};

// Per-neighbor vote: ID when the query is no farther from the neighbor's
// cluster center than the neighbor itself and within the cluster radius;
// the final decision is ID when any neighbor votes ID.
Verdict classify_ood(const OodModel& model, const FeatureVector& query);
Verdict classify_ood(const OodModel& model, const FeatureVector& query, int k);

struct MonitorEncoderConfig {
    int conv_channels = 16;
    int residual_channels = 32;
    int feature_dim = 512;
    double dropout = 0.1;
};

nn::Model make_monitor_encoder(const MonitorEncoderConfig& cfg, std::uint64_t seed);
nn::Model make_monitor_projection(int feature_dim, std::uint64_t seed, int hidden = 256, int out = 128);

struct MonitorTrainSettings {
    MonitorEncoderConfig encoder;
    double margin = 0.2;
    double lambda = 0.95;
    int k = 5;
    int epochs = 100;
    int batch_triplets = 32;
    double learning_rate = 1e-3;
    double momentum = 0.9;
    long triplets_per_epoch = 0;  // 0 = one per training sample
    std::uint64_t seed = 0;
};

struct MonitorTrainResult {
    nn::Model encoder;
    nn::Model projection;
    OodModel ood;
    std::vector<double> loss_history;
};

// Joint encoder+projection triplet training; the projection is discarded for
// deployment, clusters characterized and the KNN index fitted from the
// training features. A single-class training set synthesizes the uniform
// noise auxiliary class automatically.
MonitorTrainResult train_monitor(const std::vector<MonitorInput>& inputs, const std::vector<int>& labels,
                                 const std::vector<std::string>& class_names, const MonitorTrainSettings& settings);

void save_ood_model(const std::string& path, const OodModel& model);
OodModel load_ood_model(const std::string& path);

}  // namespace veritas
