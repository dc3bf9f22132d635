#include "veritas/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include "veritas/rng.hpp"

namespace veritas {
namespace {

double distance(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = double(a[i]) - double(b[i]);
        acc += d * d;
    }
    return std::sqrt(acc);
}

constexpr char kOodMagic[8] = {'V', 'O', 'O', 'D', 'M', 'D', 'L', '1'};

void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_f32(std::ostream& os, float v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), 8); }

std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    if (!is) throw std::runtime_error("ood model: truncated file");
    return v;
}
float read_f32(std::istream& is) {
    float v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    if (!is) throw std::runtime_error("ood model: truncated file");
    return v;
}
double read_f64(std::istream& is) {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    if (!is) throw std::runtime_error("ood model: truncated file");
    return v;
}

}  // namespace

MonitorInput build_monitor_input(const std::vector<std::vector<cf32>>& frames, const GridSpec& spec) {
    if (frames.size() != 3) throw std::invalid_argument("build_monitor_input: exactly 3 consecutive frames required");
    const long frame_res = long(spec.symbols_per_frame()) * spec.n_subcarriers;
    for (const auto& f : frames)
        if (long(f.size()) != frame_res) throw std::invalid_argument("build_monitor_input: frame grid size mismatch");

    const int n_ps = spec.n_pilot_symbols();
    const int n_pc = spec.n_pilot_subcarriers();
    const long rows = 3L * spec.n_subframes_per_frame * n_ps;

    MonitorInput input;
    input.tensor = nn::Tensor({2, rows, n_pc});
    long row = 0;
    for (int frame = 0; frame < 3; ++frame) {
        const auto& grid = frames[std::size_t(frame)];
        for (int sf = 0; sf < spec.n_subframes_per_frame; ++sf) {
            for (int ps = 0; ps < n_ps; ++ps) {
                const long sym = long(sf) * spec.n_symbols + spec.pilot_symbol_indices[std::size_t(ps)];
                for (int pc = 0; pc < n_pc; ++pc) {
                    const cf32 v = grid[std::size_t(sym) * spec.n_subcarriers +
                                        spec.pilot_subcarrier_indices[std::size_t(pc)]];
                    input.tensor.v[std::size_t(row * n_pc + pc)] = v.real();
                    input.tensor.v[std::size_t((rows + row) * n_pc + pc)] = v.imag();
                }
                ++row;
            }
        }
    }
    return input;
}

MonitorInput make_uniform_noise_aux(const MonitorInput& source, std::uint64_t seed) {
    float lo = 0.f, hi = 0.f;
    if (!source.tensor.v.empty()) {
        lo = hi = source.tensor.v[0];
        for (float v : source.tensor.v) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    MonitorInput out;
    out.tensor = nn::Tensor(source.tensor.shape);
    Rng rng(derive_seed(seed, 0x756e69666f726dULL));
    for (auto& v : out.tensor.v) v = float(rng.uniform(lo, hi));
    return out;
}

FeatureVector encode(nn::Model& encoder, const MonitorInput& input) {
    std::vector<long> batched = input.tensor.shape;
    batched.insert(batched.begin(), 1);
    nn::Tensor y = encoder.forward(input.tensor.reshaped(batched));
    return FeatureVector{std::move(y.v)};
}

std::vector<Cluster> characterize_clusters(const std::vector<FeatureVector>& features,
                                           const std::vector<int>& labels, double lambda) {
    if (features.size() != labels.size()) throw std::invalid_argument("characterize_clusters: labels misaligned");
    if (features.empty()) throw std::invalid_argument("characterize_clusters: no features");
    if (lambda <= 0.0 || lambda > 1.0) throw std::invalid_argument("characterize_clusters: lambda must be in (0,1]");

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    const std::size_t dim = features[0].y.size();
    std::vector<Cluster> clusters;
    clusters.reserve(by_class.size());
    for (const auto& [class_id, idx] : by_class) {
        Cluster c;
        c.class_id = class_id;
        c.population = long(idx.size());
        c.center.assign(dim, 0.f);
        std::vector<double> acc(dim, 0.0);
        for (std::size_t i : idx) {
            if (features[i].y.size() != dim) throw std::invalid_argument("characterize_clusters: ragged features");
            for (std::size_t d = 0; d < dim; ++d) acc[d] += features[i].y[d];
        }
        for (std::size_t d = 0; d < dim; ++d) c.center[d] = float(acc[d] / double(idx.size()));

        std::vector<double> dist;
        dist.reserve(idx.size());
        for (std::size_t i : idx) dist.push_back(distance(features[i].y, c.center));
        std::sort(dist.begin(), dist.end());
        // keep the first ceil(lambda*N) distances, the last kept one is the
        // radius; rounded up so the kept features stay within it
        const std::size_t keep = std::size_t(std::ceil(lambda * double(idx.size())));
        const double r = dist[std::max<std::size_t>(keep, 1) - 1];
        c.radius = float(r);
        if (double(c.radius) < r) c.radius = std::nextafter(c.radius, std::numeric_limits<float>::infinity());
        clusters.push_back(std::move(c));
    }
    return clusters;
}

const Cluster& OodModel::cluster_of_class(int class_id) const {
    for (const auto& c : clusters)
        if (c.class_id == class_id) return c;
    throw std::invalid_argument("OodModel: no cluster for class " + std::to_string(class_id));
}

std::vector<Neighbor> knn_query(const OodModel& model, const FeatureVector& query, int k) {
    if (k < 1 || std::size_t(k) > model.id_features.size())
        throw std::invalid_argument("knn_query: k must be in [1, population]");
    std::vector<Neighbor> all(model.id_features.size());
    for (std::size_t i = 0; i < model.id_features.size(); ++i) {
        all[i].distance = distance(model.id_features[i].y, query.y);
        all[i].index = long(i);
    }
    auto cmp = [](const Neighbor& a, const Neighbor& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.index < b.index;
    };
    std::partial_sort(all.begin(), all.begin() + k, all.end(), cmp);
    all.resize(std::size_t(k));
    return all;
}

Verdict classify_ood(const OodModel& model, const FeatureVector& query) {
    return classify_ood(model, query, model.k);
}

Verdict classify_ood(const OodModel& model, const FeatureVector& query, int k) {
    const auto neighbors = knn_query(model, query, k);
    Verdict v;
    v.votes.reserve(neighbors.size());
    v.neighbor_ids.reserve(neighbors.size());
    bool any_id = false;
    for (const auto& nb : neighbors) {
        const int cls = model.feature_class[std::size_t(nb.index)];
        const Cluster& cluster = model.cluster_of_class(cls);
        const double d_k = distance(model.id_features[std::size_t(nb.index)].y, cluster.center);
        const double d_y = distance(query.y, cluster.center);
        const bool id_vote = d_y <= d_k && d_y <= double(cluster.radius);
        v.votes.push_back(id_vote ? 1 : 0);
        v.neighbor_ids.push_back(nb.index);
        any_id = any_id || id_vote;
    }
    v.decision = any_id ? Verdict::Decision::ID : Verdict::Decision::OOD;
    return v;
}

nn::Model make_monitor_encoder(const MonitorEncoderConfig& cfg, std::uint64_t seed) {
    nn::Model m;
    m.add(std::make_unique<nn::Conv2dT<float>>(cfg.conv_channels, 3));
    m.add(std::make_unique<nn::ReluT<float>>());
    m.add(std::make_unique<nn::MaxPool2dT<float>>(2));
    m.add(std::make_unique<nn::ResidualConv2dT<float>>(cfg.residual_channels, 3));
    m.add(std::make_unique<nn::MaxPool2dT<float>>(2));
    m.add(std::make_unique<nn::FlattenT<float>>());
    if (cfg.dropout > 0) m.add(std::make_unique<nn::DropoutT<float>>(cfg.dropout));
    m.add(std::make_unique<nn::DenseT<float>>(cfg.feature_dim));
    m.add(std::make_unique<nn::MaxAbsNormalizeT<float>>());
    m.build({2, 90, 36}, seed);
    return m;
}

nn::Model make_monitor_projection(int feature_dim, std::uint64_t seed, int hidden, int out) {
    nn::Model m;
    m.add(std::make_unique<nn::DenseT<float>>(hidden));
    m.add(std::make_unique<nn::ReluT<float>>());
    m.add(std::make_unique<nn::DenseT<float>>(out));
    m.add(std::make_unique<nn::MaxAbsNormalizeT<float>>());
    m.build({feature_dim}, seed);
    return m;
}

MonitorTrainResult train_monitor(const std::vector<MonitorInput>& inputs, const std::vector<int>& labels,
                                 const std::vector<std::string>& class_names, const MonitorTrainSettings& settings) {
    if (inputs.empty()) throw std::invalid_argument("train_monitor: empty training set");
    if (inputs.size() != labels.size()) throw std::invalid_argument("train_monitor: labels misaligned");

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    std::vector<std::vector<nn::Tensor>> class_samples;
    std::vector<int> class_ids;
    std::vector<std::string> names = class_names;
    for (const auto& [cls, idx] : by_class) {
        std::vector<nn::Tensor> samples;
        samples.reserve(idx.size());
        for (std::size_t i : idx) samples.push_back(inputs[i].tensor);
        class_samples.push_back(std::move(samples));
        class_ids.push_back(cls);
    }

    // triplet training needs a contrasting class; synthesize the uniform
    // noise class from the lone real class when necessary
    if (class_samples.size() == 1) {
        std::vector<nn::Tensor> aux;
        aux.reserve(inputs.size());
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            MonitorInput noise = make_uniform_noise_aux(inputs[i], derive_seed(settings.seed, i));
            aux.push_back(std::move(noise.tensor));
        }
        class_samples.push_back(std::move(aux));
        const int aux_id = class_ids[0] + 1;
        class_ids.push_back(aux_id);
        names.push_back("uniform_noise");
    }

    MonitorTrainResult result;
    result.encoder = make_monitor_encoder(settings.encoder, derive_seed(settings.seed, 0x656e63ULL));
    result.projection =
        make_monitor_projection(settings.encoder.feature_dim, derive_seed(settings.seed, 0x70726fULL));

    nn::TrainSettings ts;
    ts.epochs = settings.epochs;
    ts.batch_size = settings.batch_triplets;
    ts.learning_rate = settings.learning_rate;
    ts.momentum = settings.momentum;
    ts.seed = settings.seed;
    ts.samples_per_epoch = settings.triplets_per_epoch;
    result.loss_history = nn::train_triplet(result.encoder, &result.projection, class_samples, settings.margin, ts);

    // deployment path: encoder only
    std::vector<FeatureVector> features;
    std::vector<int> feature_labels;
    for (std::size_t c = 0; c < class_samples.size(); ++c) {
        for (const auto& sample : class_samples[c]) {
            MonitorInput in;
            in.tensor = sample;
            features.push_back(encode(result.encoder, in));
            feature_labels.push_back(class_ids[c]);
        }
    }

    result.ood.clusters = characterize_clusters(features, feature_labels, settings.lambda);
    result.ood.id_features = std::move(features);
    result.ood.feature_class = std::move(feature_labels);
    result.ood.class_names = std::move(names);
    result.ood.k = settings.k;
    result.ood.lambda = settings.lambda;
    result.ood.feature_dim = settings.encoder.feature_dim;
    return result;
}

void save_ood_model(const std::string& path, const OodModel& model) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("ood model: cannot open " + path + " for writing");
    os.write(kOodMagic, sizeof(kOodMagic));
    write_u32(os, std::uint32_t(model.feature_dim));
    write_u32(os, std::uint32_t(model.k));
    write_f64(os, model.lambda);
    write_u32(os, std::uint32_t(model.clusters.size()));
    for (std::size_t c = 0; c < model.clusters.size(); ++c) {
        const Cluster& cl = model.clusters[c];
        const std::string name = c < model.class_names.size() ? model.class_names[c] : "";
        write_u32(os, std::uint32_t(cl.class_id));
        write_u32(os, std::uint32_t(name.size()));
        os.write(name.data(), long(name.size()));
        write_u32(os, std::uint32_t(cl.population));
    }
    for (const auto& cl : model.clusters)
        for (float v : cl.center) write_f32(os, v);
    for (const auto& cl : model.clusters) write_f32(os, cl.radius);
    // features stored grouped by cluster order so class membership follows
    // from the populations in the header
    for (const auto& cl : model.clusters) {
        for (std::size_t i = 0; i < model.id_features.size(); ++i) {
            if (model.feature_class[i] != cl.class_id) continue;
            for (float v : model.id_features[i].y) write_f32(os, v);
        }
    }
    if (!os) throw std::runtime_error("ood model: write failed for " + path);
}

OodModel load_ood_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("ood model: cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kOodMagic, sizeof(kOodMagic)) != 0)
        throw std::runtime_error("ood model: bad magic in " + path);

    OodModel model;
    model.feature_dim = int(read_u32(is));
    model.k = int(read_u32(is));
    model.lambda = read_f64(is);
    const std::uint32_t n_clusters = read_u32(is);
    model.clusters.resize(n_clusters);
    model.class_names.resize(n_clusters);
    for (std::uint32_t c = 0; c < n_clusters; ++c) {
        model.clusters[c].class_id = int(read_u32(is));
        const std::uint32_t len = read_u32(is);
        model.class_names[c].resize(len);
        is.read(model.class_names[c].data(), len);
        model.clusters[c].population = long(read_u32(is));
    }
    for (auto& cl : model.clusters) {
        cl.center.resize(std::size_t(model.feature_dim));
        for (auto& v : cl.center) v = read_f32(is);
    }
    for (auto& cl : model.clusters) cl.radius = read_f32(is);
    for (const auto& cl : model.clusters) {
        for (long i = 0; i < cl.population; ++i) {
            FeatureVector f;
            f.y.resize(std::size_t(model.feature_dim));
            for (auto& v : f.y) v = read_f32(is);
            model.id_features.push_back(std::move(f));
            model.feature_class.push_back(cl.class_id);
        }
    }
    return model;
}

}  // namespace veritas
