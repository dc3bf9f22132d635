#include <doctest.h>

#include <cmath>

#include "support/oracles.hpp"
#include "veritas/channel.hpp"
#include "veritas/monitor.hpp"
#include "veritas/rng.hpp"

using namespace veritas;

namespace {

std::vector<std::vector<cf32>> zero_frames(const GridSpec& spec, int n) {
    return std::vector<std::vector<cf32>>(
        std::size_t(n), std::vector<cf32>(std::size_t(spec.symbols_per_frame()) * spec.n_subcarriers));
}

FeatureVector feature_from(std::vector<float> v) { return FeatureVector{std::move(v)}; }

// small synthetic feature sets shared by several cases
struct SyntheticGeometry {
    OodModel model;
    std::vector<FeatureVector> id_test;
    std::vector<FeatureVector> far_ood;
};

SyntheticGeometry make_geometry(int dim, int per_class, double sigma, std::uint64_t seed) {
    Rng rng(seed);
    SyntheticGeometry g;
    std::vector<FeatureVector> features;
    std::vector<int> labels;
    auto sample = [&](double offset) {
        std::vector<float> v(static_cast<std::size_t>(dim));
        for (int d = 0; d < dim; ++d) v[std::size_t(d)] = float(sigma * rng.normal());
        v[0] += float(offset);
        return v;
    };
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < per_class; ++i) {
            features.push_back(feature_from(sample(c == 0 ? 0.0 : 1.0)));  // unit separation
            labels.push_back(c);
        }
    for (int i = 0; i < per_class; ++i) g.far_ood.push_back(feature_from(sample(5.0)));
    g.id_test = features;

    g.model.clusters = characterize_clusters(features, labels, 0.95);
    g.model.id_features = features;
    g.model.feature_class = labels;
    g.model.class_names = {"near", "far"};
    g.model.k = 5;
    g.model.lambda = 0.95;
    g.model.feature_dim = dim;
    return g;
}

}  // namespace

TEST_SUITE("monitor") {

TEST_CASE("monitor input geometry") {
    const GridSpec spec = GridSpec::with_pattern(PilotPattern::C);

    SUBCASE("all-zero frames give an all-zero tensor") {
        const MonitorInput in = build_monitor_input(zero_frames(spec, 3), spec);
        CHECK(in.tensor.shape == std::vector<long>{2, 90, 36});
        for (float v : in.tensor.v) CHECK(v == 0.f);
    }
    SUBCASE("rows are frame-major in order") {
        auto frames = zero_frames(spec, 3);
        // tag the first pilot RE of each frame with its frame number
        for (int f = 0; f < 3; ++f)
            frames[std::size_t(f)][std::size_t(2) * spec.n_subcarriers + 0] = cf32(float(f + 1), -float(f + 1));
        const MonitorInput in = build_monitor_input(frames, spec);
        CHECK(in.tensor.v[0 * 36 + 0] == 1.f);          // frame A, row 0
        CHECK(in.tensor.v[30 * 36 + 0] == 2.f);         // frame B, row 30
        CHECK(in.tensor.v[60 * 36 + 0] == 3.f);         // frame C, row 60
        CHECK(in.tensor.v[(90 + 60) * 36 + 0] == -3.f);  // imaginary plane
    }
    SUBCASE("wrong frame count is rejected") {
        CHECK_THROWS_AS((void)build_monitor_input(zero_frames(spec, 2), spec), std::invalid_argument);
    }
}

TEST_CASE("uniform noise auxiliary class") {
    const GridSpec spec = GridSpec::with_pattern(PilotPattern::C);
    MonitorInput src;
    src.tensor = nn::Tensor({2, 90, 36});
    Rng rng(3);
    for (auto& v : src.tensor.v) v = float(rng.uniform(-1.0, 1.0));

    const MonitorInput aux = make_uniform_noise_aux(src, 9);
    CHECK(aux.tensor.shape == src.tensor.shape);
    float lo = src.tensor.v[0], hi = src.tensor.v[0];
    for (float v : src.tensor.v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    float alo = aux.tensor.v[0], ahi = aux.tensor.v[0];
    for (float v : aux.tensor.v) {
        CHECK(v >= lo);
        CHECK(v <= hi);
        alo = std::min(alo, v);
        ahi = std::max(ahi, v);
    }
    // large-sample empirical range should fill the source span
    CHECK(double(ahi - alo) / double(hi - lo) > 0.99);

    SUBCASE("a constant source stays constant") {
        MonitorInput flat;
        flat.tensor = nn::Tensor({2, 4, 4});
        for (auto& v : flat.tensor.v) v = 0.75f;
        const MonitorInput out = make_uniform_noise_aux(flat, 1);
        for (float v : out.tensor.v) CHECK(v == 0.75f);
    }
}

TEST_CASE("encoder output is a deterministic normalized feature") {
    MonitorEncoderConfig cfg;
    cfg.conv_channels = 4;
    cfg.residual_channels = 8;
    cfg.feature_dim = 512;
    nn::Model enc = make_monitor_encoder(cfg, 5);

    MonitorInput in;
    in.tensor = nn::Tensor({2, 90, 36});
    Rng rng(6);
    for (auto& v : in.tensor.v) v = float(rng.normal());

    const FeatureVector a = encode(enc, in);
    const FeatureVector b = encode(enc, in);
    CHECK(a.y == b.y);
    CHECK(a.y.size() == 512);
    float m = 0.f;
    for (float v : a.y) m = std::max(m, std::abs(v));
    CHECK(m == doctest::Approx(1.f).epsilon(1e-6));
}

TEST_CASE("cluster characterization follows the sorted-quantile rule") {
    SUBCASE("identical features collapse to a zero radius") {
        std::vector<FeatureVector> fs(5, feature_from({1.f, 2.f}));
        const auto clusters = characterize_clusters(fs, {0, 0, 0, 0, 0}, 0.95);
        REQUIRE(clusters.size() == 1);
        CHECK(clusters[0].center[0] == doctest::Approx(1.f));
        CHECK(clusters[0].radius == 0.f);
        CHECK(clusters[0].population == 5);
    }
    SUBCASE("hand-enumerated two-point class") {
        std::vector<FeatureVector> fs = {feature_from({0.f}), feature_from({2.f})};
        const auto clusters = characterize_clusters(fs, {0, 0}, 0.95);
        REQUIRE(clusters.size() == 1);
        CHECK(clusters[0].center[0] == doctest::Approx(1.f));
        // sorted distances [1,1]; keep ceil(1.9) = 2 entries, radius = last
        CHECK(clusters[0].radius == doctest::Approx(1.f));
    }
    SUBCASE("lambda one keeps the maximum distance") {
        Rng rng(8);
        std::vector<FeatureVector> fs;
        std::vector<int> labels;
        for (int i = 0; i < 40; ++i) {
            fs.push_back(feature_from({float(rng.normal()), float(rng.normal())}));
            labels.push_back(0);
        }
        const auto clusters = characterize_clusters(fs, labels, 1.0);
        double max_d = 0.0;
        for (const auto& f : fs) max_d = std::max(max_d, oracles::euclid({f.y[0], f.y[1]},
                                                                         {clusters[0].center[0],
                                                                          clusters[0].center[1]}));
        CHECK(clusters[0].radius == doctest::Approx(max_d).epsilon(1e-6));
    }
    SUBCASE("empty input and bad lambda are rejected") {
        std::vector<FeatureVector> none;
        CHECK_THROWS_AS((void)characterize_clusters(none, {}, 0.95), std::invalid_argument);
        std::vector<FeatureVector> one(1, feature_from({0.f}));
        CHECK_THROWS_AS((void)characterize_clusters(one, {0}, 0.0), std::invalid_argument);
    }
}

TEST_CASE("radius is non-decreasing in lambda and contains the quantile") {
    Rng rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 5 + int(rng.uniform_int(60));
        std::vector<FeatureVector> fs;
        std::vector<int> labels;
        for (int i = 0; i < n; ++i) {
            fs.push_back(feature_from({float(rng.normal()), float(rng.normal()), float(rng.normal())}));
            labels.push_back(0);
        }
        double prev_radius = -1.0;
        for (double lambda : {0.5, 0.7, 0.9, 0.95, 1.0}) {
            const auto clusters = characterize_clusters(fs, labels, lambda);
            CHECK(clusters[0].radius >= prev_radius);
            prev_radius = clusters[0].radius;

            long within = 0;
            for (const auto& f : fs) {
                std::vector<double> fy(f.y.begin(), f.y.end());
                std::vector<double> cc(clusters[0].center.begin(), clusters[0].center.end());
                within += oracles::euclid(fy, cc) <= double(clusters[0].radius);
            }
            CHECK(double(within) >= std::ceil(lambda * n) - 1e-9);
        }
    }
}

TEST_CASE("knn query is exact with index tie-breaks") {
    SUBCASE("a stored feature is its own first neighbor") {
        const SyntheticGeometry g = make_geometry(8, 50, 0.05, 31);
        const auto neighbors = knn_query(g.model, g.model.id_features[17], 3);
        CHECK(neighbors[0].index == 17);
        CHECK(neighbors[0].distance == 0.0);
    }
    SUBCASE("k equal to the population returns everything") {
        const SyntheticGeometry g = make_geometry(4, 10, 0.05, 32);
        const auto neighbors = knn_query(g.model, g.model.id_features[0], 20);
        CHECK(neighbors.size() == 20);
    }
    SUBCASE("invalid k is rejected") {
        const SyntheticGeometry g = make_geometry(4, 10, 0.05, 33);
        CHECK_THROWS_AS((void)knn_query(g.model, g.model.id_features[0], 0), std::invalid_argument);
        CHECK_THROWS_AS((void)knn_query(g.model, g.model.id_features[0], 21), std::invalid_argument);
    }
    SUBCASE("duplicated features rank by lower index") {
        OodModel m;
        m.id_features = {feature_from({1.f}), feature_from({1.f}), feature_from({0.f})};
        m.feature_class = {0, 0, 0};
        m.clusters = characterize_clusters(m.id_features, m.feature_class, 1.0);
        m.k = 2;
        m.feature_dim = 1;
        const auto neighbors = knn_query(m, feature_from({1.f}), 2);
        CHECK(neighbors[0].index == 0);
        CHECK(neighbors[1].index == 1);
    }
    SUBCASE("matches an exhaustive-sort oracle on random features") {
        Rng rng(34);
        OodModel m;
        const int dim = 6;
        for (int i = 0; i < 500; ++i) {
            std::vector<float> v(dim);
            for (auto& x : v) x = float(rng.uniform(-1, 1));
            m.id_features.push_back(feature_from(std::move(v)));
            m.feature_class.push_back(0);
        }
        m.clusters = characterize_clusters(m.id_features, m.feature_class, 0.95);
        m.feature_dim = dim;
        for (int q = 0; q < 100; ++q) {
            std::vector<float> v(dim);
            for (auto& x : v) x = float(rng.uniform(-1, 1));
            const FeatureVector query = feature_from(std::move(v));

            struct E {
                double d;
                long i;
            };
            std::vector<E> all;
            for (std::size_t i = 0; i < m.id_features.size(); ++i) {
                std::vector<double> a(m.id_features[i].y.begin(), m.id_features[i].y.end());
                std::vector<double> b(query.y.begin(), query.y.end());
                all.push_back({oracles::euclid(a, b), long(i)});
            }
            std::sort(all.begin(), all.end(),
                      [](const E& x, const E& y) { return x.d != y.d ? x.d < y.d : x.i < y.i; });
            const auto got = knn_query(m, query, 7);
            for (int k = 0; k < 7; ++k) CHECK(got[std::size_t(k)].index == all[std::size_t(k)].i);
        }
    }
}

TEST_CASE("ood classification on known geometry") {
    const SyntheticGeometry g = make_geometry(16, 500, 0.05, 35);

    SUBCASE("cluster centers classify as ID") {
        for (const auto& c : g.model.clusters) {
            FeatureVector center{c.center};
            CHECK_FALSE(classify_ood(g.model, center).is_ood());
        }
    }
    SUBCASE("far points classify as OOD with high rate") {
        long ood = 0;
        for (const auto& f : g.far_ood) ood += classify_ood(g.model, f).is_ood();
        CHECK(double(ood) / double(g.far_ood.size()) >= 0.99);
    }
    SUBCASE("stored ID features rarely flag as OOD") {
        long ood = 0;
        for (const auto& f : g.id_test) ood += classify_ood(g.model, f).is_ood();
        CHECK(double(ood) / double(g.id_test.size()) <= 0.05);
    }
    SUBCASE("increasing k can only flip verdicts toward ID") {
        for (std::size_t i = 0; i < g.id_test.size(); i += 25) {
            bool prev_ood = classify_ood(g.model, g.id_test[i], 1).is_ood();
            for (int k : {2, 5, 9, 15}) {
                const bool now_ood = classify_ood(g.model, g.id_test[i], k).is_ood();
                CHECK((!prev_ood ? !now_ood : true));  // ID never flips back to OOD
                prev_ood = now_ood;
            }
        }
    }
    SUBCASE("a stored feature within its radius is always ID") {
        const Cluster& c0 = g.model.clusters[0];
        for (std::size_t i = 0; i < g.model.id_features.size(); i += 17) {
            const auto& f = g.model.id_features[i];
            const Cluster& c = g.model.feature_class[i] == c0.class_id ? c0 : g.model.clusters[1];
            std::vector<double> fy(f.y.begin(), f.y.end());
            std::vector<double> cc(c.center.begin(), c.center.end());
            if (oracles::euclid(fy, cc) <= c.radius) CHECK_FALSE(classify_ood(g.model, f).is_ood());
        }
    }
}

TEST_CASE("implementation matches the pseudocode transliteration") {
    Rng rng(40);
    int checked = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const int dim = 2 + int(rng.uniform_int(6));
        const int classes = 1 + int(rng.uniform_int(3));
        std::vector<FeatureVector> fs;
        std::vector<int> labels;
        std::vector<std::vector<double>> fs_ref;
        for (int c = 0; c < classes; ++c) {
            const int n = 3 + int(rng.uniform_int(20));
            for (int i = 0; i < n; ++i) {
                std::vector<float> v(static_cast<std::size_t>(dim));
                for (auto& x : v) x = float(rng.uniform(-1, 1) + 2.0 * c);
                fs_ref.emplace_back(v.begin(), v.end());
                fs.push_back(feature_from(std::move(v)));
                labels.push_back(c);
            }
        }
        const double lambda = 0.5 + 0.5 * rng.uniform01();
        OodModel model;
        model.clusters = characterize_clusters(fs, labels, lambda);
        model.id_features = fs;
        model.feature_class = labels;
        model.feature_dim = dim;
        model.k = 1 + int(rng.uniform_int(5));
        model.lambda = lambda;

        const auto ref_clusters = oracles::characterize_clusters_reference(fs_ref, labels, lambda);
        REQUIRE(ref_clusters.size() == model.clusters.size());
        for (std::size_t c = 0; c < ref_clusters.size(); ++c) {
            CHECK(model.clusters[c].class_id == ref_clusters[c].class_id);
            CHECK(double(model.clusters[c].radius) == doctest::Approx(ref_clusters[c].radius).epsilon(1e-6));
            for (int d = 0; d < dim; ++d)
                CHECK(double(model.clusters[c].center[std::size_t(d)]) ==
                      doctest::Approx(ref_clusters[c].center[std::size_t(d)]).epsilon(1e-5));
        }

        for (int q = 0; q < 25; ++q) {
            std::vector<float> v(static_cast<std::size_t>(dim));
            for (auto& x : v) x = float(rng.uniform(-2, 2 + 2.0 * classes));
            const FeatureVector query = feature_from(v);
            const std::vector<double> query_ref(v.begin(), v.end());
            const bool impl_ood = classify_ood(model, query).is_ood();
            const bool ref_ood =
                oracles::classify_ood_reference(fs_ref, labels, ref_clusters, query_ref, model.k);
            CHECK(impl_ood == ref_ood);
            ++checked;
        }
    }
    CHECK(checked >= 1000);
}

TEST_CASE("monitor training separates synthetic classes") {
    // two structurally different pilot patterns: smooth rows vs alternating
    Rng rng(50);
    std::vector<MonitorInput> inputs;
    std::vector<int> labels;
    for (int i = 0; i < 24; ++i) {
        MonitorInput a;
        a.tensor = nn::Tensor({2, 90, 36});
        for (long r = 0; r < 90; ++r)
            for (long c = 0; c < 36; ++c) {
                a.tensor.v[std::size_t(r * 36 + c)] = float(std::sin(0.2 * double(c)) + 0.05 * rng.normal());
                a.tensor.v[std::size_t((90 + r) * 36 + c)] =
                    float(std::cos(0.2 * double(c)) + 0.05 * rng.normal());
            }
        inputs.push_back(std::move(a));
        labels.push_back(0);

        MonitorInput b;
        b.tensor = nn::Tensor({2, 90, 36});
        for (long r = 0; r < 90; ++r)
            for (long c = 0; c < 36; ++c) {
                const float sign = (r + c) % 2 ? 1.f : -1.f;
                b.tensor.v[std::size_t(r * 36 + c)] = sign + float(0.05 * rng.normal());
                b.tensor.v[std::size_t((90 + r) * 36 + c)] = -sign + float(0.05 * rng.normal());
            }
        inputs.push_back(std::move(b));
        labels.push_back(1);
    }

    MonitorTrainSettings settings;
    settings.encoder.conv_channels = 4;
    settings.encoder.residual_channels = 8;
    settings.encoder.feature_dim = 32;
    settings.epochs = 12;
    settings.batch_triplets = 16;
    settings.learning_rate = 2e-3;
    settings.seed = 4;
    const MonitorTrainResult result =
        train_monitor(inputs, labels, {"smooth", "alternating"}, settings);

    CHECK(result.ood.clusters.size() == 2);
    CHECK(result.loss_history.front() >= result.loss_history.back());

    // intra vs inter distance on the learned embedding
    std::vector<FeatureVector> f0, f1;
    nn::Model& enc = const_cast<nn::Model&>(result.encoder);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        (labels[i] == 0 ? f0 : f1).push_back(encode(enc, inputs[i]));
    }
    auto mean_dist = [](const std::vector<FeatureVector>& a, const std::vector<FeatureVector>& b) {
        double acc = 0;
        long n = 0;
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t j = 0; j < b.size(); ++j) {
                std::vector<double> x(a[i].y.begin(), a[i].y.end());
                std::vector<double> y(b[j].y.begin(), b[j].y.end());
                acc += oracles::euclid(x, y);
                ++n;
            }
        return acc / double(n);
    };
    const double intra = 0.5 * (mean_dist(f0, f0) + mean_dist(f1, f1));
    const double inter = mean_dist(f0, f1);
    CHECK(intra < inter);
}

TEST_CASE("single-class training synthesizes the uniform noise class") {
    Rng rng(60);
    std::vector<MonitorInput> inputs;
    std::vector<int> labels;
    for (int i = 0; i < 12; ++i) {
        MonitorInput a;
        a.tensor = nn::Tensor({2, 90, 36});
        for (long r = 0; r < 180; ++r)
            for (long c = 0; c < 36; ++c)
                a.tensor.v[std::size_t(r * 36 + c)] = float(std::sin(0.3 * double(c)) + 0.02 * rng.normal());
        inputs.push_back(std::move(a));
        labels.push_back(0);
    }
    MonitorTrainSettings settings;
    settings.encoder.conv_channels = 4;
    settings.encoder.residual_channels = 8;
    settings.encoder.feature_dim = 32;
    settings.epochs = 4;
    settings.batch_triplets = 8;
    settings.seed = 9;
    CHECK(settings.lambda == 0.95);  // shipped default
    const MonitorTrainResult result = train_monitor(inputs, labels, {"only_class"}, settings);
    CHECK(result.ood.clusters.size() == 2);
    REQUIRE(result.ood.class_names.size() == 2);
    CHECK(result.ood.class_names[1] == "uniform_noise");
}

TEST_CASE("ood model serialization round trips") {
    const SyntheticGeometry g = make_geometry(8, 40, 0.05, 70);
    const std::string path = "/tmp/veritas_test_ood.bin";
    save_ood_model(path, g.model);
    const OodModel loaded = load_ood_model(path);
    CHECK(loaded.k == g.model.k);
    CHECK(loaded.lambda == doctest::Approx(g.model.lambda));
    CHECK(loaded.feature_dim == g.model.feature_dim);
    REQUIRE(loaded.clusters.size() == g.model.clusters.size());
    for (std::size_t c = 0; c < loaded.clusters.size(); ++c) {
        CHECK(loaded.clusters[c].radius == g.model.clusters[c].radius);
        CHECK(loaded.clusters[c].center == g.model.clusters[c].center);
        CHECK(loaded.clusters[c].population == g.model.clusters[c].population);
    }
    REQUIRE(loaded.id_features.size() == g.model.id_features.size());
    // verdicts agree on fresh queries
    Rng rng(71);
    for (int q = 0; q < 50; ++q) {
        std::vector<float> v(8);
        for (auto& x : v) x = float(rng.uniform(-1, 6));
        FeatureVector query = feature_from(std::move(v));
        CHECK(classify_ood(loaded, query).is_ood() == classify_ood(g.model, query).is_ood());
    }
}

}  // TEST_SUITE
