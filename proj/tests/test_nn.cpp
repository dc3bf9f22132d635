#include <doctest.h>

#include <cmath>

#include "support/oracles.hpp"
#include "veritas/nn.hpp"

using namespace veritas;
using nn::TensorT;

namespace {

TensorT<double> random_tensor(std::vector<long> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    TensorT<double> t(std::move(shape));
    for (auto& v : t.v) v = rng.uniform(lo, hi);
    return t;
}

// Gradient check for a model under the linear probe loss L = <y, R>; the
// probe fixes dL/dy = R so parameter and input gradients come from one
// backward pass.
double model_gradcheck(nn::ModelT<double>& model, const std::vector<long>& batched_input, std::uint64_t seed) {
    Rng rng(seed);
    TensorT<double> x = random_tensor(batched_input, rng);

    nn::TraceT<double> probe_trace;
    Rng probe_rng(seed + 1);
    TensorT<double> y0 = model.forward_train(x, probe_trace, probe_rng);
    TensorT<double> r = random_tensor(y0.shape, rng);

    auto loss_fn = [&] {
        nn::TraceT<double> tr;
        Rng fwd_rng(seed + 1);  // same stream keeps dropout masks fixed
        TensorT<double> y = model.forward_train(x, tr, fwd_rng);
        double acc = 0.0;
        for (long i = 0; i < y.numel(); ++i) acc += y.v[std::size_t(i)] * r.v[std::size_t(i)];
        return acc;
    };

    nn::TraceT<double> tr;
    Rng fwd_rng(seed + 1);
    TensorT<double> y = model.forward_train(x, tr, fwd_rng);
    model.zero_grad();
    TensorT<double> dx = model.backward(r, tr);

    double worst = oracles::finite_difference_max_rel_error(x.v, loss_fn, dx.v);
    for (auto* p : model.params()) {
        worst = std::max(worst, oracles::finite_difference_max_rel_error(p->value.v, loss_fn, p->grad.v));
    }
    return worst;
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("an empty model is the identity") {
    nn::ModelT<double> m;
    m.build({3}, 0);
    Rng rng(1);
    const auto x = random_tensor({4, 3}, rng);
    CHECK(m.forward(x).v == x.v);
}

TEST_CASE("a zeroed dense layer maps everything to zero") {
    nn::ModelT<double> m;
    m.add(std::make_unique<nn::DenseT<double>>(5));
    m.build({3}, 7);
    for (auto* p : m.params()) p->value.v.assign(p->value.v.size(), 0.0);
    Rng rng(2);
    const auto y = m.forward(random_tensor({2, 3}, rng));
    for (double v : y.v) CHECK(v == 0.0);
}

TEST_CASE("a 1x1 identity conv kernel preserves its input") {
    nn::ModelT<double> m;
    m.add(std::make_unique<nn::Conv2dT<double>>(3, 1));
    m.build({3, 4, 5}, 7);
    auto params = m.params();
    params[0]->value.v.assign(params[0]->value.v.size(), 0.0);
    for (int c = 0; c < 3; ++c) params[0]->value.v[std::size_t(c * 3 + c)] = 1.0;
    params[1]->value.v.assign(params[1]->value.v.size(), 0.0);
    Rng rng(3);
    const auto x = random_tensor({2, 3, 4, 5}, rng);
    const auto y = m.forward(x);
    for (long i = 0; i < x.numel(); ++i) CHECK(y.v[std::size_t(i)] == doctest::Approx(x.v[std::size_t(i)]));
}

TEST_CASE("feature normalization follows its definition") {
    TensorT<double> x({3}, {2.0, -4.0, 1.0});
    const auto y = nn::normalize_feature(x);
    CHECK(y.v[0] == doctest::Approx(0.5));
    CHECK(y.v[1] == doctest::Approx(-1.0));
    CHECK(y.v[2] == doctest::Approx(0.25));

    SUBCASE("nonzero inputs normalize to unit max magnitude") {
        Rng rng(4);
        for (int trial = 0; trial < 100; ++trial) {
            const auto t = random_tensor({7}, rng);
            const auto n = nn::normalize_feature(t);
            double m = 0.0;
            for (double v : n.v) m = std::max(m, std::abs(v));
            CHECK(m == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    SUBCASE("all-zero input passes through") {
        TensorT<double> z({4});
        CHECK(nn::normalize_feature(z).v == z.v);
    }
}

TEST_CASE("triplet loss closed-form cases") {
    TensorT<double> a({1, 2}, {1.0, 0.0});
    TensorT<double> n({1, 2}, {0.0, 2.0});
    SUBCASE("satisfied triplet costs nothing") {
        const auto r = nn::triplet_loss(a, a, n, 0.2);
        CHECK(r.loss == 0.0);
        for (double g : r.grad_anchor.v) CHECK(g == 0.0);
    }
    SUBCASE("anchor equal to negative costs margin plus positive distance") {
        TensorT<double> p({1, 2}, {1.0, 1.0});
        const auto r = nn::triplet_loss(a, p, a, 0.2);
        CHECK(r.loss == doctest::Approx(0.2 + 1.0));
    }
    SUBCASE("negative margin is rejected") {
        CHECK_THROWS_AS((void)nn::triplet_loss(a, a, n, -0.1), std::invalid_argument);
    }
}

TEST_CASE("bce with logits closed-form cases") {
    SUBCASE("zero logits cost ln 2 for any target mix") {
        TensorT<double> z({4});
        TensorT<double> t({4}, {0.0, 1.0, 0.0, 1.0});
        const auto r = nn::bce_with_logits<double>(z, t, nullptr);
        CHECK(r.loss == doctest::Approx(std::log(2.0)));
    }
    SUBCASE("a fully masked batch contributes nothing") {
        Rng rng(5);
        const auto z = random_tensor({6}, rng);
        const auto t = random_tensor({6}, rng, 0.0, 1.0);
        TensorT<double> mask({6});
        const auto r = nn::bce_with_logits(z, t, &mask);
        CHECK(r.loss == 0.0);
        for (double g : r.grad.v) CHECK(g == 0.0);
    }
    SUBCASE("shape mismatches are rejected") {
        TensorT<double> z({3});
        TensorT<double> t({4});
        CHECK_THROWS_AS((void)nn::bce_with_logits<double>(z, t, nullptr), std::invalid_argument);
    }
}

TEST_CASE("every layer passes a finite-difference gradient check") {
    SUBCASE("dense") {
        nn::ModelT<double> m;
        m.add(std::make_unique<nn::DenseT<double>>(6));
        m.build({5}, 11);
        CHECK(model_gradcheck(m, {3, 5}, 100) < 1e-4);
    }
    SUBCASE("conv 3x3") {
        nn::ModelT<double> m;
        m.add(std::make_unique<nn::Conv2dT<double>>(4, 3));
        m.build({3, 6, 5}, 12);
        CHECK(model_gradcheck(m, {2, 3, 6, 5}, 101) < 1e-4);
    }
    SUBCASE("relu") {
        nn::ModelT<double> m;
        m.add(std::make_unique<nn::ReluT<double>>());
        m.build({9}, 13);
        CHECK(model_gradcheck(m, {4, 9}, 102) < 1e-4);
    }
    SUBCASE("maxpool") {
        nn::ModelT<double> m;
        m.add(std::make_unique<nn::MaxPool2dT<double>>(2));
        m.build({2, 6, 6}, 14);
        CHECK(model_gradcheck(m, {2, 2, 6, 6}, 103) < 1e-4);
    }
    SUBCASE("dropout") {
        nn::ModelT<double> m;
        m.add(std::make_unique<nn::DropoutT<double>>(0.3));
        m.build({12}, 15);
        CHECK(model_gradcheck(m, {3, 12}, 104) < 1e-4);
    }
    SUBCASE("flatten plus max-abs normalization") {
        nn::ModelT<double> m;
        m.add(std::make_unique<nn::FlattenT<double>>());
        m.add(std::make_unique<nn::MaxAbsNormalizeT<double>>());
        m.build({2, 3, 4}, 16);
        CHECK(model_gradcheck(m, {3, 2, 3, 4}, 105) < 1e-4);
    }
    SUBCASE("residual conv block with projection skip") {
        nn::ModelT<double> m;
        m.add(std::make_unique<nn::ResidualConv2dT<double>>(4, 3));
        m.build({2, 5, 4}, 17);
        CHECK(model_gradcheck(m, {2, 2, 5, 4}, 106) < 1e-4);
    }
    SUBCASE("residual conv block with identity skip") {
        nn::ModelT<double> m;
        m.add(std::make_unique<nn::ResidualConv2dT<double>>(3, 3));
        m.build({3, 4, 4}, 18);
        CHECK(model_gradcheck(m, {2, 3, 4, 4}, 107) < 1e-4);
    }
    SUBCASE("encoder-shaped composite") {
        nn::ModelT<double> m;
        m.add(std::make_unique<nn::Conv2dT<double>>(3, 3));
        m.add(std::make_unique<nn::ReluT<double>>());
        m.add(std::make_unique<nn::MaxPool2dT<double>>(2));
        m.add(std::make_unique<nn::ResidualConv2dT<double>>(4, 3));
        m.add(std::make_unique<nn::FlattenT<double>>());
        m.add(std::make_unique<nn::DropoutT<double>>(0.1));
        m.add(std::make_unique<nn::DenseT<double>>(8));
        m.add(std::make_unique<nn::MaxAbsNormalizeT<double>>());
        m.build({2, 8, 6}, 19);
        CHECK(model_gradcheck(m, {2, 2, 8, 6}, 108) < 1e-4);
    }
}

TEST_CASE("loss gradients pass finite differences") {
    Rng rng(6);
    SUBCASE("bce with logits and mask") {
        auto z = random_tensor({10}, rng, -2.0, 2.0);
        TensorT<double> t({10});
        TensorT<double> mask({10});
        for (int i = 0; i < 10; ++i) {
            t.v[std::size_t(i)] = rng.bit();
            mask.v[std::size_t(i)] = i % 3 == 0 ? 0.0 : 1.0;
        }
        auto loss_fn = [&] { return nn::bce_with_logits(z, t, &mask).loss; };
        const auto analytic = nn::bce_with_logits(z, t, &mask);
        CHECK(oracles::finite_difference_max_rel_error(z.v, loss_fn, analytic.grad.v) < 1e-4);
    }
    SUBCASE("triplet") {
        auto a = random_tensor({4, 3}, rng);
        auto p = random_tensor({4, 3}, rng);
        auto n = random_tensor({4, 3}, rng);
        const auto analytic = nn::triplet_loss(a, p, n, 0.5);
        auto loss_a = [&] { return nn::triplet_loss(a, p, n, 0.5).loss; };
        CHECK(oracles::finite_difference_max_rel_error(a.v, loss_a, analytic.grad_anchor.v) < 1e-4);
        CHECK(oracles::finite_difference_max_rel_error(p.v, loss_a, analytic.grad_positive.v) < 1e-4);
        CHECK(oracles::finite_difference_max_rel_error(n.v, loss_a, analytic.grad_negative.v) < 1e-4);
    }
}

TEST_CASE("triplet training separates a linearly separable toy set") {
    Rng rng(7);
    std::vector<std::vector<TensorT<float>>> classes(2);
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < 32; ++i) {
            TensorT<float> s({2});
            s.v[0] = float((c == 0 ? 1.0 : -1.0) + 0.1 * rng.normal());
            s.v[1] = float(0.1 * rng.normal());
            classes[std::size_t(c)].push_back(std::move(s));
        }
    nn::ModelT<float> mlp;
    mlp.add(std::make_unique<nn::DenseT<float>>(8));
    mlp.add(std::make_unique<nn::ReluT<float>>());
    mlp.add(std::make_unique<nn::DenseT<float>>(4));
    mlp.add(std::make_unique<nn::MaxAbsNormalizeT<float>>());
    mlp.build({2}, 77);

    nn::TrainSettings s;
    s.epochs = 100;
    s.batch_size = 16;
    s.learning_rate = 5e-2;
    s.momentum = 0.9;
    s.seed = 7;
    const auto history = nn::train_triplet<float>(mlp, nullptr, classes, 0.2, s);
    REQUIRE(history.size() == 100);
    double best = history[0];
    for (double h : history) best = std::min(best, h);
    CHECK(best <= 0.01 * history[0]);
}

TEST_CASE("zero learning rate leaves parameters untouched") {
    nn::ModelT<float> m;
    m.add(std::make_unique<nn::DenseT<float>>(4));
    m.build({3}, 21);
    std::vector<float> before = m.params()[0]->value.v;

    Rng rng(8);
    std::vector<TensorT<float>> xs, ts;
    for (int i = 0; i < 8; ++i) {
        TensorT<float> x({3}), t({4});
        for (auto& v : x.v) v = float(rng.uniform01());
        for (auto& v : t.v) v = float(rng.bit());
        xs.push_back(x);
        ts.push_back(t);
    }
    nn::TrainSettings s;
    s.epochs = 3;
    s.batch_size = 4;
    s.learning_rate = 0.0;
    s.seed = 5;
    (void)nn::train_supervised<float>(m, xs, ts, nullptr, s);
    CHECK(m.params()[0]->value.v == before);
}

TEST_CASE("training is reproducible for a fixed seed") {
    auto run = [] {
        nn::ModelT<float> m;
        m.add(std::make_unique<nn::DenseT<float>>(6));
        m.add(std::make_unique<nn::ReluT<float>>());
        m.add(std::make_unique<nn::DropoutT<float>>(0.2));
        m.add(std::make_unique<nn::DenseT<float>>(2));
        m.build({4}, 33);
        Rng rng(9);
        std::vector<TensorT<float>> xs, ts;
        for (int i = 0; i < 24; ++i) {
            TensorT<float> x({4}), t({2});
            for (auto& v : x.v) v = float(rng.normal());
            for (auto& v : t.v) v = float(rng.bit());
            xs.push_back(x);
            ts.push_back(t);
        }
        nn::TrainSettings s;
        s.epochs = 5;
        s.batch_size = 8;
        s.learning_rate = 1e-2;
        s.seed = 123;
        return nn::train_supervised<float>(m, xs, ts, nullptr, s);
    };
    const auto h1 = run();
    const auto h2 = run();
    CHECK(h1 == h2);  // bitwise
}

TEST_CASE("divergence is reported with its epoch") {
    nn::ModelT<float> m;
    m.add(std::make_unique<nn::DenseT<float>>(4));
    m.build({3}, 60);
    Rng rng(10);
    std::vector<TensorT<float>> xs, ts;
    for (int i = 0; i < 8; ++i) {
        TensorT<float> x({3}), t({4});
        for (auto& v : x.v) v = float(rng.normal() * 10);
        for (auto& v : t.v) v = float(rng.bit());
        xs.push_back(x);
        ts.push_back(t);
    }
    nn::TrainSettings s;
    s.epochs = 50;
    s.batch_size = 8;
    s.learning_rate = 1e38;  // overflows the float parameters immediately
    s.seed = 1;
    try {
        (void)nn::train_supervised<float>(m, xs, ts, nullptr, s);
        FAIL("training did not report divergence");
    } catch (const nn::TrainingDivergence& e) {
        CHECK(e.epoch >= 0);
        CHECK(e.epoch < 50);
    }
}

TEST_CASE("shape inference rejects mismatched compositions") {
    SUBCASE("dense cannot take an image") {
        nn::ModelT<float> m;
        m.add(std::make_unique<nn::DenseT<float>>(4));
        CHECK_THROWS_AS(m.build({3, 4, 5}, 0), std::invalid_argument);
    }
    SUBCASE("conv cannot take a flat vector") {
        nn::ModelT<float> m;
        m.add(std::make_unique<nn::Conv2dT<float>>(4, 3));
        CHECK_THROWS_AS(m.build({7}, 0), std::invalid_argument);
    }
    SUBCASE("forward rejects the wrong input shape") {
        nn::ModelT<float> m;
        m.add(std::make_unique<nn::DenseT<float>>(4));
        m.build({3}, 0);
        TensorT<float> bad({2, 5});
        CHECK_THROWS_AS((void)m.forward(bad), std::invalid_argument);
    }
    SUBCASE("pooling needs a window-sized input") {
        nn::ModelT<float> m;
        m.add(std::make_unique<nn::MaxPool2dT<float>>(2));
        CHECK_THROWS_AS(m.build({3, 1, 8}, 0), std::invalid_argument);
    }
}

TEST_CASE("checkpoints round trip bitwise") {
    auto build = [] {
        nn::ModelT<float> m;
        m.add(std::make_unique<nn::Conv2dT<float>>(4, 3));
        m.add(std::make_unique<nn::ReluT<float>>());
        m.add(std::make_unique<nn::FlattenT<float>>());
        m.add(std::make_unique<nn::DenseT<float>>(3));
        return m;
    };
    nn::ModelT<float> a = build();
    a.build({2, 4, 4}, 91);
    const std::string path = "/tmp/veritas_test_ckpt.bin";
    nn::save_checkpoint(path, a);

    nn::ModelT<float> b = build();
    b.build({2, 4, 4}, 92);  // different init
    nn::load_checkpoint(path, b);

    Rng rng(11);
    TensorT<float> x({2, 2, 4, 4});
    for (auto& v : x.v) v = float(rng.normal());
    CHECK(a.forward(x).v == b.forward(x).v);

    SUBCASE("shape mismatch is detected") {
        nn::ModelT<float> c;
        c.add(std::make_unique<nn::Conv2dT<float>>(4, 3));
        c.build({3, 4, 4}, 0);
        CHECK_THROWS(nn::load_checkpoint(path, c));
    }
}

}  // TEST_SUITE
