#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>

#include "veritas/nn/layers.hpp"
#include "veritas/nn/losses.hpp"

namespace veritas::nn {

struct TrainSettings {
    int epochs = 10;
    int batch_size = 32;
    double learning_rate = 1e-2;
    double momentum = 0.9;
    std::uint64_t seed = 0;
    long samples_per_epoch = 0;  // 0 selects a full pass
};

class TrainingDivergence : public std::runtime_error {
  public:
    TrainingDivergence(int epoch, double loss)
        : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + " (loss " +
                             std::to_string(loss) + ")"),
          epoch(epoch) {}
    int epoch;
};

template <class T>
class SgdMomentum {
  public:
    SgdMomentum(std::vector<ParamT<T>*> params, double lr, double momentum)
        : params_(std::move(params)), lr_(lr), momentum_(momentum) {
        velocity_.reserve(params_.size());
        for (auto* p : params_) velocity_.emplace_back(p->value.shape);
    }

    void step() {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& v = velocity_[i].v;
            auto& w = params_[i]->value.v;
            const auto& g = params_[i]->grad.v;
            for (std::size_t j = 0; j < w.size(); ++j) {
                v[j] = T(momentum_) * v[j] - T(lr_) * g[j];
                w[j] += v[j];
            }
        }
    }

  private:
    std::vector<ParamT<T>*> params_;
    std::vector<TensorT<T>> velocity_;
    double lr_, momentum_;
};

namespace detail {

template <class T>
TensorT<T> stack(const std::vector<TensorT<T>>& samples, const std::vector<long>& idx) {
    const auto& s0 = samples[std::size_t(idx[0])].shape;
    std::vector<long> shape = s0;
    shape.insert(shape.begin(), long(idx.size()));
    TensorT<T> out(shape);
    const long per = samples[std::size_t(idx[0])].numel();
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto& s = samples[std::size_t(idx[i])];
        if (s.shape != s0) throw std::invalid_argument("stack: ragged sample shapes");
        std::copy(s.v.begin(), s.v.end(), out.v.begin() + long(i) * per);
    }
    return out;
}

inline std::vector<long> epoch_order(long n, long samples_per_epoch, Rng& rng) {
    std::vector<long> idx(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) idx[std::size_t(i)] = i;
    // Fisher-Yates with the project rng keeps runs reproducible
    for (long i = n - 1; i > 0; --i) {
        const long j = long(rng.uniform_int(std::uint64_t(i + 1)));
        std::swap(idx[std::size_t(i)], idx[std::size_t(j)]);
    }
    if (samples_per_epoch > 0 && samples_per_epoch < n) idx.resize(std::size_t(samples_per_epoch));
    return idx;
}

}  // namespace detail

// Minibatch SGD over (input, target, mask) samples with BCE-with-logits.
// Returns the mean per-epoch training loss.
template <class T>
std::vector<double> train_supervised(ModelT<T>& model, const std::vector<TensorT<T>>& inputs,
                                     const std::vector<TensorT<T>>& targets, const std::vector<TensorT<T>>* masks,
                                     const TrainSettings& s) {
    if (inputs.empty()) throw std::invalid_argument("train_supervised: empty dataset");
    if (inputs.size() != targets.size() || (masks && masks->size() != inputs.size()))
        throw std::invalid_argument("train_supervised: dataset arrays disagree");

    SgdMomentum<T> opt(model.params(), s.learning_rate, s.momentum);
    Rng order_rng(derive_seed(s.seed, 0x6f72646572ULL));
    Rng drop_rng(derive_seed(s.seed, 0x64726f70ULL));
    std::vector<double> history;
    history.reserve(std::size_t(std::max(s.epochs, 0)));

    for (int epoch = 0; epoch < s.epochs; ++epoch) {
        const auto order = detail::epoch_order(long(inputs.size()), s.samples_per_epoch, order_rng);
        double epoch_loss = 0.0;
        long batches = 0;
        for (std::size_t start = 0; start < order.size(); start += std::size_t(s.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + std::size_t(s.batch_size));
            std::vector<long> idx(order.begin() + long(start), order.begin() + long(stop));
            TensorT<T> x = detail::stack(inputs, idx);
            TensorT<T> t = detail::stack(targets, idx);
            TensorT<T> m;
            if (masks) m = detail::stack(*masks, idx);

            TraceT<T> trace;
            TensorT<T> y = model.forward_train(x, trace, drop_rng);
            LossValue<T> loss = bce_with_logits(y, t, masks ? &m : nullptr);
            if (!std::isfinite(loss.loss)) throw TrainingDivergence(epoch, loss.loss);
            model.zero_grad();
            model.backward(loss.grad, trace);
            opt.step();
            epoch_loss += loss.loss;
            ++batches;
        }
        history.push_back(batches ? epoch_loss / double(batches) : 0.0);
    }
    return history;
}

// Triplet training over class-grouped samples through an encoder and an
// optional projection head; anchors and positives come from one class, the
// negative from a different one, all drawn uniformly.
template <class T>
std::vector<double> train_triplet(ModelT<T>& encoder, ModelT<T>* projection,
                                  const std::vector<std::vector<TensorT<T>>>& classes, double margin,
                                  const TrainSettings& s) {
    if (classes.size() < 2) throw std::invalid_argument("train_triplet: needs at least two classes");
    long total = 0;
    for (const auto& c : classes) {
        if (c.empty()) throw std::invalid_argument("train_triplet: empty class");
        total += long(c.size());
    }

    std::vector<ParamT<T>*> params = encoder.params();
    if (projection)
        for (auto* p : projection->params()) params.push_back(p);
    SgdMomentum<T> opt(params, s.learning_rate, s.momentum);

    Rng pick_rng(derive_seed(s.seed, 0x747269706c6574ULL));
    Rng drop_rng(derive_seed(s.seed, 0x64726f70ULL));
    const long per_epoch = s.samples_per_epoch > 0 ? s.samples_per_epoch : total;
    std::vector<double> history;

    auto zero_all = [&] {
        encoder.zero_grad();
        if (projection) projection->zero_grad();
    };

    for (int epoch = 0; epoch < s.epochs; ++epoch) {
        double epoch_loss = 0.0;
        long batches = 0;
        for (long done = 0; done < per_epoch; done += s.batch_size) {
            const long bsz = std::min<long>(s.batch_size, per_epoch - done);
            std::vector<TensorT<T>> av, pv, nv;
            av.reserve(std::size_t(bsz));
            pv.reserve(std::size_t(bsz));
            nv.reserve(std::size_t(bsz));
            for (long i = 0; i < bsz; ++i) {
                const long ca = long(pick_rng.uniform_int(classes.size()));
                long cn = long(pick_rng.uniform_int(classes.size() - 1));
                if (cn >= ca) ++cn;
                const auto& pos_class = classes[std::size_t(ca)];
                const auto& neg_class = classes[std::size_t(cn)];
                const long ia = long(pick_rng.uniform_int(pos_class.size()));
                long ip = ia;
                if (pos_class.size() > 1) {
                    ip = long(pick_rng.uniform_int(pos_class.size() - 1));
                    if (ip >= ia) ++ip;
                }
                const long in = long(pick_rng.uniform_int(neg_class.size()));
                av.push_back(pos_class[std::size_t(ia)]);
                pv.push_back(pos_class[std::size_t(ip)]);
                nv.push_back(neg_class[std::size_t(in)]);
            }
            std::vector<long> all(static_cast<std::size_t>(bsz));
            for (long i = 0; i < bsz; ++i) all[std::size_t(i)] = i;
            TensorT<T> xa = detail::stack(av, all);
            TensorT<T> xp = detail::stack(pv, all);
            TensorT<T> xn = detail::stack(nv, all);

            TraceT<T> ea, ep, en, pa, pp, pn;
            TensorT<T> fa = encoder.forward_train(xa, ea, drop_rng);
            TensorT<T> fp = encoder.forward_train(xp, ep, drop_rng);
            TensorT<T> fn = encoder.forward_train(xn, en, drop_rng);
            if (projection) {
                fa = projection->forward_train(fa, pa, drop_rng);
                fp = projection->forward_train(fp, pp, drop_rng);
                fn = projection->forward_train(fn, pn, drop_rng);
            }
            TripletGrads<T> loss = triplet_loss(fa, fp, fn, margin);
            if (!std::isfinite(loss.loss)) throw TrainingDivergence(epoch, loss.loss);

            zero_all();
            TensorT<T> ga = loss.grad_anchor;
            TensorT<T> gp = loss.grad_positive;
            TensorT<T> gn = loss.grad_negative;
            if (projection) {
                ga = projection->backward(ga, pa);
                gp = projection->backward(gp, pp);
                gn = projection->backward(gn, pn);
            }
            encoder.backward(ga, ea);
            encoder.backward(gp, ep);
            encoder.backward(gn, en);
            opt.step();

            epoch_loss += loss.loss;
            ++batches;
        }
        history.push_back(batches ? epoch_loss / double(batches) : 0.0);
    }
    return history;
}

}  // namespace veritas::nn
