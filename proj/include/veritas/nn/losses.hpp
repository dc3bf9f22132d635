#pragma once

#include <cmath>
#include <stdexcept>

#include "veritas/nn/tensor.hpp"

namespace veritas::nn {

template <class T>
struct LossValue {
    double loss = 0.0;
    TensorT<T> grad;
};

// Masked mean binary cross-entropy on logits. Masked-out slots contribute
// zero loss and zero gradient; a fully masked batch yields loss 0.
template <class T>
LossValue<T> bce_with_logits(const TensorT<T>& logits, const TensorT<T>& targets, const TensorT<T>* mask) {
    if (!logits.same_shape(targets)) throw std::invalid_argument("bce_with_logits: shape mismatch");
    if (mask && !mask->same_shape(logits)) throw std::invalid_argument("bce_with_logits: mask shape mismatch");
    LossValue<T> out;
    out.grad = TensorT<T>(logits.shape);
    double total = 0.0;
    double weight = 0.0;
    for (long i = 0; i < logits.numel(); ++i) {
        const double m = mask ? double(mask->v[std::size_t(i)]) : 1.0;
        if (m == 0.0) continue;
        const double z = double(logits.v[std::size_t(i)]);
        const double t = double(targets.v[std::size_t(i)]);
        total += m * (std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z))));
        weight += m;
    }
    if (weight == 0.0) return out;
    out.loss = total / weight;
    for (long i = 0; i < logits.numel(); ++i) {
        const double m = mask ? double(mask->v[std::size_t(i)]) : 1.0;
        if (m == 0.0) continue;
        const double z = double(logits.v[std::size_t(i)]);
        const double sig = 1.0 / (1.0 + std::exp(-z));
        out.grad.v[std::size_t(i)] = T(m * (sig - double(targets.v[std::size_t(i)])) / weight);
    }
    return out;
}

template <class T>
struct TripletGrads {
    double loss = 0.0;
    TensorT<T> grad_anchor, grad_positive, grad_negative;
};

// Mean over the batch of max(0, d(a,p)^2 - d(a,n)^2 + margin).
template <class T>
TripletGrads<T> triplet_loss(const TensorT<T>& anchor, const TensorT<T>& positive, const TensorT<T>& negative,
                             double margin) {
    if (margin < 0) throw std::invalid_argument("triplet_loss: margin must be >= 0");
    if (!anchor.same_shape(positive) || !anchor.same_shape(negative))
        throw std::invalid_argument("triplet_loss: shape mismatch");
    if (anchor.shape.empty() || anchor.shape[0] <= 0) throw std::invalid_argument("triplet_loss: empty batch");

    const long n = anchor.shape[0];
    const long f = anchor.numel() / n;
    TripletGrads<T> out;
    out.grad_anchor = TensorT<T>(anchor.shape);
    out.grad_positive = TensorT<T>(anchor.shape);
    out.grad_negative = TensorT<T>(anchor.shape);

    double total = 0.0;
    for (long i = 0; i < n; ++i) {
        const T* a = anchor.data() + i * f;
        const T* p = positive.data() + i * f;
        const T* g = negative.data() + i * f;
        double dp = 0.0, dn = 0.0;
        for (long j = 0; j < f; ++j) {
            const double ap = double(a[j]) - double(p[j]);
            const double an = double(a[j]) - double(g[j]);
            dp += ap * ap;
            dn += an * an;
        }
        const double term = dp - dn + margin;
        if (term <= 0.0) continue;
        total += term;
        T* ga = out.grad_anchor.data() + i * f;
        T* gp = out.grad_positive.data() + i * f;
        T* gn = out.grad_negative.data() + i * f;
        const double scale = 2.0 / double(n);
        for (long j = 0; j < f; ++j) {
            ga[j] = T(scale * (double(g[j]) - double(p[j])));
            gp[j] = T(scale * (double(p[j]) - double(a[j])));
            gn[j] = T(scale * (double(a[j]) - double(g[j])));
        }
    }
    out.loss = total / double(n);
    return out;
}

// Standalone form of the feature normalization y = x / max(|x|); an all-zero
// input is returned unchanged.
template <class T>
TensorT<T> normalize_feature(const TensorT<T>& x) {
    TensorT<T> y = x;
    T m = T(0);
    for (const auto& v : y.v) {
        const T a = std::abs(v);
        if (a > m) m = a;
    }
    if (m > T(0))
        for (auto& v : y.v) v /= m;
    return y;
}

}  // namespace veritas::nn
