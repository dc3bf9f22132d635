#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <string>

#include "veritas/nn/tensor.hpp"
#include "veritas/rng.hpp"

namespace veritas::nn {

template <class T>
struct ParamT {
    std::string name;
    TensorT<T> value;
    TensorT<T> grad;
};

// Per-layer forward cache used during training; composite layers nest their
// children's traces.
template <class T>
struct LayerTraceT {
    std::vector<TensorT<T>> saved;
    std::vector<std::vector<long>> indices;
    std::vector<LayerTraceT<T>> children;
};

template <class T>
using TraceT = std::vector<LayerTraceT<T>>;

template <class T>
class LayerT {
  public:
    virtual ~LayerT() = default;
    virtual const char* kind() const = 0;
    // allocates parameters for the per-sample input shape and returns the
    // per-sample output shape; throws std::invalid_argument on a shape the
    // layer cannot take
    virtual std::vector<long> build(const std::vector<long>& in, const std::string& prefix, Rng& rng) = 0;
    // trace == nullptr selects evaluation mode
    virtual void forward(const TensorT<T>& x, TensorT<T>& y, LayerTraceT<T>* trace, Rng* rng) = 0;
    virtual void backward(const TensorT<T>& dy, const LayerTraceT<T>& trace, TensorT<T>& dx) = 0;
    virtual std::vector<ParamT<T>*> params() { return {}; }
};

namespace detail {

template <class T>
using MatT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapM = Eigen::Map<MatT<T>>;
template <class T>
using CMapM = Eigen::Map<const MatT<T>>;

inline long batch_of(const std::vector<long>& xshape, const std::vector<long>& in_shape) {
    if (xshape.size() != in_shape.size() + 1) throw std::invalid_argument("Layer: input rank mismatch");
    for (std::size_t i = 0; i < in_shape.size(); ++i)
        if (xshape[i + 1] != in_shape[i])
            throw std::invalid_argument("Layer: input shape " + shape_string(xshape) + " does not match " +
                                        shape_string(in_shape));
    return xshape[0];
}

template <class T>
void he_init(TensorT<T>& w, long fan_in, Rng& rng) {
    const double std_dev = std::sqrt(2.0 / double(fan_in));
    for (auto& x : w.v) x = T(std_dev * rng.normal());
}

}  // namespace detail

template <class T>
class DenseT : public LayerT<T> {
  public:
    explicit DenseT(long units) : units_(units) {}
    const char* kind() const override { return "dense"; }

    std::vector<long> build(const std::vector<long>& in, const std::string& prefix, Rng& rng) override {
        if (in.size() != 1) throw std::invalid_argument("dense: expects flat input, got " + shape_string(in));
        in_features_ = in[0];
        w_.name = prefix + ".w";
        w_.value = TensorT<T>({units_, in_features_});
        detail::he_init(w_.value, in_features_, rng);
        w_.grad = TensorT<T>({units_, in_features_});
        b_.name = prefix + ".b";
        b_.value = TensorT<T>({units_});
        b_.grad = TensorT<T>({units_});
        return {units_};
    }

    void forward(const TensorT<T>& x, TensorT<T>& y, LayerTraceT<T>* trace, Rng*) override {
        const long n = detail::batch_of(x.shape, {in_features_});
        y = TensorT<T>({n, units_});
        detail::CMapM<T> xm(x.data(), n, in_features_);
        detail::CMapM<T> wm(w_.value.data(), units_, in_features_);
        detail::MapM<T> ym(y.data(), n, units_);
        ym.noalias() = xm * wm.transpose();
        detail::CMapM<T> bm(b_.value.data(), 1, units_);
        ym.rowwise() += bm.row(0);
        if (trace) trace->saved = {x};
    }

    void backward(const TensorT<T>& dy, const LayerTraceT<T>& trace, TensorT<T>& dx) override {
        const TensorT<T>& x = trace.saved[0];
        const long n = x.shape[0];
        dx = TensorT<T>(x.shape);
        detail::CMapM<T> dym(dy.data(), n, units_);
        detail::CMapM<T> xm(x.data(), n, in_features_);
        detail::CMapM<T> wm(w_.value.data(), units_, in_features_);
        detail::MapM<T> dxm(dx.data(), n, in_features_);
        detail::MapM<T> dwm(w_.grad.data(), units_, in_features_);
        detail::MapM<T> dbm(b_.grad.data(), 1, units_);
        dxm.noalias() = dym * wm;
        dwm.noalias() += dym.transpose() * xm;
        dbm.row(0) += dym.colwise().sum();
    }

    std::vector<ParamT<T>*> params() override { return {&w_, &b_}; }

  private:
    long units_;
    long in_features_ = 0;
    ParamT<T> w_, b_;
};

template <class T>
class Conv2dT : public LayerT<T> {
  public:
    Conv2dT(long out_channels, long kernel = 3) : out_ch_(out_channels), ks_(kernel) {
        if (kernel % 2 != 1) throw std::invalid_argument("conv2d: kernel size must be odd");
    }
    const char* kind() const override { return "conv2d"; }

    std::vector<long> build(const std::vector<long>& in, const std::string& prefix, Rng& rng) override {
        if (in.size() != 3) throw std::invalid_argument("conv2d: expects (C,H,W) input, got " + shape_string(in));
        in_ch_ = in[0];
        h_ = in[1];
        w_dim_ = in[2];
        const long k = in_ch_ * ks_ * ks_;
        w_.name = prefix + ".w";
        w_.value = TensorT<T>({out_ch_, k});
        detail::he_init(w_.value, k, rng);
        w_.grad = TensorT<T>({out_ch_, k});
        b_.name = prefix + ".b";
        b_.value = TensorT<T>({out_ch_});
        b_.grad = TensorT<T>({out_ch_});
        return {out_ch_, h_, w_dim_};
    }

    void forward(const TensorT<T>& x, TensorT<T>& y, LayerTraceT<T>* trace, Rng*) override {
        const long n = detail::batch_of(x.shape, {in_ch_, h_, w_dim_});
        const long cols = n * h_ * w_dim_;
        const long k = in_ch_ * ks_ * ks_;
        // workspaces persist across calls; im2col and the GEMM write every
        // entry, so no clearing is needed
        col_ws_.resize(std::size_t(k * cols));
        im2col(x, col_ws_.data(), cols);
        y = TensorT<T>({n, out_ch_, h_, w_dim_});
        out_ws_.resize(std::size_t(out_ch_ * cols));
        {
            detail::CMapM<T> wm(w_.value.data(), out_ch_, k);
            detail::CMapM<T> cm(col_ws_.data(), k, cols);
            detail::MapM<T> om(out_ws_.data(), out_ch_, cols);
            om.noalias() = wm * cm;
        }
        // (O, N*H*W) -> (N, O, H, W)
        const long hw = h_ * w_dim_;
        for (long img = 0; img < n; ++img)
            for (long o = 0; o < out_ch_; ++o) {
                const T bias = b_.value.v[std::size_t(o)];
                const T* src = out_ws_.data() + std::size_t(o * cols + img * hw);
                T* dst = y.data() + (img * out_ch_ + o) * hw;
                for (long i = 0; i < hw; ++i) dst[i] = src[i] + bias;
            }
        if (trace) trace->saved = {x};
    }

    void backward(const TensorT<T>& dy, const LayerTraceT<T>& trace, TensorT<T>& dx) override {
        const TensorT<T>& x = trace.saved[0];
        const long n = x.shape[0];
        const long cols = n * h_ * w_dim_;
        const long k = in_ch_ * ks_ * ks_;
        const long hw = h_ * w_dim_;

        // regroup dy to (O, N*H*W)
        out_ws_.resize(std::size_t(out_ch_ * cols));
        for (long img = 0; img < n; ++img)
            for (long o = 0; o < out_ch_; ++o) {
                const T* src = dy.data() + (img * out_ch_ + o) * hw;
                T* dst = out_ws_.data() + std::size_t(o * cols + img * hw);
                for (long i = 0; i < hw; ++i) dst[i] = src[i];
            }

        col_ws_.resize(std::size_t(k * cols));
        im2col(x, col_ws_.data(), cols);

        {
            detail::CMapM<T> dom(out_ws_.data(), out_ch_, cols);
            detail::CMapM<T> cm(col_ws_.data(), k, cols);
            detail::MapM<T> dwm(w_.grad.data(), out_ch_, k);
            dwm.noalias() += dom * cm.transpose();
            detail::MapM<T> dbm(b_.grad.data(), out_ch_, 1);
            dbm.col(0) += dom.rowwise().sum();
        }

        dcol_ws_.resize(std::size_t(k * cols));
        {
            detail::CMapM<T> wm(w_.value.data(), out_ch_, k);
            detail::CMapM<T> dom(out_ws_.data(), out_ch_, cols);
            detail::MapM<T> dcm(dcol_ws_.data(), k, cols);
            dcm.noalias() = wm.transpose() * dom;
        }
        dx = TensorT<T>(x.shape);
        col2im(dcol_ws_.data(), dx, cols);
    }

    std::vector<ParamT<T>*> params() override { return {&w_, &b_}; }

  private:
    void im2col(const TensorT<T>& x, T* col, long cols) const {
        const long n = x.shape[0];
        const long pad = ks_ / 2;
        for (long c = 0; c < in_ch_; ++c)
            for (long kh = 0; kh < ks_; ++kh)
                for (long kw = 0; kw < ks_; ++kw) {
                    const long krow = (c * ks_ + kh) * ks_ + kw;
                    T* dst = col + krow * cols;
                    for (long img = 0; img < n; ++img) {
                        const T* src = x.data() + (img * in_ch_ + c) * h_ * w_dim_;
                        for (long y0 = 0; y0 < h_; ++y0) {
                            const long sy = y0 + kh - pad;
                            T* row_dst = dst + (img * h_ + y0) * w_dim_;
                            if (sy < 0 || sy >= h_) {
                                for (long x0 = 0; x0 < w_dim_; ++x0) row_dst[x0] = T(0);
                                continue;
                            }
                            const T* src_row = src + sy * w_dim_;
                            for (long x0 = 0; x0 < w_dim_; ++x0) {
                                const long sx = x0 + kw - pad;
                                row_dst[x0] = (sx >= 0 && sx < w_dim_) ? src_row[sx] : T(0);
                            }
                        }
                    }
                }
    }

    void col2im(const T* col, TensorT<T>& dx, long cols) const {
        const long n = dx.shape[0];
        const long pad = ks_ / 2;
        for (long c = 0; c < in_ch_; ++c)
            for (long kh = 0; kh < ks_; ++kh)
                for (long kw = 0; kw < ks_; ++kw) {
                    const long krow = (c * ks_ + kh) * ks_ + kw;
                    const T* src = col + krow * cols;
                    for (long img = 0; img < n; ++img) {
                        T* dst = dx.data() + (img * in_ch_ + c) * h_ * w_dim_;
                        for (long y0 = 0; y0 < h_; ++y0) {
                            const long sy = y0 + kh - pad;
                            if (sy < 0 || sy >= h_) continue;
                            const T* src_row = src + (img * h_ + y0) * w_dim_;
                            T* dst_row = dst + sy * w_dim_;
                            for (long x0 = 0; x0 < w_dim_; ++x0) {
                                const long sx = x0 + kw - pad;
                                if (sx >= 0 && sx < w_dim_) dst_row[sx] += src_row[x0];
                            }
                        }
                    }
                }
    }

    long out_ch_, ks_;
    long in_ch_ = 0, h_ = 0, w_dim_ = 0;
    ParamT<T> w_, b_;
    std::vector<T> col_ws_, out_ws_, dcol_ws_;
};

template <class T>
class ReluT : public LayerT<T> {
  public:
    const char* kind() const override { return "relu"; }
    std::vector<long> build(const std::vector<long>& in, const std::string&, Rng&) override {
        shape_ = in;
        return in;
    }
    void forward(const TensorT<T>& x, TensorT<T>& y, LayerTraceT<T>* trace, Rng*) override {
        detail::batch_of(x.shape, shape_);
        y = x;
        for (auto& v : y.v) v = v > T(0) ? v : T(0);
        if (trace) trace->saved = {x};
    }
    void backward(const TensorT<T>& dy, const LayerTraceT<T>& trace, TensorT<T>& dx) override {
        const TensorT<T>& x = trace.saved[0];
        dx = dy;
        for (std::size_t i = 0; i < dx.v.size(); ++i)
            if (x.v[i] <= T(0)) dx.v[i] = T(0);
    }

  private:
    std::vector<long> shape_;
};

template <class T>
class MaxPool2dT : public LayerT<T> {
  public:
    explicit MaxPool2dT(long size = 2) : size_(size) {}
    const char* kind() const override { return "maxpool2d"; }

    std::vector<long> build(const std::vector<long>& in, const std::string&, Rng&) override {
        if (in.size() != 3) throw std::invalid_argument("maxpool2d: expects (C,H,W) input");
        if (in[1] < size_ || in[2] < size_) throw std::invalid_argument("maxpool2d: input smaller than window");
        in_ = in;
        out_ = {in[0], in[1] / size_, in[2] / size_};
        return out_;
    }

    void forward(const TensorT<T>& x, TensorT<T>& y, LayerTraceT<T>* trace, Rng*) override {
        const long n = detail::batch_of(x.shape, in_);
        const long c = in_[0], h = in_[1], w = in_[2];
        const long oh = out_[1], ow = out_[2];
        y = TensorT<T>({n, c, oh, ow});
        std::vector<long> argmax(static_cast<std::size_t>(y.numel()));
        for (long img = 0; img < n; ++img)
            for (long ch = 0; ch < c; ++ch) {
                const T* src = x.data() + (img * c + ch) * h * w;
                T* dst = y.data() + (img * c + ch) * oh * ow;
                long* amax = argmax.data() + (img * c + ch) * oh * ow;
                for (long oy = 0; oy < oh; ++oy)
                    for (long ox = 0; ox < ow; ++ox) {
                        T best = src[(oy * size_) * w + ox * size_];
                        long best_idx = (oy * size_) * w + ox * size_;
                        for (long dy0 = 0; dy0 < size_; ++dy0)
                            for (long dx0 = 0; dx0 < size_; ++dx0) {
                                const long idx = (oy * size_ + dy0) * w + ox * size_ + dx0;
                                if (src[idx] > best) {
                                    best = src[idx];
                                    best_idx = idx;
                                }
                            }
                        dst[oy * ow + ox] = best;
                        amax[oy * ow + ox] = (img * c + ch) * h * w + best_idx;
                    }
            }
        if (trace) {
            trace->indices = {std::move(argmax)};
            trace->saved = {TensorT<T>({long(x.shape[0])})};  // batch size marker
        }
    }

    void backward(const TensorT<T>& dy, const LayerTraceT<T>& trace, TensorT<T>& dx) override {
        const long n = trace.saved[0].shape[0];
        dx = TensorT<T>({n, in_[0], in_[1], in_[2]});
        const auto& argmax = trace.indices[0];
        for (std::size_t i = 0; i < argmax.size(); ++i) dx.v[std::size_t(argmax[i])] += dy.v[i];
    }

  private:
    long size_;
    std::vector<long> in_, out_;
};

template <class T>
class DropoutT : public LayerT<T> {
  public:
    explicit DropoutT(double rate) : rate_(rate) {
        if (rate < 0 || rate >= 1) throw std::invalid_argument("dropout: rate must be in [0,1)");
    }
    const char* kind() const override { return "dropout"; }
    std::vector<long> build(const std::vector<long>& in, const std::string&, Rng&) override { return in; }

    void forward(const TensorT<T>& x, TensorT<T>& y, LayerTraceT<T>* trace, Rng* rng) override {
        if (!trace) {  // evaluation: identity
            y = x;
            return;
        }
        if (!rng) throw std::invalid_argument("dropout: training forward needs an rng");
        TensorT<T> mask(x.shape);
        const T keep_scale = T(1.0 / (1.0 - rate_));
        for (auto& m : mask.v) m = rng->uniform01() < rate_ ? T(0) : keep_scale;
        y = x;
        for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] *= mask.v[i];
        trace->saved = {std::move(mask)};
    }

    void backward(const TensorT<T>& dy, const LayerTraceT<T>& trace, TensorT<T>& dx) override {
        dx = dy;
        const TensorT<T>& mask = trace.saved[0];
        for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] *= mask.v[i];
    }

  private:
    double rate_;
};

template <class T>
class FlattenT : public LayerT<T> {
  public:
    const char* kind() const override { return "flatten"; }
    std::vector<long> build(const std::vector<long>& in, const std::string&, Rng&) override {
        in_ = in;
        long out = 1;
        for (long d : in) out *= d;
        return {out};
    }
    void forward(const TensorT<T>& x, TensorT<T>& y, LayerTraceT<T>* trace, Rng*) override {
        const long n = detail::batch_of(x.shape, in_);
        y = x.reshaped({n, x.numel() / n});
        if (trace) trace->saved = {TensorT<T>({n})};
    }
    void backward(const TensorT<T>& dy, const LayerTraceT<T>& trace, TensorT<T>& dx) override {
        std::vector<long> s = in_;
        s.insert(s.begin(), trace.saved[0].shape[0]);
        dx = dy.reshaped(s);
    }

  private:
    std::vector<long> in_;
};

// y = x / max(|x|) per sample; all-zero samples pass through unchanged.
template <class T>
class MaxAbsNormalizeT : public LayerT<T> {
  public:
    const char* kind() const override { return "maxabsnorm"; }
    std::vector<long> build(const std::vector<long>& in, const std::string&, Rng&) override {
        in_ = in;
        return in;
    }

    void forward(const TensorT<T>& x, TensorT<T>& y, LayerTraceT<T>* trace, Rng*) override {
        const long n = detail::batch_of(x.shape, in_);
        const long f = x.numel() / n;
        y = x;
        for (long i = 0; i < n; ++i) {
            T* row = y.data() + i * f;
            long jmax = 0;
            T m = T(0);
            for (long j = 0; j < f; ++j) {
                const T a = std::abs(row[j]);
                if (a > m) {
                    m = a;
                    jmax = j;
                }
            }
            if (m > T(0))
                for (long j = 0; j < f; ++j) row[j] /= m;
            (void)jmax;
        }
        if (trace) trace->saved = {x};
    }

    void backward(const TensorT<T>& dy, const LayerTraceT<T>& trace, TensorT<T>& dx) override {
        const TensorT<T>& x = trace.saved[0];
        const long n = x.shape[0];
        const long f = x.numel() / n;
        dx = TensorT<T>(x.shape);
        for (long i = 0; i < n; ++i) {
            const T* xr = x.data() + i * f;
            const T* dyr = dy.data() + i * f;
            T* dxr = dx.data() + i * f;
            long jmax = 0;
            T m = T(0);
            for (long j = 0; j < f; ++j) {
                const T a = std::abs(xr[j]);
                if (a > m) {
                    m = a;
                    jmax = j;
                }
            }
            if (m <= T(0)) {
                for (long j = 0; j < f; ++j) dxr[j] = dyr[j];
                continue;
            }
            T dot = T(0);
            for (long j = 0; j < f; ++j) dot += dyr[j] * xr[j];
            const T sign = xr[jmax] >= T(0) ? T(1) : T(-1);
            for (long j = 0; j < f; ++j) dxr[j] = dyr[j] / m;
            dxr[jmax] -= sign * dot / (m * m);
        }
    }

  private:
    std::vector<long> in_;
};

// conv -> relu -> conv plus a skip path (1x1 projection when the channel
// count changes), relu after the sum.
template <class T>
class ResidualConv2dT : public LayerT<T> {
  public:
    explicit ResidualConv2dT(long out_channels, long kernel = 3)
        : conv_a_(out_channels, kernel), conv_b_(out_channels, kernel), out_ch_(out_channels) {}
    const char* kind() const override { return "resconv2d"; }

    std::vector<long> build(const std::vector<long>& in, const std::string& prefix, Rng& rng) override {
        if (in.size() != 3) throw std::invalid_argument("resconv2d: expects (C,H,W) input");
        auto mid = conv_a_.build(in, prefix + ".a", rng);
        relu_mid_.build(mid, prefix + ".relu", rng);
        auto out = conv_b_.build(mid, prefix + ".b", rng);
        if (in[0] != out_ch_) {
            skip_ = std::make_unique<Conv2dT<T>>(out_ch_, 1);
            skip_->build(in, prefix + ".skip", rng);
        }
        return out;
    }

    void forward(const TensorT<T>& x, TensorT<T>& y, LayerTraceT<T>* trace, Rng* rng) override {
        LayerTraceT<T>* ta = nullptr;
        LayerTraceT<T>* tr = nullptr;
        LayerTraceT<T>* tb = nullptr;
        LayerTraceT<T>* ts = nullptr;
        if (trace) {
            trace->children.resize(4);
            ta = &trace->children[0];
            tr = &trace->children[1];
            tb = &trace->children[2];
            ts = &trace->children[3];
        }
        TensorT<T> h1, h2, h3, skip_out;
        conv_a_.forward(x, h1, ta, rng);
        relu_mid_.forward(h1, h2, tr, rng);
        conv_b_.forward(h2, h3, tb, rng);
        if (skip_) {
            skip_->forward(x, skip_out, ts, rng);
        } else {
            skip_out = x;
        }
        y = h3;
        for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] += skip_out.v[i];
        if (trace) trace->saved = {y};  // pre-relu sum sign
        for (auto& v : y.v) v = v > T(0) ? v : T(0);
    }

    void backward(const TensorT<T>& dy, const LayerTraceT<T>& trace, TensorT<T>& dx) override {
        const TensorT<T>& pre = trace.saved[0];
        TensorT<T> d = dy;
        for (std::size_t i = 0; i < d.v.size(); ++i)
            if (pre.v[i] <= T(0)) d.v[i] = T(0);

        TensorT<T> d_h2, d_h1, dx_main, dx_skip;
        conv_b_.backward(d, trace.children[2], d_h2);
        relu_mid_.backward(d_h2, trace.children[1], d_h1);
        conv_a_.backward(d_h1, trace.children[0], dx_main);
        if (skip_) {
            skip_->backward(d, trace.children[3], dx_skip);
        } else {
            dx_skip = d;
        }
        dx = dx_main;
        for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += dx_skip.v[i];
    }

    std::vector<ParamT<T>*> params() override {
        std::vector<ParamT<T>*> out = conv_a_.params();
        for (auto* p : conv_b_.params()) out.push_back(p);
        if (skip_)
            for (auto* p : skip_->params()) out.push_back(p);
        return out;
    }

  private:
    Conv2dT<T> conv_a_, conv_b_;
    ReluT<T> relu_mid_;
    std::unique_ptr<Conv2dT<T>> skip_;
    long out_ch_;
};

template <class T>
class ModelT {
  public:
    void add(std::unique_ptr<LayerT<T>> layer) {
        if (built_) throw std::logic_error("Model: cannot add layers after build");
        layers_.push_back(std::move(layer));
    }

    void build(std::vector<long> input_shape, std::uint64_t seed) {
        Rng rng(derive_seed(seed, 0x696e6974ULL));
        input_shape_ = std::move(input_shape);
        std::vector<long> s = input_shape_;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            s = layers_[i]->build(s, "l" + std::to_string(i) + "." + layers_[i]->kind(), rng);
        }
        output_shape_ = s;
        built_ = true;
    }

    bool built() const { return built_; }
    const std::vector<long>& input_shape() const { return input_shape_; }
    const std::vector<long>& output_shape() const { return output_shape_; }
    std::size_t n_layers() const { return layers_.size(); }
    LayerT<T>& layer(std::size_t i) { return *layers_[i]; }

    // evaluation mode: deterministic, dropout inactive
    TensorT<T> forward(const TensorT<T>& x) {
        require_built();
        TensorT<T> cur = x;
        TensorT<T> next;
        for (auto& l : layers_) {
            l->forward(cur, next, nullptr, nullptr);
            cur = std::move(next);
        }
        return cur;
    }

    TensorT<T> forward_train(const TensorT<T>& x, TraceT<T>& trace, Rng& rng) {
        require_built();
        trace.assign(layers_.size(), LayerTraceT<T>{});
        TensorT<T> cur = x;
        TensorT<T> next;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            layers_[i]->forward(cur, next, &trace[i], &rng);
            cur = std::move(next);
        }
        return cur;
    }

    TensorT<T> backward(const TensorT<T>& dy, const TraceT<T>& trace) {
        require_built();
        TensorT<T> cur = dy;
        TensorT<T> next;
        for (std::size_t i = layers_.size(); i-- > 0;) {
            layers_[i]->backward(cur, trace[i], next);
            cur = std::move(next);
        }
        return cur;
    }

    std::vector<ParamT<T>*> params() {
        std::vector<ParamT<T>*> out;
        for (auto& l : layers_)
            for (auto* p : l->params()) out.push_back(p);
        return out;
    }

    void zero_grad() {
        for (auto* p : params()) p->grad.v.assign(p->grad.v.size(), T(0));
    }

    long parameter_count() {
        long n = 0;
        for (auto* p : params()) n += p->value.numel();
        return n;
    }

  private:
    void require_built() const {
        if (!built_) throw std::logic_error("Model: build() must run before forward");
    }

    std::vector<std::unique_ptr<LayerT<T>>> layers_;
    std::vector<long> input_shape_, output_shape_;
    bool built_ = false;
};

using Model = ModelT<float>;

}  // namespace veritas::nn
