#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace veritas::nn {

template <class T>
struct TensorT {
    std::vector<long> shape;
    std::vector<T> v;

    TensorT() = default;
    explicit TensorT(std::vector<long> s) : shape(std::move(s)) { v.assign(std::size_t(numel_of(shape)), T(0)); }
    TensorT(std::vector<long> s, std::vector<T> data) : shape(std::move(s)), v(std::move(data)) {
        if (long(v.size()) != numel_of(shape)) throw std::invalid_argument("Tensor: data does not match shape");
    }

    static long numel_of(const std::vector<long>& s) {
        long n = 1;
        for (long d : s) {
            if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
            n *= d;
        }
        return n;
    }

    long numel() const { return long(v.size()); }
    T* data() { return v.data(); }
    const T* data() const { return v.data(); }

    TensorT reshaped(std::vector<long> s) const {
        if (numel_of(s) != numel()) throw std::invalid_argument("Tensor: reshape changes element count");
        TensorT out;
        out.shape = std::move(s);
        out.v = v;
        return out;
    }

    template <class U>
    TensorT<U> cast() const {
        TensorT<U> out;
        out.shape = shape;
        out.v.resize(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = U(v[i]);
        return out;
    }

    bool same_shape(const TensorT& other) const { return shape == other.shape; }
};

using Tensor = TensorT<float>;

inline std::string shape_string(const std::vector<long>& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        out += std::to_string(s[i]);
        if (i + 1 < s.size()) out += ", ";
    }
    out += ")";
    return out;
}

}  // namespace veritas::nn
