#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "curvkit/dual.hpp"

namespace curvkit {

/// Dense row-major array. float64 throughout the curvature paths;
/// TensorT<Dual<...>> instances carry derivative information.
template <class T>
struct TensorT {
    std::vector<std::size_t> shape;
    std::vector<T> data;

    TensorT() = default;
    explicit TensorT(std::vector<std::size_t> s) : shape(std::move(s)) {
        data.assign(numel(shape), T{});
    }
    TensorT(std::vector<std::size_t> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != numel(shape))
            throw std::invalid_argument("Tensor: data length does not match shape");
    }

    static std::size_t numel(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto e : s) n *= e;
        return n;
    }

    std::size_t size() const { return data.size(); }
    // matrix accessors (shape {r,c}); a shape {n} vector acts as a column
    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    T& at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }
    const T& at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }

    bool finite() const {
        for (const auto& x : data)
            if (!all_finite(x)) return false;
        return true;
    }
};

using Tensor = TensorT<double>;

inline void check_finite(const Tensor& t, const std::string& where) {
    if (!t.finite()) throw std::runtime_error("non-finite value in " + where);
}

}  // namespace curvkit
