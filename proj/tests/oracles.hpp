#pragma once

// Finite-difference and dense-assembly oracles shared by the unit tests.
// These deliberately avoid the code paths they check: losses are evaluated
// through the graph, but all differentiation here is numeric.

#include <cmath>
#include <vector>

#include "curvkit/model.hpp"
#include "curvkit/rng.hpp"

namespace curvkit::oracles {

inline double loss_at(const LossGraph& lg, std::span<const double> theta) {
    return eval(lg.graph, theta, lg.loss).data[0];
}

inline std::vector<double> fd_grad(const LossGraph& lg, std::vector<double> theta,
                                   double eps = 1e-5) {
    std::vector<double> g(theta.size());
    for (std::size_t j = 0; j < theta.size(); ++j) {
        theta[j] += eps;
        const double lp = loss_at(lg, theta);
        theta[j] -= 2 * eps;
        const double lm = loss_at(lg, theta);
        theta[j] += eps;
        g[j] = (lp - lm) / (2 * eps);
    }
    return g;
}

inline std::vector<double> fd_hvp(const LossGraph& lg, const std::vector<double>& theta,
                                  const std::vector<double>& v, double eps = 1e-5) {
    std::vector<double> tp = theta, tm = theta;
    for (std::size_t j = 0; j < theta.size(); ++j) {
        tp[j] += eps * v[j];
        tm[j] -= eps * v[j];
    }
    auto gp = grad(lg.graph, lg.loss, tp);
    auto gm = grad(lg.graph, lg.loss, tm);
    std::vector<double> h(theta.size());
    for (std::size_t j = 0; j < theta.size(); ++j) h[j] = (gp[j] - gm[j]) / (2 * eps);
    return h;
}

// dense Jacobian of the eager forward pass, rows ordered sample-major
// (all outputs of column 0 first), by central differences
inline Tensor fd_jacobian(const Model& m, const Tensor& X, double eps = 1e-6) {
    const std::size_t n = m.param_count();
    Model mp = m;
    Tensor z0 = model_forward(m, X).z;
    const std::size_t k = z0.rows(), B = z0.cols();
    Tensor J({k * B, n});
    for (std::size_t j = 0; j < n; ++j) {
        mp.params[j] = m.params[j] + eps;
        Tensor zp = model_forward(mp, X).z;
        mp.params[j] = m.params[j] - eps;
        Tensor zm = model_forward(mp, X).z;
        mp.params[j] = m.params[j];
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t i = 0; i < k; ++i)
                J.at(b * k + i, j) = (zp.at(i, b) - zm.at(i, b)) / (2 * eps);
    }
    return J;
}

inline double vec_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

inline double vec_norm(const std::vector<double>& a) {
    double s = 0.0;
    for (double x : a) s += x * x;
    return std::sqrt(s);
}

inline std::vector<double> random_vec(std::size_t n, std::uint64_t seed,
                                      std::uint64_t stream = 0) {
    CounterRng rng(seed);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = rng.normal(stream, i);
    return v;
}

inline Batch random_batch(LossKind loss, std::size_t d, std::size_t k, std::size_t B,
                          std::uint64_t seed) {
    CounterRng rng(seed);
    Batch b;
    b.loss = loss;
    b.inputs = Tensor({d, B});
    b.targets = Tensor({k, B});
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t c = 0; c < B; ++c) b.inputs.at(i, c) = rng.normal(0, i * B + c);
    if (loss == LossKind::Mse) {
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t c = 0; c < B; ++c) b.targets.at(i, c) = rng.normal(1, i * B + c);
    } else {
        for (std::size_t c = 0; c < B; ++c) {
            int y = static_cast<int>(rng.uniform(2, c) * k);
            if (y >= static_cast<int>(k)) y = static_cast<int>(k) - 1;
            b.labels.push_back(y);
            b.targets.at(y, c) = 1.0;
        }
    }
    return b;
}

}  // namespace curvkit::oracles
