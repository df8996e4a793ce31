#include "curvkit/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace curvkit {

std::vector<double> softmax(const double* z, std::size_t k) {
    double m = z[0];
    for (std::size_t i = 1; i < k; ++i) m = std::max(m, z[i]);
    std::vector<double> p(k);
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        p[i] = std::exp(z[i] - m);
        s += p[i];
    }
    for (auto& x : p) x /= s;
    return p;
}

namespace {

LossEval mse_eval(const Tensor& z, const Tensor& y) {
    if (z.shape != y.shape) throw std::invalid_argument("mse: z/y shape mismatch");
    const std::size_t k = z.size();
    LossEval e;
    e.grad_z = Tensor({k});
    e.hess_z = Tensor({k, k});
    for (std::size_t i = 0; i < k; ++i) {
        const double d = z.data[i] - y.data[i];
        e.loss += 0.5 * d * d;
        e.grad_z.data[i] = d;
        e.hess_z.at(i, i) = 1.0;
    }
    return e;
}

LossEval ce_eval(const Tensor& z, int c) {
    const std::size_t k = z.size();
    if (c < 0 || static_cast<std::size_t>(c) >= k)
        throw std::invalid_argument("cross-entropy: class index out of range");
    auto p = softmax(z.data.data(), k);
    double m = *std::max_element(z.data.begin(), z.data.end());
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += std::exp(z.data[i] - m);
    LossEval e;
    e.loss = std::log(s) + m - z.data[c];
    e.grad_z = Tensor({k});
    e.hess_z = Tensor({k, k});
    for (std::size_t i = 0; i < k; ++i) {
        e.grad_z.data[i] = p[i] - (static_cast<int>(i) == c ? 1.0 : 0.0);
        for (std::size_t j = 0; j < k; ++j)
            e.hess_z.at(i, j) = (i == j ? p[i] : 0.0) - p[i] * p[j];
    }
    return e;
}

}  // namespace

LossEval loss_eval(LossKind kind, const Tensor& z, const Tensor& y) {
    if (kind == LossKind::Mse) return mse_eval(z, y);
    // one-hot row: the class is the position of the maximum entry
    int c = static_cast<int>(std::max_element(y.data.begin(), y.data.end()) - y.data.begin());
    return ce_eval(z, c);
}

LossEval loss_eval(LossKind kind, const Tensor& z, int class_index) {
    if (kind == LossKind::Mse)
        throw std::invalid_argument("mse requires a target vector, not a class index");
    return ce_eval(z, class_index);
}

std::string to_string(LossKind k) { return k == LossKind::Mse ? "mse" : "cross_entropy"; }

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "mse") return LossKind::Mse;
    if (s == "cross_entropy") return LossKind::CrossEntropy;
    throw std::invalid_argument("unknown loss kind: " + s);
}

}  // namespace curvkit
