#pragma once

#include <vector>

#include "curvkit/tensor.hpp"

namespace curvkit {

enum class LossKind { Mse, CrossEntropy };

std::string to_string(LossKind k);
LossKind loss_kind_from_string(const std::string& s);

/// A batch of examples, column-per-example. For MSE, targets holds a k x B
/// matrix; for cross-entropy, labels holds one class index per column.
struct Batch {
    LossKind loss = LossKind::Mse;
    Tensor inputs;             // d x B
    Tensor targets;            // k x B (MSE)
    std::vector<int> labels;   // B (cross-entropy)

    std::size_t size() const { return inputs.cols(); }
};

/// Per-sample loss value with closed-form output-space derivatives.
/// hess_z is k x k: the identity for MSE, diag(p) - p p^T for cross-entropy.
struct LossEval {
    double loss = 0.0;
    Tensor grad_z;
    Tensor hess_z;
};

LossEval loss_eval(LossKind kind, const Tensor& z, const Tensor& y_onehot_or_target);
LossEval loss_eval(LossKind kind, const Tensor& z, int class_index);

/// softmax probabilities from logits (log-sum-exp stabilized)
std::vector<double> softmax(const double* z, std::size_t k);

}  // namespace curvkit
