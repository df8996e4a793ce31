#include "curvkit/activations.hpp"

#include <cmath>

namespace curvkit {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438;

double norm_pdf(double u) { return kInvSqrt2Pi * std::exp(-0.5 * u * u); }
double norm_cdf(double u) { return 0.5 * (1.0 + std::erf(u * 0.70710678118654752440084436210485)); }

// x * Phi(beta x) and derivatives
double beta_gelu(double x, double beta, int order) {
    const double u = beta * x;
    switch (order) {
        case 0: return x * norm_cdf(u);
        case 1: return norm_cdf(u) + u * norm_pdf(u);
        case 2: return beta * norm_pdf(u) * (2.0 - u * u);
        case 3: return -beta * beta * u * norm_pdf(u) * (4.0 - u * u);
        default: return 0.0;
    }
}

double relu(double x, int order) {
    switch (order) {
        case 0: return x > 0.0 ? x : 0.0;
        case 1: return x > 0.0 ? 1.0 : 0.0;  // Theta(0) := 0
        default: return 0.0;
    }
}

double tanh_act(double x, int order) {
    const double t = std::tanh(x);
    const double s = 1.0 - t * t;
    switch (order) {
        case 0: return t;
        case 1: return s;
        case 2: return -2.0 * t * s;
        case 3: return -2.0 * s * (1.0 - 3.0 * t * t);
        default: return 0.0;
    }
}

double gaussian_bump(double x, double beta, int order) {
    const double g = beta * kInvSqrt2Pi * std::exp(-0.5 * beta * beta * x * x);
    return order == 0 ? g : -beta * beta * x * g;
}

double builtin_eval(const ActivationSpec& spec, double x, int order) {
    switch (spec.kind) {
        case ActivationKind::Relu: return relu(x, order);
        case ActivationKind::Gelu: return beta_gelu(x, 1.0, order);
        case ActivationKind::BetaGelu: return beta_gelu(x, spec.beta, order);
        case ActivationKind::AugmentedRelu:
            // value and first derivative are plain ReLU; the second AD
            // derivative is a Gaussian bump of width 1/beta
            if (order <= 1) return relu(x, order);
            return gaussian_bump(x, spec.beta, order - 2);
        case ActivationKind::DiminishedGelu:
            // GELU with its second AD derivative defined as 0
            if (order <= 1) return beta_gelu(x, 1.0, order);
            return 0.0;
        case ActivationKind::Tanh: return tanh_act(x, order);
    }
    return 0.0;
}

}  // namespace

void OverrideRegistry::register_override(DerivativeOverride ov, bool replace) {
    if (frozen_) throw std::runtime_error("override registry is frozen");
    if (ov.order != 1 && ov.order != 2)
        throw std::invalid_argument("override order must be 1 or 2");
    if (!ov.fn) throw std::invalid_argument("override has no replacement function");
    auto key = std::make_pair(ov.kind, ov.order);
    if (!replace && table_.count(key))
        throw std::runtime_error("override already registered for " + to_string(ov.kind) +
                                 " order " + std::to_string(ov.order) +
                                 " (explicit replace required)");
    table_[key] = std::move(ov);
}

const DerivativeOverride* OverrideRegistry::find(ActivationKind kind, int order) const {
    auto it = table_.find({kind, order});
    return it == table_.end() ? nullptr : &it->second;
}

double activation_eval(const ActivationSpec& spec, double x, int order,
                       const OverrideRegistry* reg) {
    if (order < 0 || order > 3) throw std::invalid_argument("activation order out of range");
    if (reg && order >= 1) {
        if (order <= 2) {
            if (const auto* ov = reg->find(spec.kind, order)) return ov->fn(x, spec.beta);
        } else {
            // order 3: derivative of an order-2 override when one exists
            if (const auto* ov = reg->find(spec.kind, 2))
                return ov->fn_derivative ? ov->fn_derivative(x, spec.beta) : 0.0;
        }
    }
    return builtin_eval(spec, x, order);
}

std::string to_string(ActivationKind k) {
    switch (k) {
        case ActivationKind::Relu: return "relu";
        case ActivationKind::Gelu: return "gelu";
        case ActivationKind::BetaGelu: return "beta_gelu";
        case ActivationKind::AugmentedRelu: return "augmented_relu";
        case ActivationKind::DiminishedGelu: return "diminished_gelu";
        case ActivationKind::Tanh: return "tanh";
    }
    return "?";
}

ActivationKind activation_kind_from_string(const std::string& s) {
    if (s == "relu") return ActivationKind::Relu;
    if (s == "gelu") return ActivationKind::Gelu;
    if (s == "beta_gelu") return ActivationKind::BetaGelu;
    if (s == "augmented_relu") return ActivationKind::AugmentedRelu;
    if (s == "diminished_gelu") return ActivationKind::DiminishedGelu;
    if (s == "tanh") return ActivationKind::Tanh;
    throw std::invalid_argument("unknown activation kind: " + s);
}

}  // namespace curvkit
