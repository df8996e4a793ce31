#pragma once

#include <functional>
#include <map>
#include <stdexcept>
#include <string>

#include "curvkit/dual.hpp"

namespace curvkit {

enum class ActivationKind { Relu, Gelu, BetaGelu, AugmentedRelu, DiminishedGelu, Tanh };

std::string to_string(ActivationKind k);
ActivationKind activation_kind_from_string(const std::string& s);

/// Activation plus sharpness parameter. beta is used by BetaGelu and
/// AugmentedRelu; the other kinds ignore it.
struct ActivationSpec {
    ActivationKind kind = ActivationKind::Gelu;
    double beta = 1.0;
};

/// Replacement for the AD derivative of an activation at a given order.
/// Once registered, every differentiation path that would evaluate the true
/// k-th derivative of that activation uses the replacement instead --
/// including inside HVPs. Values (order 0) are never affected.
struct DerivativeOverride {
    ActivationKind kind;
    int order = 2;  // 1 or 2
    std::function<double(double x, double beta)> fn;
    // Derivative of fn, consulted when the next order up is needed (the
    // third-order path of the Hessian-trace penalty). Zero if absent.
    std::function<double(double x, double beta)> fn_derivative;
};

/// Read-mostly registry of derivative overrides. Configure, then freeze;
/// evaluation never mutates it.
class OverrideRegistry {
  public:
    void register_override(DerivativeOverride ov, bool replace = false);
    bool frozen() const { return frozen_; }
    void freeze() { frozen_ = true; }
    const DerivativeOverride* find(ActivationKind kind, int order) const;

  private:
    std::map<std::pair<ActivationKind, int>, DerivativeOverride> table_;
    bool frozen_ = false;
};

/// Value (order 0) or derivative (order 1..3) of the activation at x,
/// honoring registry overrides. AugmentedRelu and DiminishedGelu have their
/// decoupled second derivatives built in; a registry can impose the same
/// semantics on the plain kinds. ReLU's first derivative at 0 is 0.
double activation_eval(const ActivationSpec& spec, double x, int order,
                       const OverrideRegistry* reg = nullptr);

/// Dual-number lift: differentiating peels one derivative order.
template <class T>
Dual<T> activation_eval(const ActivationSpec& spec, const Dual<T>& x, int order,
                        const OverrideRegistry* reg = nullptr) {
    return {activation_eval(spec, x.v, order, reg),
            activation_eval(spec, x.v, order + 1, reg) * x.d};
}

}  // namespace curvkit
