#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "curvkit/model.hpp"

namespace curvkit {

enum class RegKind {
    None,
    GradPenaltyP1,
    GradPenaltyP2,
    WeightNoise,
    HessianTrace,
    GnTrace,
    Sam,
    Usam,
};

std::string to_string(RegKind k);
RegKind reg_kind_from_string(const std::string& s);

struct RegularizerSpec {
    RegKind kind = RegKind::None;
    double rho = 0.0;     // penalty / perturbation strength
    double sigma2 = 0.0;  // noise / trace-penalty strength
    int n_estimator_samples = 1;
    double grad_norm_epsilon = 1e-12;
    bool straight_through = false;
};

struct StepReport {
    double base_loss = 0.0;
    double penalty_value = 0.0;      // diagnostic value of the regularizer term
    double grad_norm = 0.0;          // ||grad of the base loss||
    double penalty_term_norm = 0.0;  // norm of the regularizer part of the update
    int n_estimator_samples = 0;
    std::uint64_t seed = 0;
    bool penalty_skipped = false;  // p=1 / SAM normalization guard fired
    int grad_evals = 0;            // reverse passes through the base objective
};

/// A differentiable scalar objective over a flat parameter vector. Training
/// steps and the quadratic-dynamics oracle both run against this, so the two
/// can be compared step for step.
struct Objective {
    Graph graph;
    int loss = -1;
    std::size_t dim = 0;
};

/// L(theta) = 0.5 theta^T H theta (H symmetric)
Objective quadratic_objective(const Tensor& H);
Objective model_objective(const Model& m, const Batch& batch,
                          const OverrideRegistry* reg = nullptr);

// ---- step rules on a flat parameter vector ----

StepReport sgd_step(const Objective& o, std::vector<double>& theta, double lr);

/// update -lr*(g + rho*H g/||g||) for p=1, -lr*(g + 2 rho*H g) for p=2;
/// p=1 skips the penalty term (flagged) when ||g|| < eps
StepReport grad_penalty_step(const Objective& o, std::vector<double>& theta, double lr,
                             double rho, int p, double eps = 1e-12);

/// gradient evaluated at theta + eps, eps ~ N(0, sigma2 I), applied at theta
StepReport weight_noise_step(const Objective& o, std::vector<double>& theta, double lr,
                             double sigma2, std::uint64_t seed);

/// objective L + sigma2 * mean_i eps_i^T H eps_i with the probes fixed per
/// step; the penalty gradient is the exact derivative of the quadratic form
StepReport hessian_trace_penalty_step(const Objective& o, std::vector<double>& theta,
                                      double lr, double sigma2, int n_samples,
                                      std::uint64_t seed);

/// two-evaluation rule: gradient at theta + rho*g/||g|| (normalized) or
/// theta + rho*g (unnormalized) applied at theta
StepReport sam_step(const Objective& o, std::vector<double>& theta, double lr, double rho,
                    bool normalized, double eps = 1e-12);

/// cross-entropy only: penalty sigma2 * mean_s D*||grad L(theta, yhat_s)||^2
/// with labels sampled from the model's categorical distribution; no gradient
/// flows through the sampling unless straight_through is set
StepReport gn_trace_penalty_step(Model& m, const Batch& batch, double lr, double sigma2,
                                 int n_samples, std::uint64_t seed,
                                 bool straight_through = false,
                                 const OverrideRegistry* reg = nullptr);

// ---- model-level wrappers (write back into model.params) ----

StepReport sgd_step(Model& m, const Batch& batch, double lr,
                    const OverrideRegistry* reg = nullptr);
StepReport grad_penalty_step(Model& m, const Batch& batch, double lr, double rho, int p,
                             double eps = 1e-12, const OverrideRegistry* reg = nullptr);
StepReport weight_noise_step(Model& m, const Batch& batch, double lr, double sigma2,
                             std::uint64_t seed, const OverrideRegistry* reg = nullptr);
StepReport hessian_trace_penalty_step(Model& m, const Batch& batch, double lr, double sigma2,
                                      int n_samples, std::uint64_t seed,
                                      const OverrideRegistry* reg = nullptr);
StepReport sam_step(Model& m, const Batch& batch, double lr, double rho, bool normalized,
                    double eps = 1e-12, const OverrideRegistry* reg = nullptr);

/// dispatch on spec.kind; step_seed keys all per-step randomness
StepReport regularized_step(Model& m, const Batch& batch, const RegularizerSpec& spec,
                            double lr, std::uint64_t step_seed,
                            const OverrideRegistry* reg = nullptr);

}  // namespace curvkit
