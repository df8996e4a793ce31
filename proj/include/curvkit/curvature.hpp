#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "curvkit/model.hpp"

namespace curvkit {

enum class CurvatureKind { Hessian, GaussNewton, Nme };

/// Matrix-free curvature operator for a (model, batch, parameter snapshot)
/// triple. The Hessian splits as H = GN + NME: the Gauss-Newton part
/// J^T H_z J never evaluates a second derivative of the model, the NME part
/// carries all of them. apply() is pure; distinct calls may run concurrently.
class CurvatureOperator {
  public:
    CurvatureOperator(CurvatureKind kind, Model model, Batch batch,
                      const OverrideRegistry* reg = nullptr);

    std::size_t dim() const { return model_.param_count(); }
    CurvatureKind kind() const { return kind_; }
    const Model& model() const { return model_; }
    const Batch& batch() const { return batch_; }

    /// matrix-vector product of the selected operator; NME uses the cheap
    /// H - GN route
    std::vector<double> apply(std::span<const double> v) const;

    std::vector<double> hessian_vp(std::span<const double> v) const;
    std::vector<double> gauss_newton_vp(std::span<const double> v) const;
    /// NME as hvp - gnvp (default route)
    std::vector<double> nme_vp(std::span<const double> v) const;
    /// NME by contracting grad_z into the tangent-differentiated pullback;
    /// independent of the subtraction route
    std::vector<double> nme_vp_direct(std::span<const double> v) const;

  private:
    CurvatureKind kind_;
    Model model_;
    Batch batch_;
    const OverrideRegistry* reg_;
    LossGraph lg_;
};

/// Dense extraction by applying the operator to every basis vector.
/// Refuses parameter counts above the cap (oracles run on tiny nets only).
Tensor full_matrix(const CurvatureOperator& op, std::size_t cap = 2000);

struct TraceEstimate {
    double estimate = 0.0;
    double stderr_ = 0.0;
    int n_samples = 0;
    std::uint64_t seed = 0;
};

/// Hutchinson estimator: mean of eps^T M eps over standard normal probes.
TraceEstimate hutchinson_trace(const CurvatureOperator& op, int n_samples, std::uint64_t seed);

/// Sampled-label estimator of tr(GN) for cross-entropy: labels drawn from
/// the model's own categorical distribution, squared gradient norm per draw.
/// No gradient flows through the sampling.
TraceEstimate gn_trace_sampled(const Model& m, const Batch& batch, int n_samples,
                               std::uint64_t seed, const OverrideRegistry* reg = nullptr);

struct FisherReport {
    int n_samples = 0;
    std::uint64_t seed = 0;
    double max_abs_deviation = 0.0;       // max |mean H(y_hat) - GN| over entries
    double max_deviation_over_stderr = 0.0;
    double deviation_frobenius = 0.0;
    double gn_frobenius = 0.0;
    Tensor mean_hessian;
    Tensor gauss_newton;
};

/// Monte-Carlo check of the Fisher/GN identity for MSE: averaging full
/// Hessians at labels sampled from the model (y_hat ~ N(z, I)) recovers the
/// Gauss-Newton matrix because the NME term cancels in expectation.
FisherReport fisher_check(const Model& m, const Batch& batch, int n_samples,
                          std::uint64_t seed, const OverrideRegistry* reg = nullptr,
                          std::size_t cap = 2000);

/// Closed-form second derivative of the model output with respect to weight
/// matrices W_l and W_m, contracted with directions (A, B); bias-free models
/// only. Covers both the mixed m > l case and the all-phi'' diagonal m = l
/// case via partial-Jacobian products over cached preactivations.
Tensor analytic_second_derivative(const Model& m, const Tensor& x, std::size_t l,
                                  std::size_t mm, const Tensor& A, const Tensor& B,
                                  const OverrideRegistry* reg = nullptr);

struct NTKMatrix {
    Tensor mat;          // (D*k) x (D*k), J J^T / D
    std::size_t dataset_size = 0;
    std::size_t outputs = 0;
};

/// Empirical NTK over the batch; rows ordered sample-major (all outputs of
/// sample 0, then sample 1, ...).
NTKMatrix ntk(const Model& m, const Batch& batch, const OverrideRegistry* reg = nullptr);

/// Block-diagonal per-sample output Hessian assembled in the same row order
/// as ntk(); useful for the GN/NTK spectral link.
Tensor output_hessian_blockdiag(const Model& m, const Batch& batch);

struct ScanGrid {
    std::size_t index_a = 0, index_b = 0;
    std::vector<double> a_values, b_values;
    Tensor loss;      // resolution x resolution
    Tensor nme_norm;  // Frobenius norm of the restricted 2x2 NME block
};

/// Two-parameter landscape scan; both indices must lie in the same weight
/// matrix (the piecewise-linear reading of the landscape only holds for
/// same-layer pairs). Values are offsets of [-half_range, +half_range]
/// around the snapshot values.
ScanGrid nme_scan(const Model& m, const Batch& batch, std::size_t index_a,
                  std::size_t index_b, double half_range, int resolution,
                  const OverrideRegistry* reg = nullptr);

// dense symmetric eigenvalues, ascending
std::vector<double> eigenvalues_sym(const Tensor& mat);
// real parts of general (possibly nonsymmetric) eigenvalues, ascending
std::vector<double> eigenvalues_general(const Tensor& mat);

}  // namespace curvkit
