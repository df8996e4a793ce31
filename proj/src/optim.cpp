#include "curvkit/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "curvkit/curvature.hpp"
#include "curvkit/rng.hpp"

namespace curvkit {

namespace {

double norm2(std::span<const double> v) {
    return std::sqrt(kernels::dot(v.data(), v.data(), v.size()));
}

bool finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// one forward + one reverse pass; returns the loss value
double loss_and_grad(const Objective& o, std::span<const double> theta,
                     std::vector<double>& g) {
    Workspace<double> ws;
    ws.forward(o.graph, theta);
    const double loss = ws.val[o.loss].data[0];
    Tensor seed(o.graph.node(o.loss).shape);
    seed.data[0] = 1.0;
    ws.backward(o.graph, o.loss, seed);
    const auto& gp = ws.adj[o.graph.param_node()];
    g.assign(gp.data.begin(), gp.data.end());
    if (!finite(g)) throw std::runtime_error("non-finite gradient; aborting step");
    return loss;
}

void apply_update(std::vector<double>& theta, std::span<const double> dir, double lr) {
    kernels::axpy(-lr, dir.data(), theta.data(), theta.size());
}

}  // namespace

std::string to_string(RegKind k) {
    switch (k) {
        case RegKind::None: return "none";
        case RegKind::GradPenaltyP1: return "grad_penalty_p1";
        case RegKind::GradPenaltyP2: return "grad_penalty_p2";
        case RegKind::WeightNoise: return "weight_noise";
        case RegKind::HessianTrace: return "hessian_trace";
        case RegKind::GnTrace: return "gn_trace";
        case RegKind::Sam: return "sam";
        case RegKind::Usam: return "usam";
    }
    return "none";
}

RegKind reg_kind_from_string(const std::string& s) {
    if (s == "none") return RegKind::None;
    if (s == "grad_penalty_p1") return RegKind::GradPenaltyP1;
    if (s == "grad_penalty_p2") return RegKind::GradPenaltyP2;
    if (s == "weight_noise") return RegKind::WeightNoise;
    if (s == "hessian_trace") return RegKind::HessianTrace;
    if (s == "gn_trace") return RegKind::GnTrace;
    if (s == "sam") return RegKind::Sam;
    if (s == "usam") return RegKind::Usam;
    throw std::invalid_argument("unknown regularizer kind: " + s);
}

Objective quadratic_objective(const Tensor& H) {
    const std::size_t n = H.rows();
    if (H.cols() != n) throw std::invalid_argument("quadratic_objective: H must be square");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (std::abs(H.at(i, j) - H.at(j, i)) > 1e-12)
                throw std::invalid_argument("quadratic_objective: H must be symmetric");
    Objective o;
    o.dim = n;
    const int p = o.graph.param(n);
    const int th = o.graph.slice_mat(p, 0, n, 1, "theta");
    const int Hn = o.graph.constant(H, "H");
    const int Hth = o.graph.matmul(Hn, th, "H theta");
    o.loss = o.graph.scale(o.graph.dot(th, Hth), 0.5);
    return o;
}

Objective model_objective(const Model& m, const Batch& batch, const OverrideRegistry* reg) {
    Objective o;
    LossGraph lg = build_loss_graph(m, batch, reg);
    o.graph = std::move(lg.graph);
    o.loss = lg.loss;
    o.dim = m.param_count();
    return o;
}

StepReport sgd_step(const Objective& o, std::vector<double>& theta, double lr) {
    if (lr <= 0.0) throw std::invalid_argument("sgd_step: lr must be positive");
    StepReport r;
    std::vector<double> g;
    r.base_loss = loss_and_grad(o, theta, g);
    r.grad_norm = norm2(g);
    r.grad_evals = 1;
    apply_update(theta, g, lr);
    return r;
}

StepReport grad_penalty_step(const Objective& o, std::vector<double>& theta, double lr,
                             double rho, int p, double eps) {
    if (p != 1 && p != 2) throw std::invalid_argument("grad_penalty_step: p must be 1 or 2");
    StepReport r;
    std::vector<double> g;
    r.base_loss = loss_and_grad(o, theta, g);
    r.grad_norm = norm2(g);
    r.grad_evals = 1;
    std::vector<double> dir = g;
    if (rho != 0.0) {
        if (p == 1 && r.grad_norm < eps) {
            r.penalty_skipped = true;
        } else {
            auto hg = hvp(o.graph, o.loss, theta, g);
            const double c = p == 1 ? rho / r.grad_norm : 2.0 * rho;
            double pn2 = 0.0;
            for (std::size_t i = 0; i < dir.size(); ++i) {
                dir[i] += c * hg[i];
                pn2 += c * hg[i] * c * hg[i];
            }
            r.penalty_term_norm = std::sqrt(pn2);
        }
    }
    r.penalty_value = rho * (p == 1 ? r.grad_norm : r.grad_norm * r.grad_norm);
    apply_update(theta, dir, lr);
    return r;
}

StepReport weight_noise_step(const Objective& o, std::vector<double>& theta, double lr,
                             double sigma2, std::uint64_t seed) {
    if (sigma2 < 0.0) throw std::invalid_argument("weight_noise_step: sigma2 must be >= 0");
    StepReport r;
    r.seed = seed;
    r.n_estimator_samples = 1;
    std::vector<double> g;
    r.base_loss = loss_and_grad(o, theta, g);
    r.grad_norm = norm2(g);
    r.grad_evals = 1;
    if (sigma2 == 0.0) {
        apply_update(theta, g, lr);
        return r;
    }
    CounterRng rng(seed);
    const double sigma = std::sqrt(sigma2);
    std::vector<double> probe(theta.size());  // standard normal
    std::vector<double> perturbed = theta;
    for (std::size_t j = 0; j < theta.size(); ++j) {
        probe[j] = rng.normal(0, j);
        perturbed[j] += sigma * probe[j];
    }
    std::vector<double> gn;
    loss_and_grad(o, perturbed, gn);
    r.grad_evals = 2;
    apply_update(theta, gn, lr);
    double pn2 = 0.0;
    for (std::size_t j = 0; j < gn.size(); ++j) {
        const double d = gn[j] - g[j];
        pn2 += d * d;
    }
    r.penalty_term_norm = std::sqrt(pn2);
    // diagnostic only: single-probe Hutchinson value of sigma2 * tr(H)
    auto hp = hvp(o.graph, o.loss, theta, probe);
    r.penalty_value = sigma2 * kernels::dot(probe.data(), hp.data(), probe.size());
    return r;
}

StepReport hessian_trace_penalty_step(const Objective& o, std::vector<double>& theta,
                                      double lr, double sigma2, int n_samples,
                                      std::uint64_t seed) {
    if (n_samples < 1)
        throw std::invalid_argument("hessian_trace_penalty_step: n_samples must be >= 1");
    StepReport r;
    r.seed = seed;
    r.n_estimator_samples = n_samples;
    std::vector<double> g;
    r.base_loss = loss_and_grad(o, theta, g);
    r.grad_norm = norm2(g);
    r.grad_evals = 1;
    std::vector<double> dir = g;
    if (sigma2 != 0.0) {
        CounterRng rng(seed);
        std::vector<double> eps(theta.size());
        std::vector<double> pterm(theta.size(), 0.0);
        double quad = 0.0;
        for (int s = 0; s < n_samples; ++s) {
            for (std::size_t j = 0; j < eps.size(); ++j) eps[j] = rng.normal(s, j);
            auto he = hvp(o.graph, o.loss, theta, eps);
            quad += kernels::dot(eps.data(), he.data(), eps.size());
            // exact gradient of eps^T H(theta) eps in theta
            auto t = third_order_contraction(o.graph, o.loss, theta, eps, eps);
            for (std::size_t j = 0; j < pterm.size(); ++j) pterm[j] += t[j];
        }
        const double c = sigma2 / n_samples;
        r.penalty_value = c * quad;
        double pn2 = 0.0;
        for (std::size_t j = 0; j < dir.size(); ++j) {
            dir[j] += c * pterm[j];
            pn2 += c * pterm[j] * c * pterm[j];
        }
        r.penalty_term_norm = std::sqrt(pn2);
    }
    apply_update(theta, dir, lr);
    return r;
}

StepReport sam_step(const Objective& o, std::vector<double>& theta, double lr, double rho,
                    bool normalized, double eps) {
    if (rho < 0.0) throw std::invalid_argument("sam_step: rho must be >= 0");
    StepReport r;
    std::vector<double> g;
    r.base_loss = loss_and_grad(o, theta, g);
    r.grad_norm = norm2(g);
    r.grad_evals = 1;
    if (rho == 0.0 || (normalized && r.grad_norm < eps)) {
        r.penalty_skipped = rho != 0.0;
        apply_update(theta, g, lr);
        return r;
    }
    const double scale = normalized ? rho / r.grad_norm : rho;
    std::vector<double> perturbed = theta;
    kernels::axpy(scale, g.data(), perturbed.data(), theta.size());
    std::vector<double> g2;
    loss_and_grad(o, perturbed, g2);
    r.grad_evals = 2;
    // implicit penalty: rho*||g|| for SAM, (rho/2)*||g||^2 for USAM
    r.penalty_value =
        normalized ? rho * r.grad_norm : 0.5 * rho * r.grad_norm * r.grad_norm;
    double pn2 = 0.0;
    for (std::size_t j = 0; j < g2.size(); ++j) {
        const double d = g2[j] - g[j];
        pn2 += d * d;
    }
    r.penalty_term_norm = std::sqrt(pn2);
    apply_update(theta, g2, lr);
    return r;
}

StepReport gn_trace_penalty_step(Model& m, const Batch& batch, double lr, double sigma2,
                                 int n_samples, std::uint64_t seed, bool straight_through,
                                 const OverrideRegistry* reg) {
    if (batch.loss != LossKind::CrossEntropy)
        throw std::invalid_argument("gn_trace_penalty_step requires cross-entropy loss");
    if (n_samples < 1)
        throw std::invalid_argument("gn_trace_penalty_step: n_samples must be >= 1");
    Objective o = model_objective(m, batch, reg);
    StepReport r;
    r.seed = seed;
    r.n_estimator_samples = n_samples;
    std::vector<double> g;
    r.base_loss = loss_and_grad(o, m.params, g);
    r.grad_norm = norm2(g);
    r.grad_evals = 1;
    std::vector<double> dir = g;
    if (sigma2 != 0.0) {
        Tensor Z = model_forward(m, batch.inputs, reg).z;
        const std::size_t k = Z.rows(), B = Z.cols();
        std::vector<std::vector<double>> probs(B);
        for (std::size_t b = 0; b < B; ++b) {
            std::vector<double> zc(k);
            for (std::size_t i = 0; i < k; ++i) zc[i] = Z.at(i, b);
            probs[b] = softmax(zc.data(), k);
        }
        CounterRng rng(seed);
        std::vector<double> pterm(m.params.size(), 0.0);
        double pval = 0.0;
        for (int s = 0; s < n_samples; ++s) {
            std::vector<int> yhat(B);
            for (std::size_t b = 0; b < B; ++b) {
                const double u = rng.uniform(s, b);
                double acc = 0.0;
                int c = static_cast<int>(k) - 1;
                for (std::size_t i = 0; i < k; ++i) {
                    acc += probs[b][i];
                    if (u <= acc) { c = static_cast<int>(i); break; }
                }
                yhat[b] = c;
            }
            Batch bs = batch;
            bs.labels = yhat;
            Objective os = model_objective(m, bs, reg);
            std::vector<double> gs;
            loss_and_grad(os, m.params, gs);
            pval += static_cast<double>(B) * kernels::dot(gs.data(), gs.data(), gs.size());
            // d/dtheta ||grad L(theta, yhat)||^2 = 2 H(theta, yhat) grad
            auto hg = hvp(os.graph, os.loss, m.params, gs);
            if (straight_through) {
                // pass the sampled one-hot's gradient through as the softmax
                // probabilities: this cancels the J^T H_z J part of H(yhat),
                // which is label-independent for cross-entropy
                CurvatureOperator gn(CurvatureKind::GaussNewton, m, batch, reg);
                auto gg = gn.gauss_newton_vp(gs);
                for (std::size_t j = 0; j < hg.size(); ++j) hg[j] -= gg[j];
            }
            const double c = 2.0 * sigma2 * static_cast<double>(B) / n_samples;
            for (std::size_t j = 0; j < pterm.size(); ++j) pterm[j] += c * hg[j];
        }
        r.penalty_value = sigma2 * pval / n_samples;
        double pn2 = 0.0;
        for (std::size_t j = 0; j < dir.size(); ++j) {
            dir[j] += pterm[j];
            pn2 += pterm[j] * pterm[j];
        }
        r.penalty_term_norm = std::sqrt(pn2);
    }
    apply_update(m.params, dir, lr);
    return r;
}

StepReport sgd_step(Model& m, const Batch& batch, double lr, const OverrideRegistry* reg) {
    Objective o = model_objective(m, batch, reg);
    return sgd_step(o, m.params, lr);
}

StepReport grad_penalty_step(Model& m, const Batch& batch, double lr, double rho, int p,
                             double eps, const OverrideRegistry* reg) {
    Objective o = model_objective(m, batch, reg);
    return grad_penalty_step(o, m.params, lr, rho, p, eps);
}

StepReport weight_noise_step(Model& m, const Batch& batch, double lr, double sigma2,
                             std::uint64_t seed, const OverrideRegistry* reg) {
    Objective o = model_objective(m, batch, reg);
    return weight_noise_step(o, m.params, lr, sigma2, seed);
}

StepReport hessian_trace_penalty_step(Model& m, const Batch& batch, double lr, double sigma2,
                                      int n_samples, std::uint64_t seed,
                                      const OverrideRegistry* reg) {
    Objective o = model_objective(m, batch, reg);
    return hessian_trace_penalty_step(o, m.params, lr, sigma2, n_samples, seed);
}

StepReport sam_step(Model& m, const Batch& batch, double lr, double rho, bool normalized,
                    double eps, const OverrideRegistry* reg) {
    Objective o = model_objective(m, batch, reg);
    return sam_step(o, m.params, lr, rho, normalized, eps);
}

StepReport regularized_step(Model& m, const Batch& batch, const RegularizerSpec& spec,
                            double lr, std::uint64_t step_seed, const OverrideRegistry* reg) {
    switch (spec.kind) {
        case RegKind::None:
            return sgd_step(m, batch, lr, reg);
        case RegKind::GradPenaltyP1:
            return grad_penalty_step(m, batch, lr, spec.rho, 1, spec.grad_norm_epsilon, reg);
        case RegKind::GradPenaltyP2:
            return grad_penalty_step(m, batch, lr, spec.rho, 2, spec.grad_norm_epsilon, reg);
        case RegKind::WeightNoise:
            return weight_noise_step(m, batch, lr, spec.sigma2, step_seed, reg);
        case RegKind::HessianTrace:
            return hessian_trace_penalty_step(m, batch, lr, spec.sigma2,
                                              spec.n_estimator_samples, step_seed, reg);
        case RegKind::GnTrace:
            return gn_trace_penalty_step(m, batch, lr, spec.sigma2, spec.n_estimator_samples,
                                         step_seed, spec.straight_through, reg);
        case RegKind::Sam:
            return sam_step(m, batch, lr, spec.rho, true, spec.grad_norm_epsilon, reg);
        case RegKind::Usam:
            return sam_step(m, batch, lr, spec.rho, false, spec.grad_norm_epsilon, reg);
    }
    throw std::logic_error("unreachable regularizer kind");
}

}  // namespace curvkit
