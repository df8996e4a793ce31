#include "curvkit/curvature.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "curvkit/rng.hpp"

namespace curvkit {

namespace {

// per-column cotangent seeds grad_z / B for a batch at logits Z
Tensor loss_grad_seeds(const Batch& batch, const Tensor& Z) {
    const std::size_t k = Z.rows(), B = Z.cols();
    Tensor C(Z.shape);
    const double inv = 1.0 / static_cast<double>(B);
    for (std::size_t b = 0; b < B; ++b) {
        if (batch.loss == LossKind::Mse) {
            for (std::size_t i = 0; i < k; ++i)
                C.at(i, b) = (Z.at(i, b) - batch.targets.at(i, b)) * inv;
        } else {
            std::vector<double> zc(k);
            for (std::size_t i = 0; i < k; ++i) zc[i] = Z.at(i, b);
            auto p = softmax(zc.data(), k);
            for (std::size_t i = 0; i < k; ++i)
                C.at(i, b) = (p[i] - (static_cast<int>(i) == batch.labels[b] ? 1.0 : 0.0)) * inv;
        }
    }
    return C;
}

std::vector<double> nme_direct_impl(const Graph& g, int output, const Batch& batch,
                                    std::span<const double> params, std::span<const double> v) {
    Tensor Z = eval(g, params, output);
    Tensor C = loss_grad_seeds(batch, Z);
    return vjp_tangent(g, output, params, v, C);
}

}  // namespace

CurvatureOperator::CurvatureOperator(CurvatureKind kind, Model model, Batch batch,
                                     const OverrideRegistry* reg)
    : kind_(kind), model_(std::move(model)), batch_(std::move(batch)), reg_(reg) {
    lg_ = build_loss_graph(model_, batch_, reg_);
}

std::vector<double> CurvatureOperator::apply(std::span<const double> v) const {
    switch (kind_) {
        case CurvatureKind::Hessian: return hessian_vp(v);
        case CurvatureKind::GaussNewton: return gauss_newton_vp(v);
        case CurvatureKind::Nme: return nme_vp(v);
    }
    return {};
}

std::vector<double> CurvatureOperator::hessian_vp(std::span<const double> v) const {
    return hvp(lg_.graph, lg_.loss, model_.params, v);
}

std::vector<double> CurvatureOperator::gauss_newton_vp(std::span<const double> v) const {
    // J v by a forward tangent pass, H_z contraction per sample, then J^T
    Tensor zdot = jvp(lg_.graph, lg_.output, model_.params, v);
    Tensor Z = eval(lg_.graph, model_.params, lg_.output);
    const std::size_t k = Z.rows(), B = Z.cols();
    Tensor W(Z.shape);
    const double inv = 1.0 / static_cast<double>(B);
    for (std::size_t b = 0; b < B; ++b) {
        if (batch_.loss == LossKind::Mse) {
            for (std::size_t i = 0; i < k; ++i) W.at(i, b) = zdot.at(i, b) * inv;
        } else {
            std::vector<double> zc(k);
            for (std::size_t i = 0; i < k; ++i) zc[i] = Z.at(i, b);
            auto p = softmax(zc.data(), k);
            double pdz = 0.0;
            for (std::size_t i = 0; i < k; ++i) pdz += p[i] * zdot.at(i, b);
            for (std::size_t i = 0; i < k; ++i)
                W.at(i, b) = p[i] * (zdot.at(i, b) - pdz) * inv;
        }
    }
    return vjp(lg_.graph, lg_.output, model_.params, W);
}

std::vector<double> CurvatureOperator::nme_vp(std::span<const double> v) const {
    auto h = hessian_vp(v);
    auto g = gauss_newton_vp(v);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] -= g[i];
    return h;
}

std::vector<double> CurvatureOperator::nme_vp_direct(std::span<const double> v) const {
    return nme_direct_impl(lg_.graph, lg_.output, batch_, model_.params, v);
}

Tensor full_matrix(const CurvatureOperator& op, std::size_t cap) {
    const std::size_t n = op.dim();
    if (n > cap)
        throw std::runtime_error("full_matrix: parameter count " + std::to_string(n) +
                                 " exceeds cap " + std::to_string(cap));
    Tensor M({n, n});
    std::vector<double> e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        auto col = op.apply(e);
        e[j] = 0.0;
        for (std::size_t i = 0; i < n; ++i) M.at(i, j) = col[i];
    }
    if (op.kind() == CurvatureKind::Hessian) {
        double scale = 0.0, asym = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                scale = std::max(scale, std::abs(M.at(i, j)));
                asym = std::max(asym, std::abs(M.at(i, j) - M.at(j, i)));
            }
        if (asym > 1e-8 * (1.0 + scale))
            throw std::runtime_error("full_matrix: Hessian asymmetry " + std::to_string(asym));
    }
    return M;
}

TraceEstimate hutchinson_trace(const CurvatureOperator& op, int n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw std::invalid_argument("hutchinson_trace: n_samples must be >= 1");
    CounterRng rng(seed);
    const std::size_t n = op.dim();
    double mean = 0.0, m2 = 0.0;
    std::vector<double> eps(n);
    for (int s = 0; s < n_samples; ++s) {
        for (std::size_t j = 0; j < n; ++j) eps[j] = rng.normal(s, j);
        auto me = op.apply(eps);
        double q = kernels::dot(eps.data(), me.data(), n);
        const double delta = q - mean;
        mean += delta / (s + 1);
        m2 += delta * (q - mean);
    }
    TraceEstimate e;
    e.estimate = mean;
    e.stderr_ = n_samples > 1 ? std::sqrt(m2 / (n_samples - 1) / n_samples) : 0.0;
    e.n_samples = n_samples;
    e.seed = seed;
    return e;
}

TraceEstimate gn_trace_sampled(const Model& m, const Batch& batch, int n_samples,
                               std::uint64_t seed, const OverrideRegistry* reg) {
    if (batch.loss != LossKind::CrossEntropy)
        throw std::invalid_argument("gn_trace_sampled requires cross-entropy loss");
    if (n_samples < 1) throw std::invalid_argument("gn_trace_sampled: n_samples must be >= 1");
    Graph g;
    g.set_overrides(reg);
    const int out = build_model_graph(g, m, batch.inputs);
    Workspace<double> ws;
    ws.forward(g, m.params);
    const Tensor& Z = ws.val[out];
    const std::size_t k = Z.rows(), B = Z.cols();
    std::vector<std::vector<double>> probs(B);
    for (std::size_t b = 0; b < B; ++b) {
        std::vector<double> zc(k);
        for (std::size_t i = 0; i < k; ++i) zc[i] = Z.at(i, b);
        probs[b] = softmax(zc.data(), k);
    }
    CounterRng rng(seed);
    double mean = 0.0, m2 = 0.0;
    const double invB = 1.0 / static_cast<double>(B);
    Tensor C(Z.shape);
    for (int s = 0; s < n_samples; ++s) {
        for (std::size_t b = 0; b < B; ++b) {
            const double u = rng.uniform(s, b);
            double acc = 0.0;
            int yhat = static_cast<int>(k) - 1;
            for (std::size_t i = 0; i < k; ++i) {
                acc += probs[b][i];
                if (u <= acc) { yhat = static_cast<int>(i); break; }
            }
            for (std::size_t i = 0; i < k; ++i)
                C.at(i, b) = (probs[b][i] - (static_cast<int>(i) == yhat ? 1.0 : 0.0)) * invB;
        }
        ws.backward(g, out, C);
        const auto& gp = ws.adj[g.param_node()];
        double q = static_cast<double>(B) *
                   kernels::dot(gp.data.data(), gp.data.data(), gp.size());
        const double delta = q - mean;
        mean += delta / (s + 1);
        m2 += delta * (q - mean);
    }
    TraceEstimate e;
    e.estimate = mean;
    e.stderr_ = n_samples > 1 ? std::sqrt(m2 / (n_samples - 1) / n_samples) : 0.0;
    e.n_samples = n_samples;
    e.seed = seed;
    return e;
}

FisherReport fisher_check(const Model& m, const Batch& batch, int n_samples,
                          std::uint64_t seed, const OverrideRegistry* reg, std::size_t cap) {
    if (batch.loss != LossKind::Mse)
        throw std::invalid_argument("fisher_check requires MSE loss");
    const std::size_t n = m.param_count();
    if (n > cap)
        throw std::runtime_error("fisher_check: parameter count exceeds cap " + std::to_string(cap));
    CurvatureOperator gn_op(CurvatureKind::GaussNewton, m, batch, reg);
    Tensor GN = full_matrix(gn_op, cap);

    Tensor Z = model_forward(m, batch.inputs, reg).z;
    const std::size_t k = Z.rows(), B = Z.cols();
    CounterRng rng(seed);
    Tensor mean({n, n}), m2({n, n});
    std::vector<double> e(n, 0.0);
    for (int s = 0; s < n_samples; ++s) {
        Batch bs = batch;
        bs.targets = Tensor(Z.shape);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t b = 0; b < B; ++b)
                bs.targets.at(i, b) = Z.at(i, b) + rng.normal(s, i * B + b);
        LossGraph lg = build_loss_graph(m, bs, reg);
        for (std::size_t j = 0; j < n; ++j) {
            e[j] = 1.0;
            auto col = hvp(lg.graph, lg.loss, m.params, e);
            e[j] = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double x = col[i];
                const double delta = x - mean.at(i, j);
                mean.at(i, j) += delta / (s + 1);
                m2.at(i, j) += delta * (x - mean.at(i, j));
            }
        }
    }
    FisherReport rep;
    rep.n_samples = n_samples;
    rep.seed = seed;
    rep.mean_hessian = mean;
    rep.gauss_newton = GN;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double dev = std::abs(mean.at(i, j) - GN.at(i, j));
            rep.max_abs_deviation = std::max(rep.max_abs_deviation, dev);
            rep.deviation_frobenius += dev * dev;
            rep.gn_frobenius += GN.at(i, j) * GN.at(i, j);
            // entries the labels never move (dev at float noise) carry no
            // meaningful z-statistic
            if (n_samples > 1 && dev > 1e-10) {
                const double se =
                    std::sqrt(m2.at(i, j) / (n_samples - 1) / n_samples);
                rep.max_deviation_over_stderr = std::max(
                    rep.max_deviation_over_stderr,
                    se > 0.0 ? dev / se : std::numeric_limits<double>::infinity());
            }
        }
    rep.deviation_frobenius = std::sqrt(rep.deviation_frobenius);
    rep.gn_frobenius = std::sqrt(rep.gn_frobenius);
    return rep;
}

Tensor analytic_second_derivative(const Model& m, const Tensor& x, std::size_t l,
                                  std::size_t mm, const Tensor& A, const Tensor& B,
                                  const OverrideRegistry* reg) {
    if (m.bias) throw std::invalid_argument("analytic_second_derivative: bias-free models only");
    const std::size_t L = m.depth();
    if (l > mm || mm >= L)
        throw std::invalid_argument("analytic_second_derivative requires l <= m < depth");
    if (A.rows() != m.widths[l + 1] || A.cols() != m.widths[l])
        throw std::invalid_argument("direction A is not shaped like W_l");
    if (B.rows() != m.widths[mm + 1] || B.cols() != m.widths[mm])
        throw std::invalid_argument("direction B is not shaped like W_m");
    if (x.cols() != 1)
        throw std::invalid_argument("analytic_second_derivative takes a single input column");

    ForwardCache c = model_forward(m, x, reg);
    // per-layer phi' and phi'' at the cached preactivations; the last layer
    // is the identity when the model has a linear head
    std::vector<std::vector<double>> d(L), s(L);
    for (std::size_t k = 0; k < L; ++k) {
        const bool act = (k + 1 < L) || m.final_activation;
        const auto& hk = c.h[k].data;
        d[k].resize(hk.size());
        s[k].resize(hk.size());
        for (std::size_t i = 0; i < hk.size(); ++i) {
            d[k][i] = act ? activation_eval(m.activation, hk[i], 1, reg) : 1.0;
            s[k][i] = act ? activation_eval(m.activation, hk[i], 2, reg) : 0.0;
        }
    }

    auto matvec = [&](const double* M, const std::vector<double>& v,
                      std::size_t r, std::size_t kk) {
        std::vector<double> out(r, 0.0);
        kernels::matmul(M, v.data(), out.data(), r, kk, 1, false);
        return out;
    };
    auto layer_w = [&](std::size_t k) { return m.params.data() + m.weight_offset(k); };
    auto hadamard = [](const std::vector<double>& a, const std::vector<double>& b) {
        std::vector<double> out(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
        return out;
    };
    // propagate a tangent of x_a to a tangent of x_L (partial Jacobian)
    auto prop = [&](std::vector<double> v, std::size_t a) {
        for (std::size_t k = a; k < L; ++k)
            v = hadamard(d[k], matvec(layer_w(k), v, m.widths[k + 1], m.widths[k]));
        return v;
    };
    auto col = [](const Tensor& t, std::size_t k) {
        std::vector<double> v(t.rows());
        for (std::size_t i = 0; i < t.rows(); ++i) v[i] = t.at(i, k);
        return v;
    };

    // A-direction tangents at every level above l
    std::vector<std::vector<double>> ta(L + 1);
    ta[l + 1] = hadamard(d[l], matvec(A.data.data(), col(c.x[l], 0), A.rows(), A.cols()));
    for (std::size_t k = l + 1; k < L; ++k)
        ta[k + 1] = hadamard(d[k], matvec(layer_w(k), ta[k], m.widths[k + 1], m.widths[k]));

    // B-direction preactivation tangents h_o for o >= m
    std::vector<std::vector<double>> hb(L);
    hb[mm] = matvec(B.data.data(), col(c.x[mm], 0), B.rows(), B.cols());
    {
        std::vector<double> xb = hadamard(d[mm], hb[mm]);
        for (std::size_t k = mm + 1; k < L; ++k) {
            hb[k] = matvec(layer_w(k), xb, m.widths[k + 1], m.widths[k]);
            xb = hadamard(d[k], hb[k]);
        }
    }

    const std::size_t out_dim = c.z.rows();
    std::vector<double> S(out_dim, 0.0);
    auto add = [&](const std::vector<double>& v) {
        for (std::size_t i = 0; i < out_dim; ++i) S[i] += v[i];
    };

    if (mm > l) {
        // direct W_m differentiation term
        add(prop(hadamard(d[mm], matvec(B.data.data(), ta[mm], B.rows(), B.cols())), mm + 1));
    } else {
        // m = l: the phi''-only diagonal term
        std::vector<double> ax = matvec(A.data.data(), col(c.x[l], 0), A.rows(), A.cols());
        add(prop(hadamard(hadamard(s[l], hb[l]), ax), l + 1));
    }
    // phi'' cross terms from differentiating the propagator factors
    for (std::size_t o = (mm > l ? mm : mm + 1); o < L; ++o) {
        std::vector<double> he = matvec(layer_w(o), ta[o], m.widths[o + 1], m.widths[o]);
        add(prop(hadamard(hadamard(s[o], hb[o]), he), o + 1));
    }

    return Tensor({out_dim}, std::move(S));
}

NTKMatrix ntk(const Model& m, const Batch& batch, const OverrideRegistry* reg) {
    if (batch.size() == 0) throw std::invalid_argument("ntk: empty batch");
    Graph g;
    g.set_overrides(reg);
    const int out = build_model_graph(g, m, batch.inputs);
    Workspace<double> ws;
    ws.forward(g, m.params);
    const std::size_t k = ws.val[out].rows(), B = ws.val[out].cols();
    const std::size_t n = m.param_count();
    const std::size_t rows = k * B;
    Tensor J({rows, n});
    Tensor seed({k, B});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t i = 0; i < k; ++i) {
            seed.at(i, b) = 1.0;
            ws.backward(g, out, seed);
            seed.at(i, b) = 0.0;
            const auto& gp = ws.adj[g.param_node()];
            for (std::size_t j = 0; j < n; ++j) J.at(b * k + i, j) = gp.data[j];
        }
    NTKMatrix ntkm;
    ntkm.dataset_size = B;
    ntkm.outputs = k;
    ntkm.mat = Tensor({rows, rows});
    kernels::matmul_nt(J.data.data(), J.data.data(), ntkm.mat.data.data(), rows, n, rows, false);
    const double inv = 1.0 / static_cast<double>(B);
    for (auto& v : ntkm.mat.data) v *= inv;
    return ntkm;
}

Tensor output_hessian_blockdiag(const Model& m, const Batch& batch) {
    Tensor Z = model_forward(m, batch.inputs).z;
    const std::size_t k = Z.rows(), B = Z.cols();
    Tensor H({k * B, k * B});
    for (std::size_t b = 0; b < B; ++b) {
        Tensor zc({k});
        for (std::size_t i = 0; i < k; ++i) zc.data[i] = Z.at(i, b);
        LossEval e = batch.loss == LossKind::Mse
                         ? loss_eval(LossKind::Mse, zc, [&] {
                               Tensor yc({k});
                               for (std::size_t i = 0; i < k; ++i) yc.data[i] = batch.targets.at(i, b);
                               return yc;
                           }())
                         : loss_eval(LossKind::CrossEntropy, zc, batch.labels[b]);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j)
                H.at(b * k + i, b * k + j) = e.hess_z.at(i, j);
    }
    return H;
}

ScanGrid nme_scan(const Model& m, const Batch& batch, std::size_t index_a,
                  std::size_t index_b, double half_range, int resolution,
                  const OverrideRegistry* reg) {
    if (resolution < 2) throw std::invalid_argument("nme_scan: resolution must be >= 2");
    // both indices must fall in the weight block of one layer
    auto locate = [&](std::size_t idx) {
        for (std::size_t layer = 0; layer < m.depth(); ++layer) {
            const std::size_t off = m.weight_offset(layer);
            const std::size_t nw = m.widths[layer + 1] * m.widths[layer];
            if (idx >= off && idx < off + nw) return layer;
        }
        throw std::invalid_argument("nme_scan: index is not a weight entry");
    };
    if (locate(index_a) != locate(index_b))
        throw std::invalid_argument(
            "nme_scan: indices in different layers (same-layer pairs only)");

    LossGraph lg = build_loss_graph(m, batch, reg);
    const std::size_t n = m.param_count();
    ScanGrid grid;
    grid.index_a = index_a;
    grid.index_b = index_b;
    grid.loss = Tensor({static_cast<std::size_t>(resolution), static_cast<std::size_t>(resolution)});
    grid.nme_norm = Tensor(grid.loss.shape);
    const double ca = m.params[index_a], cb = m.params[index_b];
    for (int i = 0; i < resolution; ++i) {
        grid.a_values.push_back(ca - half_range + 2.0 * half_range * i / (resolution - 1));
        grid.b_values.push_back(cb - half_range + 2.0 * half_range * i / (resolution - 1));
    }
    std::vector<double> params = m.params;
    std::vector<double> ea(n, 0.0), eb(n, 0.0);
    for (int i = 0; i < resolution; ++i) {
        params[index_a] = grid.a_values[i];
        for (int j = 0; j < resolution; ++j) {
            params[index_b] = grid.b_values[j];
            grid.loss.at(i, j) = eval(lg.graph, params, lg.loss).data[0];
            ea[index_a] = 1.0;
            auto cola = nme_direct_impl(lg.graph, lg.output, batch, params, ea);
            ea[index_a] = 0.0;
            eb[index_b] = 1.0;
            auto colb = nme_direct_impl(lg.graph, lg.output, batch, params, eb);
            eb[index_b] = 0.0;
            const double n00 = cola[index_a], n10 = cola[index_b];
            const double n01 = colb[index_a], n11 = colb[index_b];
            grid.nme_norm.at(i, j) = std::sqrt(n00 * n00 + n10 * n10 + n01 * n01 + n11 * n11);
        }
    }
    return grid;
}

std::vector<double> eigenvalues_sym(const Tensor& mat) {
    const std::size_t n = mat.rows();
    Eigen::MatrixXd M(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) M(i, j) = mat.at(i, j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + n);
    return ev;
}

std::vector<double> eigenvalues_general(const Tensor& mat) {
    const std::size_t n = mat.rows();
    Eigen::MatrixXd M(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) M(i, j) = mat.at(i, j);
    Eigen::EigenSolver<Eigen::MatrixXd> es(M);
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = es.eigenvalues()[i].real();
    std::sort(ev.begin(), ev.end());
    return ev;
}

}  // namespace curvkit
