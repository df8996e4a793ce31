#include "curvkit/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <span>
#include <sstream>

#include "curvkit/curvature.hpp"
#include "curvkit/data.hpp"
#include "curvkit/harness.hpp"
#include "curvkit/optim.hpp"
#include "curvkit/quadratic.hpp"
#include "curvkit/rng.hpp"
#include "json.hpp"

namespace curvkit {

namespace {

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(3);
    os << x;
    return os.str();
}

std::vector<double> random_vec(std::size_t n, std::uint64_t seed, std::uint64_t stream) {
    CounterRng rng(seed);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = rng.normal(stream, i);
    return v;
}

Batch random_batch(LossKind loss, std::size_t d, std::size_t k, std::size_t B,
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
            const int y = static_cast<int>(rng.uniform(2, c) * k);
            b.labels.push_back(std::min<int>(y, static_cast<int>(k) - 1));
            b.targets.at(b.labels.back(), c) = 1.0;
        }
    }
    return b;
}

const std::vector<ActivationSpec>& all_activations() {
    static const std::vector<ActivationSpec> kActs = {
        {ActivationKind::Relu, 1.0},          {ActivationKind::Gelu, 1.0},
        {ActivationKind::BetaGelu, 2.0},      {ActivationKind::AugmentedRelu, 2.0},
        {ActivationKind::DiminishedGelu, 1.0}, {ActivationKind::Tanh, 1.0},
    };
    return kActs;
}

double min_abs_preactivation(const Model& m, const Tensor& X) {
    ForwardCache c = model_forward(m, X);
    double mn = std::numeric_limits<double>::infinity();
    for (const auto& h : c.h)
        for (double v : h.data) mn = std::min(mn, std::abs(v));
    return mn;
}

// ---- criteria ----

CriterionResult c1_decomposition() {
    CriterionResult r{1, "decomposition identity H = GN + NME", true, true, ""};
    int triples = 0;
    double worst = 0.0;
    for (const auto& act : all_activations())
        for (LossKind loss : {LossKind::Mse, LossKind::CrossEntropy})
            for (std::uint64_t s = 0; s < 5; ++s) {
                const std::uint64_t seed = 100 * s + 17 * static_cast<int>(act.kind) +
                                           (loss == LossKind::Mse ? 0 : 7);
                Model m = make_model({2, 6, 5, 3}, act, seed);
                Batch b = random_batch(loss, 2, 3, 4, seed + 1);
                CurvatureOperator op(CurvatureKind::Hessian, m, b);
                auto v = random_vec(op.dim(), seed + 2, 3);
                auto h = op.hessian_vp(v);
                auto g = op.gauss_newton_vp(v);
                auto nm = op.nme_vp_direct(v);
                double resid = 0.0;
                for (std::size_t i = 0; i < h.size(); ++i) {
                    const double d = h[i] - g[i] - nm[i];
                    resid += d * d;
                }
                resid = std::sqrt(resid);
                const double bound = 1e-6 * (1.0 + norm2(h));
                worst = std::max(worst, resid / bound);
                if (resid > bound) r.pass = false;
                ++triples;
            }
    r.detail = std::to_string(triples) + " triples, worst residual/bound = " + fmt(worst);
    return r;
}

CriterionResult c2_finite_differences() {
    CriterionResult r{2, "finite-difference gradient and HVP suite", true, true, ""};
    const double eps = 1e-5;
    int grad_checks = 0, hvp_checks = 0;
    double worst_g = 0.0, worst_h = 0.0;
    for (const auto& act : all_activations()) {
        const bool kinked = act.kind == ActivationKind::Relu ||
                            act.kind == ActivationKind::AugmentedRelu;
        const bool hvp_fd_valid = act.kind == ActivationKind::Relu ||
                                  act.kind == ActivationKind::Gelu ||
                                  act.kind == ActivationKind::BetaGelu ||
                                  act.kind == ActivationKind::Tanh;
        for (LossKind loss : {LossKind::Mse, LossKind::CrossEntropy}) {
            for (std::uint64_t s = 0; s < 20; ++s) {
                std::uint64_t seed = 1000 + 50 * s + 3 * static_cast<int>(act.kind) +
                                     (loss == LossKind::Mse ? 0 : 1);
                Model m = make_model({2, 8, 8, 2}, act, seed);
                Batch b = random_batch(loss, 2, 2, 4, seed + 1);
                // central differences straddling a ReLU kink are meaningless;
                // resample until preactivations clear the step width
                int tries = 0;
                while (kinked && min_abs_preactivation(m, b.inputs) < 1e-3 && tries < 50) {
                    seed += 100000;
                    m = make_model({2, 8, 8, 2}, act, seed);
                    b = random_batch(loss, 2, 2, 4, seed + 1);
                    ++tries;
                }
                LossGraph lg = build_loss_graph(m, b);
                auto g = grad(lg.graph, lg.loss, m.params);
                std::vector<double> th = m.params;
                std::vector<double> gfd(th.size());
                for (std::size_t j = 0; j < th.size(); ++j) {
                    th[j] += eps;
                    const double lp = eval(lg.graph, th, lg.loss).data[0];
                    th[j] -= 2 * eps;
                    const double lm = eval(lg.graph, th, lg.loss).data[0];
                    th[j] += eps;
                    gfd[j] = (lp - lm) / (2 * eps);
                }
                double dg = 0.0;
                for (std::size_t j = 0; j < g.size(); ++j) dg += (g[j] - gfd[j]) * (g[j] - gfd[j]);
                dg = std::sqrt(dg);
                const double gb = 1e-6 * (1.0 + norm2(g));
                worst_g = std::max(worst_g, dg / gb);
                if (dg > gb) r.pass = false;
                ++grad_checks;

                if (!hvp_fd_valid) continue;
                auto v = random_vec(th.size(), seed + 2, 9);
                auto hv = hvp(lg.graph, lg.loss, m.params, v);
                std::vector<double> thp = m.params, thm = m.params;
                for (std::size_t j = 0; j < th.size(); ++j) {
                    thp[j] += eps * v[j];
                    thm[j] -= eps * v[j];
                }
                auto gp = grad(lg.graph, lg.loss, thp);
                auto gm = grad(lg.graph, lg.loss, thm);
                double dh = 0.0;
                for (std::size_t j = 0; j < hv.size(); ++j) {
                    const double fd = (gp[j] - gm[j]) / (2 * eps);
                    dh += (hv[j] - fd) * (hv[j] - fd);
                }
                dh = std::sqrt(dh);
                const double hb = 1e-5 * (1.0 + norm2(hv));
                worst_h = std::max(worst_h, dh / hb);
                if (dh > hb) r.pass = false;
                ++hvp_checks;
            }
        }
    }
    r.detail = std::to_string(grad_checks) + " grad checks (worst/bound " + fmt(worst_g) +
               "), " + std::to_string(hvp_checks) + " hvp checks (worst/bound " + fmt(worst_h) +
               ")";
    return r;
}

CriterionResult c3_analytic_second_derivative() {
    CriterionResult r{3, "closed-form model second derivative vs AD", true, true, ""};
    double worst = 0.0;
    int cases = 0;
    const std::vector<std::vector<std::size_t>> archs = {{3, 4, 2}, {2, 4, 3, 2}};
    const std::vector<ActivationSpec> acts = {{ActivationKind::Gelu, 1.0},
                                              {ActivationKind::BetaGelu, 3.0}};
    for (const auto& widths : archs)
        for (const auto& act : acts) {
            Model m = make_model(widths, act, 31 + widths.size());
            CounterRng rng(91 + widths.size());
            Tensor x({widths.front(), 1});
            for (std::size_t i = 0; i < x.size(); ++i) x.data[i] = rng.normal(0, i);
            Recording rec = record_forward(m, x);
            const std::size_t L = m.depth();
            for (std::size_t l = 0; l < L; ++l)
                for (std::size_t mm = l; mm < L; ++mm) {
                    Tensor A({m.widths[l + 1], m.widths[l]});
                    Tensor B({m.widths[mm + 1], m.widths[mm]});
                    for (std::size_t i = 0; i < A.size(); ++i) A.data[i] = rng.normal(1, i);
                    for (std::size_t i = 0; i < B.size(); ++i) B.data[i] = rng.normal(2, i);
                    std::vector<double> u(m.param_count(), 0.0), v(m.param_count(), 0.0);
                    for (std::size_t i = 0; i < A.rows(); ++i)
                        for (std::size_t j = 0; j < A.cols(); ++j)
                            u[m.weight_index(l, i, j)] = A.at(i, j);
                    for (std::size_t i = 0; i < B.rows(); ++i)
                        for (std::size_t j = 0; j < B.cols(); ++j)
                            v[m.weight_index(mm, i, j)] = B.at(i, j);
                    Tensor ad = output_second_derivative(rec.graph, rec.output, m.params, u, v);
                    Tensor cf = analytic_second_derivative(m, x, l, mm, A, B);
                    double d = 0.0, scale = 0.0;
                    for (std::size_t i = 0; i < cf.size(); ++i) {
                        d = std::max(d, std::abs(cf.data[i] - ad.data[i]));
                        scale = std::max(scale, std::abs(ad.data[i]));
                    }
                    const double bound = 1e-6 * (1.0 + scale);
                    worst = std::max(worst, d / bound);
                    if (d > bound) r.pass = false;
                    ++cases;
                }
        }
    // phi'' == 0 variant: the all-phi'' diagonal case must vanish exactly
    Model md = make_model({2, 4, 3, 2}, {ActivationKind::DiminishedGelu, 1.0}, 5);
    Tensor x({2, 1}, {0.3, -0.8});
    for (std::size_t l = 0; l < md.depth(); ++l) {
        Tensor A({md.widths[l + 1], md.widths[l]});
        Tensor B = A;
        for (std::size_t i = 0; i < A.size(); ++i) {
            A.data[i] = 0.5 + 0.1 * i;
            B.data[i] = -0.3 + 0.07 * i;
        }
        Tensor cf = analytic_second_derivative(md, x, l, l, A, B);
        Recording rec = record_forward(md, x);
        std::vector<double> u(md.param_count(), 0.0), v(md.param_count(), 0.0);
        for (std::size_t i = 0; i < A.rows(); ++i)
            for (std::size_t j = 0; j < A.cols(); ++j) {
                u[md.weight_index(l, i, j)] = A.at(i, j);
                v[md.weight_index(l, i, j)] = B.at(i, j);
            }
        Tensor ad = output_second_derivative(rec.graph, rec.output, md.params, u, v);
        for (std::size_t i = 0; i < cf.size(); ++i)
            if (cf.data[i] != 0.0 || ad.data[i] != 0.0) r.pass = false;
        ++cases;
    }
    r.detail = std::to_string(cases) + " (l,m) cases, worst residual/bound = " + fmt(worst);
    return r;
}

CriterionResult c4_fisher_check() {
    CriterionResult r{4, "sampled-label mean Hessian recovers GN (MSE)", true, true, ""};
    Model m = make_model({2, 4, 2}, {ActivationKind::Gelu, 1.0}, 11);
    Batch b = random_batch(LossKind::Mse, 2, 2, 3, 12);
    FisherReport rep = fisher_check(m, b, 10000, 21);
    r.pass = rep.max_deviation_over_stderr <= 4.0;
    r.detail = "max |dev|/stderr = " + fmt(rep.max_deviation_over_stderr) +
               ", max |dev| = " + fmt(rep.max_abs_deviation) + " at n=" +
               std::to_string(rep.n_samples);
    return r;
}

CriterionResult c5_trace_estimators() {
    CriterionResult r{5, "Hutchinson and sampled-label trace estimators", true, true, ""};
    Model m = make_model({2, 5, 3}, {ActivationKind::Gelu, 1.0}, 41);
    Batch b = random_batch(LossKind::CrossEntropy, 2, 3, 6, 42);
    CurvatureOperator h(CurvatureKind::Hessian, m, b);
    CurvatureOperator gn(CurvatureKind::GaussNewton, m, b);
    double tr_h = 0.0, tr_gn = 0.0;
    {
        Tensor H = full_matrix(h), G = full_matrix(gn);
        for (std::size_t i = 0; i < H.rows(); ++i) {
            tr_h += H.at(i, i);
            tr_gn += G.at(i, i);
        }
    }
    std::ostringstream detail;
    auto th = hutchinson_trace(h, 10000, 7);
    if (std::abs(th.estimate - tr_h) > 3.0 * th.stderr_) r.pass = false;
    detail << "hutchinson dev/se " << fmt(std::abs(th.estimate - tr_h) / th.stderr_);
    auto tg = gn_trace_sampled(m, b, 10000, 8);
    if (std::abs(tg.estimate - tr_gn) > 3.0 * tg.stderr_) r.pass = false;
    detail << ", gn-sampled dev/se " << fmt(std::abs(tg.estimate - tr_gn) / tg.stderr_);
    // single-sample unbiasedness: independent n=1 runs averaged
    double mean = 0.0, m2 = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const double x = hutchinson_trace(h, 1, 10000 + i).estimate;
        const double d = x - mean;
        mean += d / (i + 1);
        m2 += d * (x - mean);
    }
    const double se1 = std::sqrt(m2 / (n - 1) / n);
    if (std::abs(mean - tr_h) > 3.0 * se1) r.pass = false;
    detail << ", single-sample-avg dev/se " << fmt(std::abs(mean - tr_h) / se1);
    r.detail = detail.str();
    return r;
}

CriterionResult c6_nme_vanishes_at_interpolation() {
    CriterionResult r{6, "NME vanishes at an interpolating minimum", true, true, ""};
    Model teacher = make_model({2, 4, 2}, {ActivationKind::Tanh, 1.0}, 61);
    Dataset ds = make_teacher_dataset(teacher, 10, 62);
    Batch b = full_batch(ds);
    Model student = teacher;
    {
        CounterRng rng(63);
        for (std::size_t i = 0; i < student.params.size(); ++i)
            student.params[i] += 1e-4 * rng.normal(0, i);
    }
    Objective o = model_objective(student, b);
    double lr = 0.5, last = std::numeric_limits<double>::infinity();
    double loss = last;
    for (int t = 0; t < 200000 && loss > 1e-16; ++t) {
        StepReport rep = sgd_step(o, student.params, lr);
        loss = rep.base_loss;
        if (loss > last) lr *= 0.5;
        last = loss;
    }
    if (loss >= 1e-12) {
        r.pass = false;
        r.detail = "did not reach interpolation: loss = " + fmt(loss);
        return r;
    }
    CurvatureOperator nme(CurvatureKind::Nme, student, b);
    CurvatureOperator gn(CurvatureKind::GaussNewton, student, b);
    Tensor N = full_matrix(nme), G = full_matrix(gn);
    double nf = 0.0, gf = 0.0;
    for (std::size_t i = 0; i < N.size(); ++i) {
        nf += N.data[i] * N.data[i];
        gf += G.data[i] * G.data[i];
    }
    const double ratio = std::sqrt(nf) / std::sqrt(gf);
    r.pass = ratio < 1e-5;
    r.detail = "loss " + fmt(loss) + ", ||NME||_F/||GN||_F = " + fmt(ratio);
    return r;
}

bool spectra_match(std::vector<double> a, std::vector<double> b, double rtol,
                   double& worst) {
    std::sort(a.begin(), a.end(), std::greater<>());
    std::sort(b.begin(), b.end(), std::greater<>());
    double scale = 1e-300;
    if (!a.empty()) scale = std::max(scale, std::abs(a.front()));
    if (!b.empty()) scale = std::max(scale, std::abs(b.front()));
    const double zero_tol = 1e-8 * scale;
    auto nonzero = [&](std::vector<double>& v) {
        v.erase(std::remove_if(v.begin(), v.end(),
                               [&](double x) { return std::abs(x) <= zero_tol; }),
                v.end());
    };
    nonzero(a);
    nonzero(b);
    if (a.size() != b.size()) return false;
    bool ok = true;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = std::abs(a[i] - b[i]) / (rtol * scale);
        worst = std::max(worst, d);
        if (d > 1.0) ok = false;
    }
    return ok;
}

CriterionResult c7_ntk_gn_spectral_link() {
    CriterionResult r{7, "NTK * H_z shares its nonzero spectrum with GN", true, true, ""};
    double worst = 0.0;
    for (LossKind loss : {LossKind::Mse, LossKind::CrossEntropy}) {
        for (std::size_t D : {5ul, 12ul}) {
            Model m = make_model({2, 5, 3}, {ActivationKind::Gelu, 1.0}, 71 + D);
            Batch b = random_batch(loss, 2, 3, D, 72 + D);
            NTKMatrix theta = ntk(m, b);
            Tensor Hz = output_hessian_blockdiag(m, b);
            const std::size_t n = theta.mat.rows();
            Tensor P({n, n});
            kernels::matmul(theta.mat.data.data(), Hz.data.data(), P.data.data(), n, n, n,
                            false);
            auto left = eigenvalues_general(P);
            CurvatureOperator gn(CurvatureKind::GaussNewton, m, b);
            auto right = eigenvalues_sym(full_matrix(gn));
            if (!spectra_match(left, right, 1e-8, worst)) r.pass = false;
        }
    }
    r.detail = "MSE and CE at D in {5,12}, worst |dl-dr|/(rtol*scale) = " + fmt(worst);
    return r;
}

CriterionResult c8_quadratic_exactness() {
    CriterionResult r{8, "quadratic-dynamics closed form", true, true, ""};
    const std::vector<double> lambdas = {0.5, 1.0, 2.0};
    const double alpha = 0.05, rho = 0.1;
    Tensor H({3, 3});
    for (std::size_t i = 0; i < 3; ++i) H.at(i, i) = lambdas[i];
    QuadraticProblem p{lambdas, {1.0, 1.0, 1.0}, alpha, rho};
    auto traj = evolve(p, 100);
    Objective o = quadratic_objective(H);
    std::vector<double> th_usam = {1.0, 1.0, 1.0};
    std::vector<double> th_pen = {1.0, 1.0, 1.0};
    double worst = 0.0;
    for (int t = 1; t <= 100; ++t) {
        sam_step(o, th_usam, alpha, rho, false);
        grad_penalty_step(o, th_pen, alpha, rho / 2.0, 2);
        for (std::size_t i = 0; i < 3; ++i) {
            worst = std::max(worst, std::abs(th_usam[i] - traj[t][i]));
            worst = std::max(worst, std::abs(th_pen[i] - traj[t][i]));
        }
    }
    if (worst > 1e-12) r.pass = false;
    double worst_res = 0.0;
    for (double al : {0.01, 0.1, 1.0}) {
        const double a = 0.1, l = al / a;
        const double expect = a * a * a * l * l * l + 0.25 * a * a * a * a * l * l * l * l;
        const double res = step_doubling_residual(l, a);
        worst_res = std::max(worst_res, std::abs(res - expect) / std::abs(expect));
    }
    if (worst_res > 1e-14) r.pass = false;
    r.detail = "max trajectory deviation " + fmt(worst) + ", step-doubling rel err " +
               fmt(worst_res);
    return r;
}

CriterionResult c9_beta_gelu_structure() {
    CriterionResult r{9, "beta-GELU limit, curvature integral, peak value", true, true, ""};
    double worst_lim = 0.0;
    for (double x = 0.5; x <= 5.0; x += 0.25)
        for (double sx : {x, -x}) {
            const double bg = activation_eval({ActivationKind::BetaGelu, 100.0}, sx, 0);
            const double re = activation_eval({ActivationKind::Relu, 1.0}, sx, 0);
            worst_lim = std::max(worst_lim, std::abs(bg - re));
        }
    if (worst_lim > 1e-8) r.pass = false;
    double worst_int = 0.0;
    for (double beta : {1.0, 4.0, 16.0}) {
        const double a = -10.0 / beta, bnd = 10.0 / beta;
        const int n = 20000;  // Simpson, even panel count
        const double hstep = (bnd - a) / n;
        double s = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double x = a + i * hstep;
            const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
            s += w * activation_eval({ActivationKind::BetaGelu, beta}, x, 2);
        }
        s *= hstep / 3.0;
        worst_int = std::max(worst_int, std::abs(s - 1.0));
    }
    if (worst_int > 1e-3) r.pass = false;
    double worst_peak = 0.0;
    for (double beta : {1.0, 2.0, 16.0}) {
        const double expect = 2.0 * beta / std::sqrt(2.0 * std::numbers::pi);
        const double got = activation_eval({ActivationKind::BetaGelu, beta}, 0.0, 2);
        worst_peak = std::max(worst_peak, std::abs(got - expect));
    }
    if (worst_peak > 1e-12) r.pass = false;
    r.detail = "limit gap " + fmt(worst_lim) + ", integral gap " + fmt(worst_int) +
               ", peak gap " + fmt(worst_peak);
    return r;
}

CriterionResult c10_override_semantics() {
    CriterionResult r{10, "second-derivative overrides: locality and NME blocks", true, true,
                      ""};
    const std::vector<std::size_t> widths = {2, 4, 3, 2};
    Batch b = random_batch(LossKind::Mse, 2, 2, 3, 101);
    std::ostringstream detail;

    // diminished GELU: same-layer diagonal NME blocks exactly zero
    {
        Model m = make_model(widths, {ActivationKind::DiminishedGelu, 1.0}, 102);
        CurvatureOperator op(CurvatureKind::Nme, m, b);
        std::vector<double> e(op.dim(), 0.0);
        double max_same = 0.0;
        for (std::size_t l = 0; l < m.depth(); ++l) {
            const std::size_t off = m.weight_offset(l);
            const std::size_t nw = m.widths[l + 1] * m.widths[l];
            for (std::size_t i = 0; i < nw; ++i) {
                e[off + i] = 1.0;
                auto col = op.nme_vp_direct(e);
                e[off + i] = 0.0;
                for (std::size_t j = 0; j < nw; ++j)
                    max_same = std::max(max_same, std::abs(col[off + j]));
            }
        }
        if (max_same != 0.0) r.pass = false;
        detail << "diminished same-layer max " << max_same;
    }
    // augmented ReLU: nonzero same-layer blocks when preactivations sit
    // inside the bump width 3/beta
    {
        const double beta = 2.0;
        Model m = make_model(widths, {ActivationKind::AugmentedRelu, beta}, 102);
        if (min_abs_preactivation(m, b.inputs) >= 3.0 / beta) {
            r.pass = false;
            detail << "; augmented precondition unmet";
        }
        CurvatureOperator op(CurvatureKind::Nme, m, b);
        std::vector<double> e(op.dim(), 0.0);
        double max_same = 0.0;
        for (std::size_t l = 0; l < m.depth(); ++l) {
            const std::size_t off = m.weight_offset(l);
            const std::size_t nw = m.widths[l + 1] * m.widths[l];
            for (std::size_t i = 0; i < nw; ++i) {
                e[off + i] = 1.0;
                auto col = op.nme_vp_direct(e);
                e[off + i] = 0.0;
                for (std::size_t j = 0; j < nw; ++j)
                    max_same = std::max(max_same, std::abs(col[off + j]));
            }
        }
        if (max_same <= 0.0) r.pass = false;
        detail << "; augmented same-layer max " << fmt(max_same);
    }
    // overrides leave forward values bit-exact and first-order gradients alone
    {
        Model base = make_model(widths, {ActivationKind::Gelu, 1.0}, 103);
        Model dim = base;
        dim.activation = {ActivationKind::DiminishedGelu, 1.0};
        Tensor za = model_forward(base, b.inputs).z;
        Tensor zb = model_forward(dim, b.inputs).z;
        for (std::size_t i = 0; i < za.size(); ++i)
            if (za.data[i] != zb.data[i]) r.pass = false;
        LossGraph la = build_loss_graph(base, b), lb = build_loss_graph(dim, b);
        auto ga = grad(la.graph, la.loss, base.params);
        auto gb = grad(lb.graph, lb.loss, dim.params);
        double d = 0.0;
        for (std::size_t i = 0; i < ga.size(); ++i) d = std::max(d, std::abs(ga[i] - gb[i]));
        if (d > 1e-12 * (1.0 + norm2(ga))) r.pass = false;

        Model mr = make_model(widths, {ActivationKind::Relu, 1.0}, 104);
        Model ma = mr;
        ma.activation = {ActivationKind::AugmentedRelu, 2.0};
        Tensor zr = model_forward(mr, b.inputs).z;
        Tensor zaug = model_forward(ma, b.inputs).z;
        for (std::size_t i = 0; i < zr.size(); ++i)
            if (zr.data[i] != zaug.data[i]) r.pass = false;
        detail << "; forward bit-exact, grad gap " << fmt(d);
    }
    r.detail = detail.str();
    return r;
}

CriterionResult c11_qualitative_smoke(const std::string& scratch) {
    CriterionResult r{11, "qualitative smoke", true, false, ""};
    std::ostringstream detail;
    // (a) scan census shrinks as beta doubles
    {
        Batch b = random_batch(LossKind::Mse, 2, 1, 16, 111);
        std::vector<double> census;
        for (double beta : {1.0, 2.0, 4.0, 8.0, 16.0}) {
            Model m = make_model({2, 16, 16, 1}, {ActivationKind::BetaGelu, beta}, 112);
            ScanGrid grid = nme_scan(m, b, m.weight_index(1, 2, 3), m.weight_index(1, 7, 11),
                                     2.0, 21);
            std::size_t hot = 0;
            for (double v : grid.nme_norm.data)
                if (v > 1e-3) ++hot;
            census.push_back(static_cast<double>(hot) / grid.nme_norm.size());
        }
        bool mono = census.back() < census.front();
        for (std::size_t i = 1; i < census.size(); ++i)
            if (census[i] > census[i - 1] + 1e-12) mono = false;
        if (!mono) r.pass = false;
        detail << "census(beta 1->16):";
        for (double c : census) detail << " " << fmt(c);
    }
    // (b) sharper activations give noisier penalty HVPs
    {
        Dataset ds = make_synthetic(SyntheticKind::Blobs, 256, 2, 2, 113);
        auto run_var = [&](double beta) {
            Model m = make_model({2, 64, 64, 2}, {ActivationKind::BetaGelu, beta}, 114);
            double mean = 0.0, m2 = 0.0;
            int n = 0;
            for (int epoch = 0; epoch < 4; ++epoch)
                for (std::size_t b0 = 0; b0 + 32 <= ds.train_idx.size(); b0 += 32) {
                    std::vector<std::size_t> idx(ds.train_idx.begin() + b0,
                                                 ds.train_idx.begin() + b0 + 32);
                    Batch batch = make_batch(ds, idx);
                    StepReport rep = grad_penalty_step(m, batch, 0.05, 0.05, 1);
                    const double x = rep.penalty_term_norm;
                    ++n;
                    const double d = x - mean;
                    mean += d / n;
                    m2 += d * (x - mean);
                }
            return m2 / (n - 1);
        };
        const double v1 = run_var(1.0), v16 = run_var(16.0);
        if (!(v16 > v1)) r.pass = false;
        detail << "; penalty-norm variance beta=1: " << fmt(v1) << ", beta=16: " << fmt(v16);
    }
    std::filesystem::create_directories(scratch);
    std::ofstream(scratch + "/smoke.txt") << detail.str() << "\n";
    r.detail = detail.str();
    return r;
}

CriterionResult c12_reproducibility(const std::string& scratch) {
    CriterionResult r{12, "bit-for-bit run reproducibility", true, true, ""};
    RunConfig cfg;
    cfg.widths = {2, 8, 8, 2};
    cfg.activation = {ActivationKind::Gelu, 1.0};
    cfg.dataset = "blobs";
    cfg.n = 128;
    cfg.d = 2;
    cfg.k = 2;
    cfg.loss = LossKind::CrossEntropy;
    cfg.reg.kind = RegKind::WeightNoise;
    cfg.reg.sigma2 = 0.01;
    cfg.lr = 0.05;
    cfg.schedule = LrSchedule::Cosine;
    cfg.epochs = 2;
    cfg.batch_size = 32;
    cfg.seed = 7;
    auto slurp = [](const std::string& p) {
        std::ifstream f(p, std::ios::binary);
        std::ostringstream os;
        os << f.rdbuf();
        return os.str();
    };
    RunConfig a = cfg, bcfg = cfg;
    a.out_dir = scratch + "/rep_a";
    bcfg.out_dir = scratch + "/rep_b";
    train(a);
    train(bcfg);
    std::ostringstream detail;
    for (const char* name : {"steps.csv", "epochs.csv", "checkpoint.json"}) {
        const bool same = slurp(a.out_dir + "/" + name) == slurp(bcfg.out_dir + "/" + name);
        if (!same) r.pass = false;
        detail << name << (same ? " ok" : " DIFFERS") << "; ";
    }
    nlohmann::json sa, sb;
    std::ifstream(a.out_dir + "/summary.json") >> sa;
    std::ifstream(bcfg.out_dir + "/summary.json") >> sb;
    sa.erase("wall_time_sec");
    sb.erase("wall_time_sec");
    const bool same = sa == sb;
    if (!same) r.pass = false;
    detail << "summary.json (sans wall time)" << (same ? " ok" : " DIFFERS");
    r.detail = detail.str();
    return r;
}

}  // namespace

std::vector<CriterionResult> run_acceptance(const std::string& scratch_dir) {
    std::vector<CriterionResult> out;
    out.push_back(c1_decomposition());
    out.push_back(c2_finite_differences());
    out.push_back(c3_analytic_second_derivative());
    out.push_back(c4_fisher_check());
    out.push_back(c5_trace_estimators());
    out.push_back(c6_nme_vanishes_at_interpolation());
    out.push_back(c7_ntk_gn_spectral_link());
    out.push_back(c8_quadratic_exactness());
    out.push_back(c9_beta_gelu_structure());
    out.push_back(c10_override_semantics());
    out.push_back(c11_qualitative_smoke(scratch_dir));
    out.push_back(c12_reproducibility(scratch_dir));
    return out;
}

bool print_acceptance(const std::vector<CriterionResult>& results) {
    bool ok = true;
    for (const auto& r : results) {
        std::printf("criterion %2d [%s]%s %s — %s\n", r.index, r.pass ? "PASS" : "FAIL",
                    r.gating ? "" : " (non-gating)", r.name.c_str(), r.detail.c_str());
        if (r.gating && !r.pass) ok = false;
    }
    std::printf("acceptance: %s\n", ok ? "PASS" : "FAIL");
    return ok;
}

}  // namespace curvkit
