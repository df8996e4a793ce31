#include "doctest.h"

#include <cmath>
#include <limits>

#include "curvkit/curvature.hpp"
#include "curvkit/optim.hpp"
#include "oracles.hpp"

using namespace curvkit;
namespace oc = oracles;

namespace {

Objective scalar_quadratic(double h) { return quadratic_objective(Tensor({1, 1}, {h})); }

}  // namespace

TEST_SUITE("optim") {

TEST_CASE("sgd on a quadratic: hand-checked step and fixed point") {
    Objective o = scalar_quadratic(1.0);
    std::vector<double> theta{1.0};
    StepReport r = sgd_step(o, theta, 0.2);
    CHECK(theta[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(r.base_loss == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r.grad_norm == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r.grad_evals == 1);
    // zero gradient is a fixed point
    std::vector<double> z{0.0};
    sgd_step(o, z, 0.2);
    CHECK(z[0] == 0.0);
    CHECK_THROWS_AS(sgd_step(o, theta, 0.0), std::invalid_argument);
}

TEST_CASE("sgd drives a quadratic to its minimum") {
    Tensor H({2, 2}, {2.0, 0.5, 0.5, 1.0});
    Objective o = quadratic_objective(H);
    std::vector<double> theta{1.5, -2.0};
    for (int t = 0; t < 500; ++t) sgd_step(o, theta, 0.3);
    CHECK(std::abs(theta[0]) < 1e-12);
    CHECK(std::abs(theta[1]) < 1e-12);
}

TEST_CASE("gradient penalty: hand-checked steps, guard, rho = 0 reduction") {
    // H = [1]: g = theta, Hg = theta
    {
        Objective o = scalar_quadratic(1.0);
        std::vector<double> theta{1.0};
        StepReport r = grad_penalty_step(o, theta, 0.2, 0.1, 2);
        // dir = g + 2 rho H g = 1.2 -> theta = 1 - 0.24
        CHECK(theta[0] == doctest::Approx(0.76).epsilon(1e-15));
        CHECK(r.penalty_value == doctest::Approx(0.1).epsilon(1e-15));  // rho ||g||^2
        CHECK(r.penalty_term_norm == doctest::Approx(0.2).epsilon(1e-13));
    }
    {
        Objective o = scalar_quadratic(1.0);
        std::vector<double> theta{1.0};
        StepReport r = grad_penalty_step(o, theta, 0.2, 0.1, 1);
        // dir = g + rho H g / ||g|| = 1.1 -> theta = 1 - 0.22
        CHECK(theta[0] == doctest::Approx(0.78).epsilon(1e-15));
        CHECK(r.penalty_value == doctest::Approx(0.1).epsilon(1e-15));  // rho ||g||
        CHECK_FALSE(r.penalty_skipped);
    }
    {
        // p = 1 at a critical point: the normalized term is skipped, flagged
        Objective o = scalar_quadratic(1.0);
        std::vector<double> theta{0.0};
        StepReport r = grad_penalty_step(o, theta, 0.2, 0.1, 1);
        CHECK(r.penalty_skipped);
        CHECK(theta[0] == 0.0);
    }
    {
        // rho = 0 is plain sgd
        Objective o = scalar_quadratic(1.0);
        std::vector<double> a{0.7}, b{0.7};
        grad_penalty_step(o, a, 0.2, 0.0, 2);
        sgd_step(o, b, 0.2);
        CHECK(a[0] == b[0]);
    }
    CHECK_THROWS_AS(
        [] {
            Objective o = scalar_quadratic(1.0);
            std::vector<double> t{1.0};
            grad_penalty_step(o, t, 0.1, 0.1, 3);
        }(),
        std::invalid_argument);
}

TEST_CASE("weight noise: sigma2 = 0 reduction and unbiased mean update") {
    Tensor H({2, 2}, {1.0, 0.0, 0.0, 3.0});
    Objective o = quadratic_objective(H);
    {
        std::vector<double> a{1.0, -2.0}, b{1.0, -2.0};
        StepReport r = weight_noise_step(o, a, 0.1, 0.0, 5);
        sgd_step(o, b, 0.1);
        CHECK(a == b);
        CHECK(r.grad_evals == 1);
    }
    // on a quadratic, E[grad(theta + eps)] = H theta: the mean update over
    // seeds matches the noiseless step
    const double lr = 0.1, sigma2 = 0.01;
    const int n = 2000;
    double m0 = 0.0, m1 = 0.0;
    for (int s = 0; s < n; ++s) {
        std::vector<double> theta{1.0, -2.0};
        StepReport r = weight_noise_step(o, theta, lr, sigma2, 100 + s);
        CHECK(r.grad_evals == 2);
        m0 += theta[0];
        m1 += theta[1];
    }
    m0 /= n;
    m1 /= n;
    // noiseless step: theta - lr H theta = (0.9, -1.4)
    CHECK(std::abs(m0 - 0.9) < 5e-3);
    CHECK(std::abs(m1 + 1.4) < 5e-3);
}

TEST_CASE("hessian-trace penalty: exact on quadratics, FD-checked on a net") {
    Tensor H({2, 2}, {1.0, 0.0, 0.0, 3.0});
    Objective o = quadratic_objective(H);
    {
        // constant Hessian: the penalty gradient vanishes identically, so the
        // update must equal plain sgd bit for bit
        std::vector<double> a{1.0, -2.0}, b{1.0, -2.0};
        StepReport r = hessian_trace_penalty_step(o, a, 0.1, 1.0, 500, 7);
        sgd_step(o, b, 0.1);
        CHECK(a == b);
        CHECK(r.penalty_term_norm == 0.0);
        // penalty value is the Hutchinson estimate of sigma2 tr(H) = 4
        CHECK(std::abs(r.penalty_value - 4.0) < 1.0);
    }
    // on a tanh net the penalty direction must be the exact gradient of
    // eps^T H(theta) eps for the probes the step drew
    Model m = make_model({2, 3, 2}, {ActivationKind::Tanh, 1.0}, 3);
    Batch b = oc::random_batch(LossKind::Mse, 2, 2, 3, 5);
    Objective om = model_objective(m, b);
    const std::uint64_t seed = 11;
    const double sigma2 = 0.5, lr = 0.05;
    std::vector<double> theta0 = m.params, theta = m.params;
    hessian_trace_penalty_step(om, theta, lr, sigma2, 1, seed);
    auto g = grad(om.graph, om.loss, theta0);
    // recover the penalty part of the direction from the parameter delta
    std::vector<double> pdir(theta0.size());
    for (std::size_t j = 0; j < pdir.size(); ++j)
        pdir[j] = (theta0[j] - theta[j]) / lr - g[j];
    // reproduce the probe (stream 0, counter j) and finite-difference
    // q(theta) = eps^T H(theta) eps
    CounterRng rng(seed);
    std::vector<double> eps(theta0.size());
    for (std::size_t j = 0; j < eps.size(); ++j) eps[j] = rng.normal(0, j);
    auto q = [&](const std::vector<double>& th) {
        auto he = hvp(om.graph, om.loss, th, eps);
        return kernels::dot(eps.data(), he.data(), eps.size());
    };
    const double delta = 1e-5;
    for (std::size_t j = 0; j < theta0.size(); ++j) {
        auto tp = theta0, tm = theta0;
        tp[j] += delta;
        tm[j] -= delta;
        const double want = sigma2 * (q(tp) - q(tm)) / (2 * delta);
        CHECK(pdir[j] == doctest::Approx(want).epsilon(1e-5).scale(1.0));
    }
}

TEST_CASE("SAM and USAM: hand-checked perturbations") {
    {
        // normalized: ascent point theta + rho g/||g||
        Objective o = scalar_quadratic(1.0);
        std::vector<double> theta{2.0};
        StepReport r = sam_step(o, theta, 0.1, 0.5, true);
        CHECK(theta[0] == doctest::Approx(2.0 - 0.1 * 2.5).epsilon(1e-15));
        CHECK(r.grad_evals == 2);
        CHECK(r.penalty_value == doctest::Approx(0.5 * 2.0).epsilon(1e-15));  // rho ||g||
    }
    {
        // unnormalized: ascent point theta + rho g
        Objective o = scalar_quadratic(1.0);
        std::vector<double> theta{2.0};
        StepReport r = sam_step(o, theta, 0.1, 0.5, false);
        CHECK(theta[0] == doctest::Approx(2.0 - 0.1 * 3.0).epsilon(1e-15));
        CHECK(r.penalty_value == doctest::Approx(0.25 * 4.0).epsilon(1e-15));  // rho/2 ||g||^2
    }
    {
        // normalization guard at a critical point
        Objective o = scalar_quadratic(1.0);
        std::vector<double> theta{0.0};
        StepReport r = sam_step(o, theta, 0.1, 0.5, true);
        CHECK(r.penalty_skipped);
        CHECK(r.grad_evals == 1);
    }
    {
        // rho = 0 is plain sgd
        Objective o = scalar_quadratic(1.0);
        std::vector<double> a{0.7}, b{0.7};
        sam_step(o, a, 0.2, 0.0, true);
        sgd_step(o, b, 0.2);
        CHECK(a[0] == b[0]);
    }
}

TEST_CASE("GN-trace penalty: reductions and loss restrictions") {
    Model m = make_model({2, 4, 3}, {ActivationKind::Gelu, 1.0}, 13);
    Batch b = oc::random_batch(LossKind::CrossEntropy, 2, 3, 4, 15);
    {
        Model a = m, c = m;
        gn_trace_penalty_step(a, b, 0.1, 0.0, 1, 17);
        sgd_step(c, b, 0.1);
        CHECK(a.params == c.params);
    }
    {
        // nonzero penalty changes the step; straight-through changes it again
        Model a = m, c = m, d = m;
        sgd_step(a, b, 0.1);
        gn_trace_penalty_step(c, b, 0.1, 0.05, 2, 17, false);
        gn_trace_penalty_step(d, b, 0.1, 0.05, 2, 17, true);
        CHECK(a.params != c.params);
        CHECK(c.params != d.params);
    }
    Batch bm = oc::random_batch(LossKind::Mse, 2, 3, 4, 15);
    Model mm = m;
    CHECK_THROWS_AS(gn_trace_penalty_step(mm, bm, 0.1, 0.1, 1, 1), std::invalid_argument);
}

TEST_CASE("regularized_step dispatches every kind; strings round-trip") {
    Model base = make_model({2, 4, 2}, {ActivationKind::Gelu, 1.0}, 19);
    Batch ce = oc::random_batch(LossKind::CrossEntropy, 2, 2, 4, 21);
    for (RegKind k : {RegKind::None, RegKind::GradPenaltyP1, RegKind::GradPenaltyP2,
                      RegKind::WeightNoise, RegKind::HessianTrace, RegKind::GnTrace,
                      RegKind::Sam, RegKind::Usam}) {
        CHECK(reg_kind_from_string(to_string(k)) == k);
        Model m = base;
        RegularizerSpec spec;
        spec.kind = k;
        spec.rho = 0.05;
        spec.sigma2 = 0.01;
        StepReport r = regularized_step(m, ce, spec, 0.1, 23);
        CHECK(std::isfinite(r.base_loss));
        CHECK(m.params != base.params);
        for (double p : m.params) CHECK(std::isfinite(p));
    }
    CHECK_THROWS_AS(reg_kind_from_string("dropout"), std::invalid_argument);
}

TEST_CASE("non-finite gradients abort the step") {
    Objective o = scalar_quadratic(1.0);
    std::vector<double> theta{std::numeric_limits<double>::quiet_NaN()};
    CHECK_THROWS(sgd_step(o, theta, 0.1));
}

}  // TEST_SUITE
