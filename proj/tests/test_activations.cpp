#include "doctest.h"

#include <cmath>
#include <numbers>

#include "curvkit/activations.hpp"

using namespace curvkit;

namespace {
constexpr double kPi = std::numbers::pi;

double fd1(const ActivationSpec& s, double x, int order, double eps = 1e-5) {
    return (activation_eval(s, x + eps, order) - activation_eval(s, x - eps, order)) /
           (2 * eps);
}
}  // namespace

TEST_SUITE("activations") {

TEST_CASE("beta-GELU values and named points") {
    CHECK(activation_eval({ActivationKind::BetaGelu, 1.0}, 0.0, 0) == 0.0);
    CHECK(activation_eval({ActivationKind::BetaGelu, 2.0}, 0.0, 2) ==
          doctest::Approx(2.0 * 2.0 / std::sqrt(2.0 * kPi)).epsilon(1e-12));
    CHECK(activation_eval({ActivationKind::AugmentedRelu, 1.0}, 0.0, 2) ==
          doctest::Approx(1.0 / std::sqrt(2.0 * kPi)).epsilon(1e-12));
    for (double x : {-2.0, -0.3, 0.0, 0.7, 3.0})
        CHECK(activation_eval({ActivationKind::DiminishedGelu, 1.0}, x, 2) == 0.0);
}

TEST_CASE("beta = 1 beta-GELU is GELU at orders 0 and 1") {
    for (double x = -4.0; x <= 4.0; x += 0.37)
        for (int order : {0, 1}) {
            CHECK(activation_eval({ActivationKind::BetaGelu, 1.0}, x, order) ==
                  doctest::Approx(activation_eval({ActivationKind::Gelu, 1.0}, x, order))
                      .epsilon(1e-15));
        }
}

TEST_CASE("ReLU conventions") {
    CHECK(activation_eval({ActivationKind::Relu, 1.0}, 0.0, 1) == 0.0);  // Theta(0) := 0
    CHECK(activation_eval({ActivationKind::Relu, 1.0}, -1.0, 0) == 0.0);
    CHECK(activation_eval({ActivationKind::Relu, 1.0}, 2.5, 0) == 2.5);
    CHECK(activation_eval({ActivationKind::Relu, 1.0}, 2.5, 2) == 0.0);
    // augmented ReLU shares orders 0 and 1 with ReLU exactly
    for (double x : {-1.5, -0.2, 0.0, 0.4, 2.0})
        for (int order : {0, 1})
            CHECK(activation_eval({ActivationKind::AugmentedRelu, 3.0}, x, order) ==
                  activation_eval({ActivationKind::Relu, 1.0}, x, order));
    // its bump integrates like a mollified delta: value beta/sqrt(2 pi) at 0
    CHECK(activation_eval({ActivationKind::AugmentedRelu, 4.0}, 0.0, 2) ==
          doctest::Approx(4.0 / std::sqrt(2.0 * kPi)).epsilon(1e-12));
}

TEST_CASE("derivative consistency via finite differences") {
    // order k+1 is the derivative of order k for the honest activations
    for (ActivationKind kind :
         {ActivationKind::Gelu, ActivationKind::BetaGelu, ActivationKind::Tanh}) {
        ActivationSpec s{kind, 1.7};
        for (double x = -3.0; x <= 3.0; x += 0.61)
            for (int order : {0, 1, 2}) {
                const double want = activation_eval(s, x, order + 1);
                CHECK(fd1(s, x, order) == doctest::Approx(want).epsilon(1e-6));
            }
    }
    // the decoupled variants are excluded by design: diminished GELU's
    // order 2 is 0 while its order-1 finite difference is not
    ActivationSpec dim{ActivationKind::DiminishedGelu, 1.0};
    CHECK(activation_eval(dim, 0.5, 2) == 0.0);
    CHECK(std::abs(fd1(dim, 0.5, 1)) > 0.01);
}

TEST_CASE("beta-GELU converges to ReLU pointwise") {
    ActivationSpec s{ActivationKind::BetaGelu, 100.0};
    for (double x = 0.5; x <= 6.0; x += 0.5) {
        CHECK(std::abs(activation_eval(s, x, 0) - x) <= 1e-8);
        CHECK(std::abs(activation_eval(s, -x, 0)) <= 1e-8);
    }
}

TEST_CASE("second-derivative mass is 1 for every beta") {
    for (double beta : {1.0, 4.0, 16.0}) {
        ActivationSpec s{ActivationKind::BetaGelu, beta};
        const double a = -10.0 / beta, b = 10.0 / beta;
        const int n = 20000;
        const double h = (b - a) / n;
        double acc = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
            acc += w * activation_eval(s, a + i * h, 2);
        }
        acc *= h / 3.0;
        CHECK(acc == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("kind round-trips through strings") {
    for (ActivationKind k :
         {ActivationKind::Relu, ActivationKind::Gelu, ActivationKind::BetaGelu,
          ActivationKind::AugmentedRelu, ActivationKind::DiminishedGelu, ActivationKind::Tanh})
        CHECK(activation_kind_from_string(to_string(k)) == k);
    CHECK_THROWS(activation_kind_from_string("swish"));
}

}  // TEST_SUITE
