#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <limits>

#include "curvkit/curvature.hpp"
#include "oracles.hpp"

using namespace curvkit;
namespace oc = oracles;

TEST_SUITE("nn") {

TEST_CASE("loss_eval closed forms") {
    // MSE at z = y
    {
        Tensor z({3}, {0.1, -0.4, 2.0});
        LossEval e = loss_eval(LossKind::Mse, z, z);
        CHECK(e.loss == 0.0);
        for (double g : e.grad_z.data) CHECK(g == 0.0);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                CHECK(e.hess_z.at(i, j) == (i == j ? 1.0 : 0.0));
    }
    // CE with equal logits over 2 classes
    {
        Tensor z({2}, {0.3, 0.3});
        LossEval e = loss_eval(LossKind::CrossEntropy, z, 0);
        CHECK(e.hess_z.at(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
        CHECK(e.hess_z.at(0, 1) == doctest::Approx(-0.25).epsilon(1e-14));
        CHECK(e.grad_z.data[0] == doctest::Approx(-0.5).epsilon(1e-14));
        CHECK(e.loss == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    }
    // CE Hessian row sums vanish; H_z is PSD for both losses
    {
        CounterRng rng(5);
        for (int trial = 0; trial < 10; ++trial) {
            Tensor z({4});
            for (std::size_t i = 0; i < 4; ++i) z.data[i] = 2.0 * rng.normal(trial, i);
            LossEval e = loss_eval(LossKind::CrossEntropy, z, trial % 4);
            for (std::size_t i = 0; i < 4; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < 4; ++j) s += e.hess_z.at(i, j);
                CHECK(std::abs(s) < 1e-14);
            }
            auto ev = eigenvalues_sym(e.hess_z);
            CHECK(ev.front() >= -1e-12);
        }
    }
    CHECK_THROWS_AS(loss_eval(LossKind::CrossEntropy, Tensor({3}, {1, 2, 3}), 5),
                    std::invalid_argument);
    CHECK_THROWS_AS(loss_eval(LossKind::Mse, Tensor({3}, {1, 2, 3}), 1),
                    std::invalid_argument);
}

TEST_CASE("parameter flattening is layer-major, row-major") {
    Model m = make_model({3, 2, 4}, {ActivationKind::Gelu, 1.0}, 1, /*bias=*/true);
    CHECK(m.param_count() == 3 * 2 + 2 + 2 * 4 + 4);
    CHECK(m.weight_offset(0) == 0);
    CHECK(m.bias_offset(0) == 6);
    CHECK(m.weight_offset(1) == 8);
    CHECK(m.weight_index(1, 2, 1) == 8 + 2 * 2 + 1);
}

TEST_CASE("near-linear regime at large beta") {
    // on strictly positive preactivations, large-beta beta-GELU is Wx
    Model m;
    m.widths = {2, 2};
    m.activation = {ActivationKind::BetaGelu, 200.0};
    m.final_activation = true;
    m.params = {1.0, 0.5, 0.25, 2.0};  // positive weights
    Tensor x({2, 1}, {1.0, 2.0});
    Tensor z = model_forward(m, x).z;
    CHECK(z.data[0] == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(z.data[1] == doctest::Approx(4.25).epsilon(1e-10));
}

TEST_CASE("bias-enabled forward matches the hand recursion") {
    Model m = make_model({2, 3, 2}, {ActivationKind::Tanh, 1.0}, 9, /*bias=*/true);
    for (std::size_t l = 0; l < m.depth(); ++l)
        for (std::size_t i = 0; i < m.widths[l + 1]; ++i)
            m.params[m.bias_offset(l) + i] = 0.1 * (i + 1);
    Tensor x({2, 1}, {0.4, -1.1});
    Tensor z = model_forward(m, x).z;
    Recording rec = record_forward(m, x);
    CHECK(z.data == rec.output_value.data);
}

TEST_CASE("checkpoints round-trip exactly") {
    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "curvkit_ckpt_test.json").string();
    Model m = make_model({2, 5, 3}, {ActivationKind::BetaGelu, 4.0}, 77, true, true);
    save_checkpoint(m, path);
    Model r = load_checkpoint(path);
    CHECK(r.widths == m.widths);
    CHECK(r.activation.kind == m.activation.kind);
    CHECK(r.activation.beta == m.activation.beta);
    CHECK(r.bias == m.bias);
    CHECK(r.final_activation == m.final_activation);
    CHECK(r.seed == m.seed);
    CHECK(r.params == m.params);  // bit-exact float64 round trip
    fs::remove(path);
}

TEST_CASE("non-finite intermediates are rejected with context") {
    Model m = make_model({2, 3, 2}, {ActivationKind::Gelu, 1.0}, 2);
    m.params[0] = std::numeric_limits<double>::infinity();
    Tensor x({2, 1}, {1.0, 1.0});
    CHECK_THROWS(model_forward(m, x));
}

}  // TEST_SUITE
