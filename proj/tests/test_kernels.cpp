#include "doctest.h"

#include <array>
#include <vector>

#include "curvkit/kernels.hpp"
#include "curvkit/rng.hpp"

using namespace curvkit;

namespace {

struct BackendGuard {
    ~BackendGuard() { kernels::set_backend(kernels::Backend::Auto); }
};

std::vector<double> rand_vec(std::size_t n, std::uint64_t seed) {
    CounterRng rng(seed);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = rng.normal(0, i);
    return v;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("backend selection is queryable and overridable") {
    BackendGuard guard;
    kernels::set_backend(kernels::Backend::Scalar);
    CHECK(kernels::backend_name() == "scalar");
    CHECK(kernels::active_backend() == kernels::Backend::Scalar);
    kernels::set_backend(kernels::Backend::Auto);
    // Auto resolves to something concrete
    CHECK((kernels::backend_name() == "scalar" || kernels::backend_name() == "avx2"));
}

TEST_CASE("scalar and vectorized variants agree") {
    BackendGuard guard;
    kernels::set_backend(kernels::Backend::Avx2);  // falls back if unavailable
    const bool have_avx2 = kernels::active_backend() == kernels::Backend::Avx2;
    INFO("avx2 available: " << have_avx2);

    for (std::size_t n : {1ul, 3ul, 4ul, 7ul, 64ul, 129ul}) {
        auto a = rand_vec(n, 10 + n), b = rand_vec(n, 20 + n);

        kernels::set_backend(kernels::Backend::Scalar);
        const double ds = kernels::dot(a.data(), b.data(), n);
        auto ys = b;
        kernels::axpy(0.37, a.data(), ys.data(), n);

        kernels::set_backend(kernels::Backend::Avx2);
        const double dv = kernels::dot(a.data(), b.data(), n);
        auto yv = b;
        kernels::axpy(0.37, a.data(), yv.data(), n);

        CHECK(ds == doctest::Approx(dv).epsilon(1e-13));
        for (std::size_t i = 0; i < n; ++i) CHECK(ys[i] == doctest::Approx(yv[i]).epsilon(1e-13));
    }

    for (auto [r, k, c] : std::vector<std::array<std::size_t, 3>>{
             {1, 1, 1}, {2, 3, 4}, {5, 7, 3}, {8, 16, 9}, {13, 31, 17}}) {
        auto A = rand_vec(r * k, r + k), B = rand_vec(k * c, k + c);
        auto Bt = rand_vec(c * k, 3 * k + c);       // c x k for matmul_nt
        auto At = rand_vec(k * r, 5 * k + r);       // k x r for matmul_tn
        std::vector<double> c0(r * c, 0.5), c1(r * c, 0.5);

        kernels::set_backend(kernels::Backend::Scalar);
        auto s0 = c0, s1 = c0, s2 = c0;
        kernels::matmul(A.data(), B.data(), s0.data(), r, k, c, true);
        kernels::matmul_tn(At.data(), B.data(), s1.data(), r, k, c, true);
        kernels::matmul_nt(A.data(), Bt.data(), s2.data(), r, k, c, true);

        kernels::set_backend(kernels::Backend::Avx2);
        auto v0 = c1, v1 = c1, v2 = c1;
        kernels::matmul(A.data(), B.data(), v0.data(), r, k, c, true);
        kernels::matmul_tn(At.data(), B.data(), v1.data(), r, k, c, true);
        kernels::matmul_nt(A.data(), Bt.data(), v2.data(), r, k, c, true);

        for (std::size_t i = 0; i < r * c; ++i) {
            CHECK(s0[i] == doctest::Approx(v0[i]).epsilon(1e-12));
            CHECK(s1[i] == doctest::Approx(v1[i]).epsilon(1e-12));
            CHECK(s2[i] == doctest::Approx(v2[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("matmul matches a hand-rolled reference") {
    BackendGuard guard;
    kernels::set_backend(kernels::Backend::Auto);
    const std::size_t r = 3, k = 4, c = 2;
    auto A = rand_vec(r * k, 1), B = rand_vec(k * c, 2);
    std::vector<double> C(r * c, 0.0), ref(r * c, 0.0);
    kernels::matmul(A.data(), B.data(), C.data(), r, k, c, false);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
            for (std::size_t p = 0; p < k; ++p) ref[i * c + j] += A[i * k + p] * B[p * c + j];
    for (std::size_t i = 0; i < r * c; ++i) CHECK(C[i] == doctest::Approx(ref[i]).epsilon(1e-13));
}

}  // TEST_SUITE
