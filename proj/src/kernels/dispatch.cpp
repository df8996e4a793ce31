#include <cstdlib>
#include <cstring>

#include "curvkit/kernels.hpp"

namespace curvkit::kernels {

namespace {

Backend g_requested = Backend::Auto;

bool avx2_available() {
#if defined(CURVKIT_AVX2)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend resolve() {
    Backend b = g_requested;
    if (b == Backend::Auto) {
        if (const char* env = std::getenv("CURVKIT_KERNELS")) {
            if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
            if (std::strcmp(env, "avx2") == 0) return Backend::Avx2;
        }
        return avx2_available() ? Backend::Avx2 : Backend::Scalar;
    }
    return b;
}

bool use_avx2() { return resolve() == Backend::Avx2 && avx2_available(); }

}  // namespace

void set_backend(Backend b) { g_requested = b; }

Backend active_backend() { return use_avx2() ? Backend::Avx2 : Backend::Scalar; }

std::string backend_name() { return use_avx2() ? "avx2" : "scalar"; }

double dot(const double* a, const double* b, std::size_t n) {
#if defined(CURVKIT_AVX2)
    if (use_avx2()) return detail::dot_avx2(a, b, n);
#endif
    return detail::dot_scalar(a, b, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
#if defined(CURVKIT_AVX2)
    if (use_avx2()) return detail::axpy_avx2(alpha, x, y, n);
#endif
    detail::axpy_scalar(alpha, x, y, n);
}

void matmul(const double* A, const double* B, double* C,
            std::size_t r, std::size_t k, std::size_t c, bool accumulate) {
#if defined(CURVKIT_AVX2)
    if (use_avx2()) return detail::matmul_avx2(A, B, C, r, k, c, accumulate);
#endif
    detail::matmul_scalar(A, B, C, r, k, c, accumulate);
}

void matmul_tn(const double* A, const double* B, double* C,
               std::size_t r, std::size_t k, std::size_t c, bool accumulate) {
#if defined(CURVKIT_AVX2)
    if (use_avx2()) return detail::matmul_tn_avx2(A, B, C, r, k, c, accumulate);
#endif
    detail::matmul_tn_scalar(A, B, C, r, k, c, accumulate);
}

void matmul_nt(const double* A, const double* B, double* C,
               std::size_t r, std::size_t k, std::size_t c, bool accumulate) {
#if defined(CURVKIT_AVX2)
    if (use_avx2()) return detail::matmul_nt_avx2(A, B, C, r, k, c, accumulate);
#endif
    detail::matmul_nt_scalar(A, B, C, r, k, c, accumulate);
}

}  // namespace curvkit::kernels
