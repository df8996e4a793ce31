#pragma once

#include <cstddef>
#include <string>

namespace curvkit::kernels {

// Double-precision inner loops behind the evaluation engine. Each op has a
// scalar reference implementation and an AVX2 variant; the active backend is
// chosen at runtime (cpuid, overridable via set_backend or the
// CURVKIT_KERNELS environment variable). Variants are equivalence-tested
// against the scalar reference.

enum class Backend { Auto, Scalar, Avx2 };

void set_backend(Backend b);
Backend active_backend();
std::string backend_name();

double dot(const double* a, const double* b, std::size_t n);
// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);
// C (r x c) op= A (r x k) * B (k x c), row-major; accumulate adds into C
void matmul(const double* A, const double* B, double* C,
            std::size_t r, std::size_t k, std::size_t c, bool accumulate);
// C (r x c) op= A^T (A is k x r) * B (k x c)
void matmul_tn(const double* A, const double* B, double* C,
               std::size_t r, std::size_t k, std::size_t c, bool accumulate);
// C (r x c) op= A (r x k) * B^T (B is c x k)
void matmul_nt(const double* A, const double* B, double* C,
               std::size_t r, std::size_t k, std::size_t c, bool accumulate);

namespace detail {
double dot_scalar(const double* a, const double* b, std::size_t n);
void axpy_scalar(double alpha, const double* x, double* y, std::size_t n);
void matmul_scalar(const double* A, const double* B, double* C,
                   std::size_t r, std::size_t k, std::size_t c, bool accumulate);
void matmul_tn_scalar(const double* A, const double* B, double* C,
                      std::size_t r, std::size_t k, std::size_t c, bool accumulate);
void matmul_nt_scalar(const double* A, const double* B, double* C,
                      std::size_t r, std::size_t k, std::size_t c, bool accumulate);

#if defined(CURVKIT_AVX2)
double dot_avx2(const double* a, const double* b, std::size_t n);
void axpy_avx2(double alpha, const double* x, double* y, std::size_t n);
void matmul_avx2(const double* A, const double* B, double* C,
                 std::size_t r, std::size_t k, std::size_t c, bool accumulate);
void matmul_tn_avx2(const double* A, const double* B, double* C,
                    std::size_t r, std::size_t k, std::size_t c, bool accumulate);
void matmul_nt_avx2(const double* A, const double* B, double* C,
                    std::size_t r, std::size_t k, std::size_t c, bool accumulate);
#endif
}  // namespace detail

}  // namespace curvkit::kernels
