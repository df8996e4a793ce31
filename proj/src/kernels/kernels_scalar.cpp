#include "curvkit/kernels.hpp"

namespace curvkit::kernels::detail {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void matmul_scalar(const double* A, const double* B, double* C,
                   std::size_t r, std::size_t k, std::size_t c, bool accumulate) {
    for (std::size_t i = 0; i < r; ++i) {
        double* ci = C + i * c;
        if (!accumulate)
            for (std::size_t j = 0; j < c; ++j) ci[j] = 0.0;
        const double* ai = A + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double a = ai[p];
            const double* bp = B + p * c;
            for (std::size_t j = 0; j < c; ++j) ci[j] += a * bp[j];
        }
    }
}

void matmul_tn_scalar(const double* A, const double* B, double* C,
                      std::size_t r, std::size_t k, std::size_t c, bool accumulate) {
    if (!accumulate)
        for (std::size_t i = 0; i < r * c; ++i) C[i] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
        const double* ap = A + p * r;
        const double* bp = B + p * c;
        for (std::size_t i = 0; i < r; ++i) {
            double* ci = C + i * c;
            const double a = ap[i];
            for (std::size_t j = 0; j < c; ++j) ci[j] += a * bp[j];
        }
    }
}

void matmul_nt_scalar(const double* A, const double* B, double* C,
                      std::size_t r, std::size_t k, std::size_t c, bool accumulate) {
    for (std::size_t i = 0; i < r; ++i) {
        const double* ai = A + i * k;
        double* ci = C + i * c;
        for (std::size_t j = 0; j < c; ++j) {
            double s = dot_scalar(ai, B + j * k, k);
            if (accumulate)
                ci[j] += s;
            else
                ci[j] = s;
        }
    }
}

}  // namespace curvkit::kernels::detail
