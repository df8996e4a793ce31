#if defined(CURVKIT_AVX2)

#include <immintrin.h>

#include "curvkit/kernels.hpp"

namespace curvkit::kernels::detail {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sw = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sw));
}

}  // namespace

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

namespace {

// row of C accumulates a * B[p,:]
inline void row_fma(double a, const double* bp, double* ci, std::size_t c) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t j = 0;
    for (; j + 4 <= c; j += 4) {
        __m256d vc = _mm256_loadu_pd(ci + j);
        vc = _mm256_fmadd_pd(va, _mm256_loadu_pd(bp + j), vc);
        _mm256_storeu_pd(ci + j, vc);
    }
    for (; j < c; ++j) ci[j] += a * bp[j];
}

}  // namespace

void matmul_avx2(const double* A, const double* B, double* C,
                 std::size_t r, std::size_t k, std::size_t c, bool accumulate) {
    for (std::size_t i = 0; i < r; ++i) {
        double* ci = C + i * c;
        if (!accumulate)
            for (std::size_t j = 0; j < c; ++j) ci[j] = 0.0;
        const double* ai = A + i * k;
        for (std::size_t p = 0; p < k; ++p) row_fma(ai[p], B + p * c, ci, c);
    }
}

void matmul_tn_avx2(const double* A, const double* B, double* C,
                    std::size_t r, std::size_t k, std::size_t c, bool accumulate) {
    if (!accumulate)
        for (std::size_t i = 0; i < r * c; ++i) C[i] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
        const double* ap = A + p * r;
        const double* bp = B + p * c;
        for (std::size_t i = 0; i < r; ++i) row_fma(ap[i], bp, C + i * c, c);
    }
}

void matmul_nt_avx2(const double* A, const double* B, double* C,
                    std::size_t r, std::size_t k, std::size_t c, bool accumulate) {
    for (std::size_t i = 0; i < r; ++i) {
        const double* ai = A + i * k;
        double* ci = C + i * c;
        for (std::size_t j = 0; j < c; ++j) {
            double s = dot_avx2(ai, B + j * k, k);
            if (accumulate)
                ci[j] += s;
            else
                ci[j] = s;
        }
    }
}

}  // namespace curvkit::kernels::detail

#endif  // CURVKIT_AVX2
