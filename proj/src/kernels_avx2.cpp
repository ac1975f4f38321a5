// AVX2 variants. This translation unit is compiled with -mavx2 -mfma; the
// dispatcher in kernels.cpp only routes here when the CPU supports AVX2.

#include "mwd/kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>

namespace mwd::kernels::avx2 {

namespace {
inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}
}  // namespace

double sum(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double s = hsum(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

double dot(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
    double s = hsum(acc);
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

double weighted_dot(const double* w, const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d wx = _mm256_mul_pd(_mm256_loadu_pd(w + i), _mm256_loadu_pd(x + i));
        acc = _mm256_fmadd_pd(wx, _mm256_loadu_pd(y + i), acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) s += w[i] * x[i] * y[i];
    return s;
}

void mul(const double* x, const double* y, double* z, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(z + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) z[i] = x[i] * y[i];
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

double sum_sq_dev(const double* x, std::size_t n, double mean) {
    const __m256d vm = _mm256_set1_pd(mean);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), vm);
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        const double d = x[i] - mean;
        s += d * d;
    }
    return s;
}

}  // namespace mwd::kernels::avx2

#else

namespace mwd::kernels::avx2 {

double sum(const double* x, std::size_t n) { return scalar::sum(x, n); }
double dot(const double* x, const double* y, std::size_t n) { return scalar::dot(x, y, n); }
double weighted_dot(const double* w, const double* x, const double* y, std::size_t n) {
    return scalar::weighted_dot(w, x, y, n);
}
void mul(const double* x, const double* y, double* z, std::size_t n) { scalar::mul(x, y, z, n); }
void axpy(double a, const double* x, double* y, std::size_t n) { scalar::axpy(a, x, y, n); }
double sum_sq_dev(const double* x, std::size_t n, double mean) {
    return scalar::sum_sq_dev(x, n, mean);
}

}  // namespace mwd::kernels::avx2

#endif
