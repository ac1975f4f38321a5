#include "mwd/kernels.hpp"

namespace mwd::kernels {

namespace scalar {

double sum(const double* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
}

double dot(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

double weighted_dot(const double* w, const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += w[i] * x[i] * y[i];
    return s;
}

void mul(const double* x, const double* y, double* z, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) z[i] = x[i] * y[i];
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sum_sq_dev(const double* x, std::size_t n, double mean) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - mean;
        s += d * d;
    }
    return s;
}

}  // namespace scalar

bool avx2_available() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

namespace {
Backend g_backend = avx2_available() ? Backend::Avx2 : Backend::Scalar;
}

Backend active_backend() { return g_backend; }

void set_backend(Backend b) {
    if (b == Backend::Avx2 && !avx2_available()) return;
    g_backend = b;
}

void reset_backend() { g_backend = avx2_available() ? Backend::Avx2 : Backend::Scalar; }

double sum(const double* x, std::size_t n) {
    return g_backend == Backend::Avx2 ? avx2::sum(x, n) : scalar::sum(x, n);
}

double dot(const double* x, const double* y, std::size_t n) {
    return g_backend == Backend::Avx2 ? avx2::dot(x, y, n) : scalar::dot(x, y, n);
}

double weighted_dot(const double* w, const double* x, const double* y, std::size_t n) {
    return g_backend == Backend::Avx2 ? avx2::weighted_dot(w, x, y, n)
                                      : scalar::weighted_dot(w, x, y, n);
}

void mul(const double* x, const double* y, double* z, std::size_t n) {
    g_backend == Backend::Avx2 ? avx2::mul(x, y, z, n) : scalar::mul(x, y, z, n);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    g_backend == Backend::Avx2 ? avx2::axpy(a, x, y, n) : scalar::axpy(a, x, y, n);
}

double sum_sq_dev(const double* x, std::size_t n, double mean) {
    return g_backend == Backend::Avx2 ? avx2::sum_sq_dev(x, n, mean)
                                      : scalar::sum_sq_dev(x, n, mean);
}

}  // namespace mwd::kernels
