#pragma once

#include <cstddef>

// Data-parallel inner loops used by the estimation and summary code.
// Each kernel has a scalar reference implementation and an AVX2 variant;
// the active variant is chosen once at startup from CPU capabilities and
// can be overridden (mwd::kernels::set_backend) for equivalence testing.

namespace mwd::kernels {

enum class Backend { Scalar, Avx2 };

Backend active_backend();
void set_backend(Backend b);
void reset_backend();          // back to the auto-detected choice
bool avx2_available();

double sum(const double* x, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
// sum_i w[i] * x[i] * y[i]
double weighted_dot(const double* w, const double* x, const double* y, std::size_t n);
// z[i] = x[i] * y[i]
void mul(const double* x, const double* y, double* z, std::size_t n);
// y[i] += a * x[i]
void axpy(double a, const double* x, double* y, std::size_t n);
// sum_i (x[i] - mean)^2
double sum_sq_dev(const double* x, std::size_t n, double mean);

namespace scalar {
double sum(const double* x, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double weighted_dot(const double* w, const double* x, const double* y, std::size_t n);
void mul(const double* x, const double* y, double* z, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
double sum_sq_dev(const double* x, std::size_t n, double mean);
}  // namespace scalar

namespace avx2 {
double sum(const double* x, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double weighted_dot(const double* w, const double* x, const double* y, std::size_t n);
void mul(const double* x, const double* y, double* z, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
double sum_sq_dev(const double* x, std::size_t n, double mean);
}  // namespace avx2

}  // namespace mwd::kernels
