#pragma once
// Data-parallel primitives backing tensor math and the conv3d inner loops.
//
// Every primitive has a scalar reference implementation and, on x86-64, an
// AVX2/FMA variant. The active variant is chosen once at startup from cpuid;
// the MMSEG_SIMD environment variable ("scalar" or "avx2") overrides it.
// Scalar and SIMD variants are equivalence-tested against each other.

#include <cstddef>

namespace mmseg::kernels {

enum class SimdLevel { scalar = 0, avx2 = 1 };

SimdLevel active_level();
const char* level_name(SimdLevel level);
// Force a level (used by tests and the env override). Returns false if the
// requested level is unavailable on this CPU.
bool set_level(SimdLevel level);

// y[i] += a * x[i]
void axpy(std::size_t n, double a, const double* x, double* y);
// sum_i x[i] * y[i]
double dot(std::size_t n, const double* x, const double* y);
// sum_i x[i]
double sum(std::size_t n, const double* x);
// sum_i (a[i] - b[i])^2
double sq_diff_sum(std::size_t n, const double* a, const double* b);
// x[i] *= a
void scale(std::size_t n, double a, double* x);
// y[i] = max(x[i], 0)
void relu_forward(std::size_t n, const double* x, double* y);
// gx[i] += gy[i] * (x[i] > 0)
void relu_backward(std::size_t n, const double* x, const double* gy, double* gx);
// Fused Adam step. m,v are the first/second moment buffers; bc1,bc2 the
// bias-correction factors 1-beta^t already computed by the caller.
void adam_update(std::size_t n, double* p, const double* g, double* m, double* v,
                 double lr, double beta1, double beta2, double eps,
                 double bc1, double bc2);

namespace scalar {
void axpy(std::size_t n, double a, const double* x, double* y);
double dot(std::size_t n, const double* x, const double* y);
double sum(std::size_t n, const double* x);
double sq_diff_sum(std::size_t n, const double* a, const double* b);
void scale(std::size_t n, double a, double* x);
void relu_forward(std::size_t n, const double* x, double* y);
void relu_backward(std::size_t n, const double* x, const double* gy, double* gx);
void adam_update(std::size_t n, double* p, const double* g, double* m, double* v,
                 double lr, double beta1, double beta2, double eps,
                 double bc1, double bc2);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define MMSEG_HAVE_AVX2_BUILD 1
namespace avx2 {
void axpy(std::size_t n, double a, const double* x, double* y);
double dot(std::size_t n, const double* x, const double* y);
double sum(std::size_t n, const double* x);
double sq_diff_sum(std::size_t n, const double* a, const double* b);
void scale(std::size_t n, double a, double* x);
void relu_forward(std::size_t n, const double* x, double* y);
void relu_backward(std::size_t n, const double* x, const double* gy, double* gx);
void adam_update(std::size_t n, double* p, const double* g, double* m, double* v,
                 double lr, double beta1, double beta2, double eps,
                 double bc1, double bc2);
}  // namespace avx2
#endif

}  // namespace mmseg::kernels
