#include "mmseg/kernels/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace mmseg::kernels {

namespace {

struct Table {
    void (*axpy)(std::size_t, double, const double*, double*);
    double (*dot)(std::size_t, const double*, const double*);
    double (*sum)(std::size_t, const double*);
    double (*sq_diff_sum)(std::size_t, const double*, const double*);
    void (*scale)(std::size_t, double, double*);
    void (*relu_forward)(std::size_t, const double*, double*);
    void (*relu_backward)(std::size_t, const double*, const double*, double*);
    void (*adam_update)(std::size_t, double*, const double*, double*, double*,
                        double, double, double, double, double, double);
};

constexpr Table kScalarTable = {
    scalar::axpy,         scalar::dot,          scalar::sum,
    scalar::sq_diff_sum,  scalar::scale,        scalar::relu_forward,
    scalar::relu_backward, scalar::adam_update,
};

#ifdef MMSEG_HAVE_AVX2_BUILD
constexpr Table kAvx2Table = {
    avx2::axpy,         avx2::dot,          avx2::sum,
    avx2::sq_diff_sum,  avx2::scale,        avx2::relu_forward,
    avx2::relu_backward, avx2::adam_update,
};
#endif

bool cpu_has_avx2() {
#ifdef MMSEG_HAVE_AVX2_BUILD
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

SimdLevel g_level = SimdLevel::scalar;
const Table* g_table = &kScalarTable;

bool apply_level(SimdLevel level) {
    switch (level) {
        case SimdLevel::scalar:
            g_level = SimdLevel::scalar;
            g_table = &kScalarTable;
            return true;
        case SimdLevel::avx2:
#ifdef MMSEG_HAVE_AVX2_BUILD
            if (cpu_has_avx2()) {
                g_level = SimdLevel::avx2;
                g_table = &kAvx2Table;
                return true;
            }
#endif
            return false;
    }
    return false;
}

struct Init {
    Init() {
        SimdLevel level = cpu_has_avx2() ? SimdLevel::avx2 : SimdLevel::scalar;
        if (const char* env = std::getenv("MMSEG_SIMD")) {
            if (std::strcmp(env, "scalar") == 0) level = SimdLevel::scalar;
            if (std::strcmp(env, "avx2") == 0) level = SimdLevel::avx2;
        }
        if (!apply_level(level)) apply_level(SimdLevel::scalar);
    }
};
const Init g_init;

}  // namespace

SimdLevel active_level() { return g_level; }

const char* level_name(SimdLevel level) {
    return level == SimdLevel::avx2 ? "avx2" : "scalar";
}

bool set_level(SimdLevel level) { return apply_level(level); }

void axpy(std::size_t n, double a, const double* x, double* y) {
    g_table->axpy(n, a, x, y);
}
double dot(std::size_t n, const double* x, const double* y) {
    return g_table->dot(n, x, y);
}
double sum(std::size_t n, const double* x) { return g_table->sum(n, x); }
double sq_diff_sum(std::size_t n, const double* a, const double* b) {
    return g_table->sq_diff_sum(n, a, b);
}
void scale(std::size_t n, double a, double* x) { g_table->scale(n, a, x); }
void relu_forward(std::size_t n, const double* x, double* y) {
    g_table->relu_forward(n, x, y);
}
void relu_backward(std::size_t n, const double* x, const double* gy, double* gx) {
    g_table->relu_backward(n, x, gy, gx);
}
void adam_update(std::size_t n, double* p, const double* g, double* m, double* v,
                 double lr, double beta1, double beta2, double eps,
                 double bc1, double bc2) {
    g_table->adam_update(n, p, g, m, v, lr, beta1, beta2, eps, bc1, bc2);
}

}  // namespace mmseg::kernels
