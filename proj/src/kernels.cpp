#include "pvad/kernels.hpp"

#include "kernels_impl.hpp"

namespace pvad::kernels {

namespace scalar {

double dot_f64(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void matvec_f64(const double* w, std::size_t rows, std::size_t cols,
                const double* x, const double* bias, double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = bias ? bias[r] : 0.0;
        const double* row = w + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
}

void axpy_f64(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void mul_f64(const double* a, const double* b, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

double sum_sq_f32(const float* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double v = static_cast<double>(x[i]);
        acc += v * v;
    }
    return acc;
}

void axpy_f32(float alpha, const float* x, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

int32_t dot_i8(const int8_t* a, const int8_t* b, std::size_t n) {
    int32_t acc = 0;
    for (std::size_t i = 0; i < n; ++i)
        acc += static_cast<int32_t>(a[i]) * static_cast<int32_t>(b[i]);
    return acc;
}

void matvec_i8(const int8_t* w, std::size_t rows, std::size_t cols,
               const int8_t* x, int32_t* acc) {
    for (std::size_t r = 0; r < rows; ++r)
        acc[r] = dot_i8(w + r * cols, x, cols);
}

} // namespace scalar

namespace {

struct KernelTable {
    double (*dot_f64)(const double*, const double*, std::size_t);
    void (*matvec_f64)(const double*, std::size_t, std::size_t, const double*,
                       const double*, double*);
    void (*axpy_f64)(double, const double*, double*, std::size_t);
    void (*mul_f64)(const double*, const double*, double*, std::size_t);
    double (*sum_sq_f32)(const float*, std::size_t);
    void (*axpy_f32)(float, const float*, float*, std::size_t);
    int32_t (*dot_i8)(const int8_t*, const int8_t*, std::size_t);
    void (*matvec_i8)(const int8_t*, std::size_t, std::size_t, const int8_t*,
                      int32_t*);
};

constexpr KernelTable kScalarTable = {
    scalar::dot_f64, scalar::matvec_f64, scalar::axpy_f64, scalar::mul_f64,
    scalar::sum_sq_f32, scalar::axpy_f32, scalar::dot_i8, scalar::matvec_i8,
};

#if defined(PVAD_HAVE_AVX2)
constexpr KernelTable kAvx2Table = {
    avx2::dot_f64, avx2::matvec_f64, avx2::axpy_f64, avx2::mul_f64,
    avx2::sum_sq_f32, avx2::axpy_f32, avx2::dot_i8, avx2::matvec_i8,
};
#endif

Backend g_backend = Backend::Auto;
const KernelTable* g_table = nullptr;

const KernelTable* resolve(Backend& effective) {
#if defined(PVAD_HAVE_AVX2)
    if (cpu_has_avx2()) {
        effective = Backend::Avx2;
        return &kAvx2Table;
    }
#endif
    effective = Backend::Scalar;
    return &kScalarTable;
}

const KernelTable& table() {
    if (!g_table) {
        Backend eff;
        g_table = resolve(eff);
        g_backend = eff;
    }
    return *g_table;
}

} // namespace

bool cpu_has_avx2() {
#if defined(PVAD_HAVE_AVX2)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend select_backend(Backend requested) {
    switch (requested) {
    case Backend::Scalar:
        g_table = &kScalarTable;
        g_backend = Backend::Scalar;
        break;
    case Backend::Avx2:
#if defined(PVAD_HAVE_AVX2)
        if (cpu_has_avx2()) {
            g_table = &kAvx2Table;
            g_backend = Backend::Avx2;
            break;
        }
#endif
        g_table = &kScalarTable;
        g_backend = Backend::Scalar;
        break;
    case Backend::Auto: {
        Backend eff;
        g_table = resolve(eff);
        g_backend = eff;
        break;
    }
    }
    return g_backend;
}

Backend active_backend() {
    table();
    return g_backend;
}

const char* backend_name() {
    return active_backend() == Backend::Avx2 ? "avx2" : "scalar";
}

double dot_f64(const double* a, const double* b, std::size_t n) {
    return table().dot_f64(a, b, n);
}
void matvec_f64(const double* w, std::size_t rows, std::size_t cols,
                const double* x, const double* bias, double* y) {
    table().matvec_f64(w, rows, cols, x, bias, y);
}
void axpy_f64(double alpha, const double* x, double* y, std::size_t n) {
    table().axpy_f64(alpha, x, y, n);
}
void mul_f64(const double* a, const double* b, double* y, std::size_t n) {
    table().mul_f64(a, b, y, n);
}
double sum_sq_f32(const float* x, std::size_t n) {
    return table().sum_sq_f32(x, n);
}
void axpy_f32(float alpha, const float* x, float* y, std::size_t n) {
    table().axpy_f32(alpha, x, y, n);
}
int32_t dot_i8(const int8_t* a, const int8_t* b, std::size_t n) {
    return table().dot_i8(a, b, n);
}
void matvec_i8(const int8_t* w, std::size_t rows, std::size_t cols,
               const int8_t* x, int32_t* acc) {
    table().matvec_i8(w, rows, cols, x, acc);
}

} // namespace pvad::kernels
