#pragma once

#include <cstddef>
#include <cstdint>

// Data-parallel inner loops behind the DSP and network code. Every kernel
// has a scalar reference implementation and, on x86-64, an AVX2/FMA variant
// selected at runtime. The integer kernels are exact, so both variants
// produce bit-identical results; the float variants differ only by
// summation order.

namespace pvad::kernels {

enum class Backend { Auto, Scalar, Avx2 };

bool cpu_has_avx2();

// Switches the active implementation set. Auto picks the widest set the CPU
// supports. Returns the backend actually in effect (a request for Avx2 on a
// CPU without it falls back to Scalar).
Backend select_backend(Backend requested);
Backend active_backend();
const char* backend_name();

// ---- f64 kernels: network math ----
double dot_f64(const double* a, const double* b, std::size_t n);
// y = W x (+ bias); W is row-major rows x cols.
void matvec_f64(const double* w, std::size_t rows, std::size_t cols,
                const double* x, const double* bias, double* y);
// y += alpha * x
void axpy_f64(double alpha, const double* x, double* y, std::size_t n);
// y = a * b elementwise
void mul_f64(const double* a, const double* b, double* y, std::size_t n);

// ---- f32 kernels: sample-domain math; accumulation carried in f64 ----
double sum_sq_f32(const float* x, std::size_t n);
void axpy_f32(float alpha, const float* x, float* y, std::size_t n);

// ---- int8 kernels: quantized inference; exact int32 accumulation ----
int32_t dot_i8(const int8_t* a, const int8_t* b, std::size_t n);
// acc[r] = sum_c w[r*cols + c] * x[c]
void matvec_i8(const int8_t* w, std::size_t rows, std::size_t cols,
               const int8_t* x, int32_t* acc);

} // namespace pvad::kernels
