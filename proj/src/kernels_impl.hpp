#pragma once

#include <cstddef>
#include <cstdint>

// Internal: per-backend kernel entry points. kernels.cpp wires these into
// the dispatch table; tests reach them through select_backend().

namespace pvad::kernels::scalar {
double dot_f64(const double* a, const double* b, std::size_t n);
void matvec_f64(const double* w, std::size_t rows, std::size_t cols,
                const double* x, const double* bias, double* y);
void axpy_f64(double alpha, const double* x, double* y, std::size_t n);
void mul_f64(const double* a, const double* b, double* y, std::size_t n);
double sum_sq_f32(const float* x, std::size_t n);
void axpy_f32(float alpha, const float* x, float* y, std::size_t n);
int32_t dot_i8(const int8_t* a, const int8_t* b, std::size_t n);
void matvec_i8(const int8_t* w, std::size_t rows, std::size_t cols,
               const int8_t* x, int32_t* acc);
} // namespace pvad::kernels::scalar

#if defined(PVAD_HAVE_AVX2)
namespace pvad::kernels::avx2 {
double dot_f64(const double* a, const double* b, std::size_t n);
void matvec_f64(const double* w, std::size_t rows, std::size_t cols,
                const double* x, const double* bias, double* y);
void axpy_f64(double alpha, const double* x, double* y, std::size_t n);
void mul_f64(const double* a, const double* b, double* y, std::size_t n);
double sum_sq_f32(const float* x, std::size_t n);
void axpy_f32(float alpha, const float* x, float* y, std::size_t n);
int32_t dot_i8(const int8_t* a, const int8_t* b, std::size_t n);
void matvec_i8(const int8_t* w, std::size_t rows, std::size_t cols,
               const int8_t* x, int32_t* acc);
} // namespace pvad::kernels::avx2
#endif
