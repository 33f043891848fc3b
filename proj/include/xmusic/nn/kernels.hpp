/**
 * @file kernels.hpp
 * @brief Dense kernels behind the autodiff graph and the inference paths.
 *
 * Every kernel exists twice: a plain serial reference and an OpenMP version
 * that splits only the outer loop, so each output element is accumulated in
 * the same order and both produce bit-identical results.
 */
#pragma once

#include <span>

namespace xmusic::nn::kernels {

namespace serial {

/// C[M x N] (+)= A[M x K] * B[K x N]
void matmul(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
/// C[K x N] += A[M x K]^T * B[M x N]
void matmul_at_b(const double* a, const double* b, double* c, int m, int k, int n);
/// C[M x K] += A[M x N] * B[K x N]^T
void matmul_a_bt(const double* a, const double* b, double* c, int m, int k, int n);
/// In-place softmax of each row of X[M x N].
void softmax_rows(double* x, int m, int n);

}  // namespace serial

namespace omp {

void matmul(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
void matmul_at_b(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_a_bt(const double* a, const double* b, double* c, int m, int k, int n);
void softmax_rows(double* x, int m, int n);

}  // namespace omp

// Default entry points (OpenMP).
inline void matmul(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
  omp::matmul(a, b, c, m, k, n, accumulate);
}
inline void matmul_at_b(const double* a, const double* b, double* c, int m, int k, int n) {
  omp::matmul_at_b(a, b, c, m, k, n);
}
inline void matmul_a_bt(const double* a, const double* b, double* c, int m, int k, int n) {
  omp::matmul_a_bt(a, b, c, m, k, n);
}
inline void softmax_rows(double* x, int m, int n) { omp::softmax_rows(x, m, n); }

/// Number of OpenMP threads the parallel kernels will use.
int thread_count();

}  // namespace xmusic::nn::kernels
