#include "xmusic/nn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace xmusic::nn::kernels {

namespace {

// Below this many multiply-adds the thread start-up costs more than it saves.
constexpr long kParallelThreshold = 1L << 15;

inline void matmul_row(const double* a, const double* b, double* c, int k, int n, bool accumulate) {
  if (!accumulate) std::fill(c, c + n, 0.0);
  for (int p = 0; p < k; ++p) {
    const double x = a[p];
    if (x == 0.0) continue;
    const double* br = b + static_cast<std::size_t>(p) * n;
    for (int j = 0; j < n; ++j) c[j] += x * br[j];
  }
}

inline void at_b_row(const double* a, const double* b, double* c, int p, int m, int k, int n) {
  double* cr = c + static_cast<std::size_t>(p) * n;
  for (int i = 0; i < m; ++i) {
    const double x = a[static_cast<std::size_t>(i) * k + p];
    if (x == 0.0) continue;
    const double* br = b + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) cr[j] += x * br[j];
  }
}

inline void a_bt_row(const double* a, const double* b, double* c, int i, int k, int n) {
  const double* ar = a + static_cast<std::size_t>(i) * n;
  double* cr = c + static_cast<std::size_t>(i) * k;
  for (int p = 0; p < k; ++p) {
    const double* br = b + static_cast<std::size_t>(p) * n;
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += ar[j] * br[j];
    cr[p] += s;
  }
}

inline void softmax_row(double* x, int n) {
  double m = -INFINITY;
  for (int j = 0; j < n; ++j) m = std::max(m, x[j]);
  double sum = 0.0;
  for (int j = 0; j < n; ++j) {
    x[j] = std::isinf(x[j]) && x[j] < 0 ? 0.0 : std::exp(x[j] - m);
    sum += x[j];
  }
  for (int j = 0; j < n; ++j) x[j] /= sum;
}

}  // namespace

namespace serial {

void matmul(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i)
    matmul_row(a + static_cast<std::size_t>(i) * k, b, c + static_cast<std::size_t>(i) * n, k, n, accumulate);
}

void matmul_at_b(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int p = 0; p < k; ++p) at_b_row(a, b, c, p, m, k, n);
}

void matmul_a_bt(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) a_bt_row(a, b, c, i, k, n);
}

void softmax_rows(double* x, int m, int n) {
  for (int i = 0; i < m; ++i) softmax_row(x + static_cast<std::size_t>(i) * n, n);
}

}  // namespace serial

namespace omp {

void matmul(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
  const bool par = static_cast<long>(m) * k * n >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (int i = 0; i < m; ++i)
    matmul_row(a + static_cast<std::size_t>(i) * k, b, c + static_cast<std::size_t>(i) * n, k, n, accumulate);
}

void matmul_at_b(const double* a, const double* b, double* c, int m, int k, int n) {
  const bool par = static_cast<long>(m) * k * n >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (int p = 0; p < k; ++p) at_b_row(a, b, c, p, m, k, n);
}

void matmul_a_bt(const double* a, const double* b, double* c, int m, int k, int n) {
  const bool par = static_cast<long>(m) * k * n >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (int i = 0; i < m; ++i) a_bt_row(a, b, c, i, k, n);
}

void softmax_rows(double* x, int m, int n) {
  const bool par = static_cast<long>(m) * n >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (int i = 0; i < m; ++i) softmax_row(x + static_cast<std::size_t>(i) * n, n);
}

}  // namespace omp

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace xmusic::nn::kernels
