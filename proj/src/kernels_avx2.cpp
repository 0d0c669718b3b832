// AVX2 kernel variants. Compiled with -mavx2 but without -mfma and with FP
// contraction off: every lane must round exactly like the scalar reference,
// so _mm256_mul_pd/_mm256_add_pd stay separate instructions.

#include <immintrin.h>

#include <algorithm>
#include <cstddef>

#include "mazeadapt/kernels.hpp"

namespace mazeadapt::kernels::avx2 {

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n) {
  std::fill(c, c + m * n, 0.0);
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b + p * n;
      const __m256d va = _mm256_set1_pd(aip);
      std::size_t j = 0;
      for (; j < n4; j += 4) {
        __m256d vc = _mm256_loadu_pd(crow + j);
        __m256d vb = _mm256_loadu_pd(brow + j);
        vc = _mm256_add_pd(vc, _mm256_mul_pd(va, vb));
        _mm256_storeu_pd(crow + j, vc);
      }
      for (; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void add(const double* a, const double* b, double* out, std::size_t n) {
  const std::size_t n4 = n - n % 4;
  std::size_t i = 0;
  for (; i < n4; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  const std::size_t n4 = n - n % 4;
  std::size_t i = 0;
  for (; i < n4; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_add_pd(vy, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale(const double* x, double alpha, double* out, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  const std::size_t n4 = n - n % 4;
  std::size_t i = 0;
  for (; i < n4; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) out[i] = alpha * x[i];
}

void relu(const double* x, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const std::size_t n4 = n - n % 4;
  std::size_t i = 0;
  for (; i < n4; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  }
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* x, const double* g, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const std::size_t n4 = n - n % 4;
  std::size_t i = 0;
  for (; i < n4; i += 4) {
    __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(out + i, _mm256_and_pd(mask, _mm256_loadu_pd(g + i)));
  }
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? g[i] : 0.0;
}

}  // namespace mazeadapt::kernels::avx2
