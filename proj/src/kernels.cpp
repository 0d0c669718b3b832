#include "mazeadapt/kernels.hpp"

#include <algorithm>
#include <atomic>

#include "mazeadapt/error.hpp"

namespace mazeadapt::kernels {

namespace scalar {

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n) {
  std::fill(c, c + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void add(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(const double* x, double alpha, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i];
}

void relu(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* x, const double* g, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? g[i] : 0.0;
}

}  // namespace scalar

bool avx2_available() {
#if defined(MAZEADAPT_HAVE_AVX2)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

namespace {

Backend default_backend() { return avx2_available() ? Backend::Avx2 : Backend::Scalar; }

std::atomic<Backend>& backend_slot() {
  static std::atomic<Backend> slot{default_backend()};
  return slot;
}

}  // namespace

Backend active_backend() { return backend_slot().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (b == Backend::Avx2 && !avx2_available()) {
    throw ContractError("AVX2 backend requested but not available on this host");
  }
  backend_slot().store(b, std::memory_order_relaxed);
}

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
  }
  return "?";
}

void transpose(const double* a, double* out, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = a[i * cols + j];
}

#if defined(MAZEADAPT_HAVE_AVX2)
#define MAZEADAPT_DISPATCH(fn, ...)                \
  if (active_backend() == Backend::Avx2) {         \
    avx2::fn(__VA_ARGS__);                         \
  } else {                                         \
    scalar::fn(__VA_ARGS__);                       \
  }
#else
#define MAZEADAPT_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n) {
  MAZEADAPT_DISPATCH(matmul, a, b, c, m, k, n);
}

void add(const double* a, const double* b, double* out, std::size_t n) {
  MAZEADAPT_DISPATCH(add, a, b, out, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  MAZEADAPT_DISPATCH(axpy, alpha, x, y, n);
}

void scale(const double* x, double alpha, double* out, std::size_t n) {
  MAZEADAPT_DISPATCH(scale, x, alpha, out, n);
}

void relu(const double* x, double* out, std::size_t n) {
  MAZEADAPT_DISPATCH(relu, x, out, n);
}

void relu_backward(const double* x, const double* g, double* out, std::size_t n) {
  MAZEADAPT_DISPATCH(relu_backward, x, g, out, n);
}

#undef MAZEADAPT_DISPATCH

}  // namespace mazeadapt::kernels
