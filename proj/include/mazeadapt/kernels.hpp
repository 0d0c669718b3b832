#pragma once

#include <cstddef>

// Dense arithmetic inner loops behind the tensor ops. Each kernel has a
// scalar reference implementation and, on x86-64, an AVX2 variant selected
// once at startup (overridable with set_backend, e.g. from tests).
//
// The AVX2 code performs the same multiply/add sequence per output element
// as the scalar code -- lanes hold independent outputs and FP contraction is
// disabled -- so the two backends are bit-identical, not merely close. The
// equivalence tests assert exact equality, and results do not depend on
// which backend the host selects.

namespace mazeadapt::kernels {

enum class Backend { Scalar, Avx2 };

bool avx2_available();
Backend active_backend();
void set_backend(Backend b);  // throws ContractError if unsupported on this host
const char* backend_name(Backend b);

// c[m x n] = a[m x k] . b[k x n], row-major, c fully overwritten
void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n);
// out[cols x rows] = a[rows x cols]^T (data movement only, never dispatched)
void transpose(const double* a, double* out, std::size_t rows, std::size_t cols);
// out = a + b
void add(const double* a, const double* b, double* out, std::size_t n);
// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);
// out = alpha * x
void scale(const double* x, double alpha, double* out, std::size_t n);
// out = max(x, 0)
void relu(const double* x, double* out, std::size_t n);
// out = g where x > 0, else 0
void relu_backward(const double* x, const double* g, double* out, std::size_t n);

namespace scalar {
void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n);
void add(const double* a, const double* b, double* out, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(const double* x, double alpha, double* out, std::size_t n);
void relu(const double* x, double* out, std::size_t n);
void relu_backward(const double* x, const double* g, double* out, std::size_t n);
}  // namespace scalar

#if defined(MAZEADAPT_HAVE_AVX2)
namespace avx2 {
void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n);
void add(const double* a, const double* b, double* out, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(const double* x, double alpha, double* out, std::size_t n);
void relu(const double* x, double* out, std::size_t n);
void relu_backward(const double* x, const double* g, double* out, std::size_t n);
}  // namespace avx2
#endif

}  // namespace mazeadapt::kernels
