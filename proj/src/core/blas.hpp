#pragma once

#include <cstdint>

namespace lsen {

// Row-major GEMM: C = alpha * op(A) * op(B) + beta * C.
// op(A) is M x K, op(B) is K x N, C is M x N; lda/ldb/ldc are leading
// dimensions of the stored (untransposed) matrices.
//
// Backed by a BLAS library when one can be loaded at runtime, otherwise by a
// portable blocked kernel. The library is loaded with dlopen rather than
// linked: the CPU kernel selection of common BLAS builds happens in a load
// time constructor driven by environment variables, and this process must be
// able to set those variables first (container environments frequently mask
// CPUID, which otherwise silently selects a generic slow kernel).
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, float alpha,
          const float* a, int64_t lda, const float* b, int64_t ldb, float beta, float* c,
          int64_t ldc);
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, double alpha,
          const double* a, int64_t lda, const double* b, int64_t ldb, double beta, double* c,
          int64_t ldc);

// Human-readable description of the active backend ("openblas/Haswell", "builtin", ...).
const char* blas_backend();

}  // namespace lsen
