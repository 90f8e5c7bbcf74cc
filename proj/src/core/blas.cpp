#include "core/blas.hpp"

#include <dlfcn.h>

#include <cstdlib>
#include <cstring>
#include <mutex>
#include <string>

#include "core/parallel.hpp"

namespace lsen {

namespace {

// CBLAS ABI constants (stable across implementations).
constexpr int kRowMajor = 101;
constexpr int kNoTrans = 111;
constexpr int kTrans = 112;

using sgemm_fn = void (*)(int, int, int, int, int, int, float, const float*, int, const float*,
                          int, float, float*, int);
using dgemm_fn = void (*)(int, int, int, int, int, int, double, const double*, int, const double*,
                          int, double, double*, int);

struct Backend {
  sgemm_fn sgemm = nullptr;
  dgemm_fn dgemm = nullptr;
  std::string name = "builtin";
};

Backend load_backend() {
  Backend be;
  if (const char* forced = std::getenv("LSEN_BLAS"); forced && std::strcmp(forced, "builtin") == 0)
    return be;
  if (!std::getenv("OPENBLAS_CORETYPE")) {
    // Pick a kernel family from actual ISA support; CPUID model detection is
    // unreliable inside containers and falls back to a pre-SSE3-era kernel.
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
      setenv("OPENBLAS_CORETYPE", "HASWELL", 0);
  }
  // Single-threaded BLAS: the caller provides outer parallelism.
  setenv("OPENBLAS_NUM_THREADS", "1", 0);
  for (const char* lib : {"libopenblas.so.0", "libopenblas.so", "libcblas.so.3", "libcblas.so"}) {
    void* h = dlopen(lib, RTLD_NOW | RTLD_LOCAL);
    if (!h) continue;
    auto sg = reinterpret_cast<sgemm_fn>(dlsym(h, "cblas_sgemm"));
    auto dg = reinterpret_cast<dgemm_fn>(dlsym(h, "cblas_dgemm"));
    if (sg && dg) {
      be.sgemm = sg;
      be.dgemm = dg;
      be.name = lib;
      if (auto core = reinterpret_cast<char* (*)()>(dlsym(h, "openblas_get_corename")))
        be.name = std::string("openblas/") + core();
      if (auto set_threads = reinterpret_cast<void (*)(int)>(dlsym(h, "openblas_set_num_threads")))
        set_threads(1);
      return be;
    }
    dlclose(h);
  }
  return be;
}

const Backend& backend() {
  static Backend be = load_backend();
  return be;
}

// Portable fallback: blocked over K for locality, row-major, no transpose
// support beyond explicit index math. Correct but far slower than BLAS.
template <typename T>
void gemm_builtin(bool ta, bool tb, int64_t m, int64_t n, int64_t k, T alpha, const T* a,
                  int64_t lda, const T* b, int64_t ldb, T beta, T* c, int64_t ldc) {
  for (int64_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    if (beta == T(0)) {
      for (int64_t j = 0; j < n; ++j) crow[j] = T(0);
    } else if (beta != T(1)) {
      for (int64_t j = 0; j < n; ++j) crow[j] *= beta;
    }
    for (int64_t p = 0; p < k; ++p) {
      const T aval = alpha * (ta ? a[p * lda + i] : a[i * lda + p]);
      if (aval == T(0)) continue;
      const T* brow = tb ? nullptr : b + p * ldb;
      if (!tb) {
        for (int64_t j = 0; j < n; ++j) crow[j] += aval * brow[j];
      } else {
        for (int64_t j = 0; j < n; ++j) crow[j] += aval * b[j * ldb + p];
      }
    }
  }
}

// Splits the N dimension across the worker pool; each part is an independent
// single-threaded GEMM writing a disjoint column block of C.
template <typename T, typename Fn>
void gemm_dispatch(Fn fn, bool ta, bool tb, int64_t m, int64_t n, int64_t k, T alpha, const T* a,
                   int64_t lda, const T* b, int64_t ldb, T beta, T* c, int64_t ldc) {
  const double flops = 2.0 * static_cast<double>(m) * n * k;
  if (flops < 4e5 || num_threads() == 1) {
    fn(kRowMajor, ta ? kTrans : kNoTrans, tb ? kTrans : kNoTrans, static_cast<int>(m),
       static_cast<int>(n), static_cast<int>(k), alpha, a, static_cast<int>(lda), b,
       static_cast<int>(ldb), beta, c, static_cast<int>(ldc));
    return;
  }
  parallel_for(n, [&](int64_t j0, int64_t j1) {
    const T* bp = tb ? b + j0 * ldb : b + j0;
    fn(kRowMajor, ta ? kTrans : kNoTrans, tb ? kTrans : kNoTrans, static_cast<int>(m),
       static_cast<int>(j1 - j0), static_cast<int>(k), alpha, a, static_cast<int>(lda), bp,
       static_cast<int>(ldb), beta, c + j0, static_cast<int>(ldc));
  });
}

}  // namespace

void gemm(bool ta, bool tb, int64_t m, int64_t n, int64_t k, float alpha, const float* a,
          int64_t lda, const float* b, int64_t ldb, float beta, float* c, int64_t ldc) {
  if (backend().sgemm)
    gemm_dispatch<float>(backend().sgemm, ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
  else
    gemm_builtin(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void gemm(bool ta, bool tb, int64_t m, int64_t n, int64_t k, double alpha, const double* a,
          int64_t lda, const double* b, int64_t ldb, double beta, double* c, int64_t ldc) {
  if (backend().dgemm)
    gemm_dispatch<double>(backend().dgemm, ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
  else
    gemm_builtin(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

const char* blas_backend() { return backend().name.c_str(); }

}  // namespace lsen
