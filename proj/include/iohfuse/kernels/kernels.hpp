#pragma once

// Dense double-precision inner loops used by the autograd engine and the
// signal-processing code. Every kernel has a scalar reference in
// kernels::scalar and vectorized variants (AVX2+FMA on x86-64, NEON on
// aarch64) selected once at startup from the CPU feature bits.
//
// Matrices are row-major and contiguous; leading dimension == column count.

#include <cstddef>
#include <string_view>

namespace iohfuse::kernels {

enum class Isa { scalar, avx2, neon };

/// Kernel table. All gemm variants accumulate into C (C += op(A) * op(B)).
struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*sum_sq_diff)(const double* a, const double* b, std::size_t n);
  // C[m x n] += A[m x k] * B[k x n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c);
  // C[m x n] += A[m x k] * B[n x k]^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c);
  // C[m x n] += A[k x m]^T * B[k x n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c);
};

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double sum_sq_diff(const double* a, const double* b, std::size_t n);
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c);
}  // namespace scalar

/// Table for a specific ISA. Throws std::runtime_error when the ISA was
/// not compiled in or the running CPU lacks it.
const KernelTable& table_for(Isa isa);

/// Whether the ISA is compiled in and supported by the running CPU.
bool isa_available(Isa isa);

/// Currently active table (best available ISA unless overridden).
const KernelTable& active();

/// Active ISA.
Isa active_isa();

/// Override the active ISA; used by equivalence tests and `--scalar-kernels`.
void set_active_isa(Isa isa);

std::string_view isa_name(Isa isa);

inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
inline void axpy(double alpha, const double* x, double* y, std::size_t n) { active().axpy(alpha, x, y, n); }
inline double sum_sq_diff(const double* a, const double* b, std::size_t n) { return active().sum_sq_diff(a, b, n); }
inline void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  active().gemm_nn(m, n, k, a, b, c);
}
inline void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  active().gemm_nt(m, n, k, a, b, c);
}
inline void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  active().gemm_tn(m, n, k, a, b, c);
}

}  // namespace iohfuse::kernels
