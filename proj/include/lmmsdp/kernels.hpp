#pragma once

#include <cstddef>
#include <string_view>

// Dense double-precision kernels with a scalar reference implementation and
// an AVX2+FMA variant. The active table is chosen once from CPUID and can be
// pinned for reproducible replays.
namespace lmmsdp::kernels {

enum class Isa { Scalar, Avx2 };

struct Table {
  // sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // C (m x n) = A (m x k) * B (k x n), all row-major and contiguous.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const double* a,
               const double* b, double* c);
  // C (m x n) = A^T * B with A (k x m) and B (k x n).
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c);
  // Plane rotation: x' = c x - s y, y' = s x + c y.
  void (*rot)(double* x, double* y, std::size_t n, double c, double s);
};

const Table& scalar_table();
// Throws lmmsdp::NotAvailable when the CPU lacks AVX2/FMA.
const Table& avx2_table();

bool supported(Isa isa);
Isa active_isa();
const Table& active();
// Pins the table used by active(). Throws NotAvailable when unsupported.
void select(Isa isa);
// Restores CPUID-based selection.
void select_auto();

std::string_view name(Isa isa);
Isa parse_isa(std::string_view text);

}  // namespace lmmsdp::kernels
