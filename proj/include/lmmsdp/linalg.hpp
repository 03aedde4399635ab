#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lmmsdp/matrix.hpp"

namespace lmmsdp {

struct EigenDecomposition {
  std::vector<double> values;  // ascending
  Matrix vectors;              // column j is the eigenvector of values[j]
};

// Cyclic Jacobi on a dense symmetric matrix.
EigenDecomposition eigh(const SymMatrix& s);
std::vector<double> eigenvalues(const SymMatrix& s);
double min_eigenvalue(const SymMatrix& s);
double max_eigenvalue(const SymMatrix& s);
double spectral_norm(const SymMatrix& s);

// Lower-triangular L with L L^T = S. Throws NotPositiveDefinite when a pivot
// falls to 1e-12 times the largest diagonal entry or below.
Matrix cholesky(const SymMatrix& s);
// S^{-1/2}; eigenvalues at or below 1e-12 * ||S||_2 raise NotPositiveDefinite.
SymMatrix inv_sqrt(const SymMatrix& s);
// Principal square root of a PSD matrix (negative round-off clipped to 0).
SymMatrix sqrt_psd(const SymMatrix& s);

// (P (*) Q) K = (P K Q^T + Q K P^T) / 2.
SymMatrix sym_kron_apply(const SymMatrix& p, const SymMatrix& q, const SymMatrix& k);
// Matrix of the operator above in svec coordinates, size n(n+1)/2.
Matrix sym_kron_matrix(const SymMatrix& p, const SymMatrix& q);

// LU factorization with partial pivoting of a square matrix.
class LuFactor {
 public:
  LuFactor() = default;
  explicit LuFactor(Matrix a);

  std::size_t dim() const noexcept { return lu_.rows(); }
  // True when a zero pivot was met; solve() is then undefined.
  bool singular() const noexcept { return singular_; }
  // Ratio of smallest to largest |U_ii|, a cheap conditioning indicator.
  double pivot_ratio() const noexcept { return pivot_ratio_; }
  void solve_in_place(std::span<double> b) const;
  std::vector<double> solve(std::span<const double> b) const;

 private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
  bool singular_ = false;
  double pivot_ratio_ = 0.0;
};

namespace dense {

// In-place Jacobi eigensolver on raw row-major storage. `a` (n x n) is
// destroyed; rows of `vt` receive the eigenvectors; `w` the eigenvalues in
// ascending order. `vt` may be null when only eigenvalues are needed.
// `scratch` needs n doubles.
void jacobi_eigh(std::size_t n, double* a, double* vt, double* w, double* scratch);

// In-place lower Cholesky of raw storage; returns false on a pivot at or
// below `floor` (the failing index written to *bad).
bool cholesky_in_place(std::size_t n, double* a, double floor, std::size_t* bad);

}  // namespace dense

}  // namespace lmmsdp
