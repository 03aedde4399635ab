#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace lmmsdp {

// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double value = 0.0);
  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }

  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }
  double* row(std::size_t i) { return values_.data() + i * cols_; }
  const double* row(std::size_t i) const { return values_.data() + i * cols_; }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
std::vector<double> operator*(const Matrix& a, std::span<const double> x);

// Dense symmetric matrix. Construction from a general matrix accepts
// asymmetry up to 1e-12 * max(1, |a_ij|) and averages the two triangles.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t n, double diagonal = 0.0);
  explicit SymMatrix(const Matrix& m);
  static SymMatrix identity(std::size_t n) { return SymMatrix(n, 1.0); }
  static SymMatrix diagonal(std::span<const double> d);
  static SymMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static SymMatrix outer(std::span<const double> v, double scale = 1.0);
  // Skips the tolerance check; the caller guarantees symmetry up to
  // round-off and the triangles are averaged.
  static SymMatrix symmetrized(Matrix m);

  std::size_t dim() const noexcept { return m_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  void set(std::size_t i, std::size_t j, double v) {
    m_(i, j) = v;
    m_(j, i) = v;
  }
  void add(std::size_t i, std::size_t j, double v) {
    m_(i, j) += v;
    if (i != j) m_(j, i) += v;
  }
  const Matrix& matrix() const noexcept { return m_; }
  const double* data() const noexcept { return m_.data(); }
  // Raw storage for kernels that preserve symmetry themselves.
  double* unchecked_data() noexcept { return m_.data(); }

  SymMatrix& operator+=(const SymMatrix& o);
  SymMatrix& operator-=(const SymMatrix& o);
  SymMatrix& operator*=(double s);
  // this += s * o
  SymMatrix& add_scaled(double s, const SymMatrix& o);

 private:
  Matrix m_;
};

SymMatrix operator+(SymMatrix a, const SymMatrix& b);
SymMatrix operator-(SymMatrix a, const SymMatrix& b);
SymMatrix operator*(double s, SymMatrix a);
double trace(const SymMatrix& a);
// Tr(AB) for symmetric A, B.
double dot(const SymMatrix& a, const SymMatrix& b);
double frobenius_norm(const SymMatrix& a);
bool is_zero(const SymMatrix& a);
// Congruence Q^T A Q with a general square Q.
SymMatrix congruence_t(const Matrix& q, const SymMatrix& a);
// Congruence Q A Q^T.
SymMatrix congruence(const Matrix& q, const SymMatrix& a);

class BlockDiagMatrix {
 public:
  BlockDiagMatrix() = default;
  explicit BlockDiagMatrix(std::vector<SymMatrix> blocks);
  static BlockDiagMatrix zeros(std::span<const std::size_t> dims);
  static BlockDiagMatrix scaled_identity(std::span<const std::size_t> dims, double s);

  std::size_t num_blocks() const noexcept { return blocks_.size(); }
  const SymMatrix& block(std::size_t b) const { return blocks_[b]; }
  SymMatrix& block(std::size_t b) { return blocks_[b]; }
  const std::vector<SymMatrix>& blocks() const noexcept { return blocks_; }
  std::vector<std::size_t> dims() const;
  std::size_t total_dim() const;

  BlockDiagMatrix& operator+=(const BlockDiagMatrix& o);
  BlockDiagMatrix& operator-=(const BlockDiagMatrix& o);
  BlockDiagMatrix& operator*=(double s);
  BlockDiagMatrix& add_scaled(double s, const BlockDiagMatrix& o);

 private:
  std::vector<SymMatrix> blocks_;
};

BlockDiagMatrix operator+(BlockDiagMatrix a, const BlockDiagMatrix& b);
BlockDiagMatrix operator-(BlockDiagMatrix a, const BlockDiagMatrix& b);
BlockDiagMatrix operator*(double s, BlockDiagMatrix a);
double trace(const BlockDiagMatrix& a);
double dot(const BlockDiagMatrix& a, const BlockDiagMatrix& b);
double frobenius_norm(const BlockDiagMatrix& a);
// Throws InvalidInput unless a and b share block dimensions.
void require_conforming(const BlockDiagMatrix& a, const BlockDiagMatrix& b);

// Isometric vectorization: stacked lower triangle (column by column) with
// off-diagonal entries scaled by sqrt(2).
struct SVec {
  std::size_t n = 0;
  std::vector<double> values;
};

std::size_t svec_size(std::size_t n);
// Position of entry (i, j), i >= j, inside svec of an n x n matrix.
std::size_t svec_index(std::size_t n, std::size_t i, std::size_t j);
SVec svec(const SymMatrix& s);
SVec svec(const Matrix& s);
SymMatrix smat(const SVec& v);
SymMatrix smat(std::span<const double> v);

}  // namespace lmmsdp
