#include "lmmsdp/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lmmsdp/errors.hpp"
#include "lmmsdp/kernels.hpp"

namespace lmmsdp {

Matrix::Matrix(std::size_t rows, std::size_t cols, double value)
    : rows_(rows), cols_(cols), values_(rows * cols, value) {}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw InvalidInput("ragged matrix literal");
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw InvalidInput("matrix product dimension mismatch");
  Matrix c(a.rows(), b.cols());
  kernels::active().gemm(a.rows(), b.cols(), a.cols(), a.data(), b.data(), c.data());
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

std::vector<double> operator*(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw InvalidInput("matrix-vector dimension mismatch");
  std::vector<double> y(a.rows());
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = k.dot(a.row(i), x.data(), x.size());
  return y;
}

SymMatrix::SymMatrix(std::size_t n, double diagonal) : m_(n, n) {
  for (std::size_t i = 0; i < n; ++i) m_(i, i) = diagonal;
}

SymMatrix::SymMatrix(const Matrix& m) : m_(m) {
  if (m.rows() != m.cols()) throw InvalidInput("symmetric matrix must be square");
  const std::size_t n = m.rows();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double a = m(i, j);
      const double b = m(j, i);
      if (!std::isfinite(a) || !std::isfinite(b))
        throw InvalidInput("non-finite matrix entry");
      if (std::abs(a - b) > 1e-12 * std::max(1.0, std::abs(a)))
        throw InvalidInput("matrix is not symmetric at (" + std::to_string(i) + "," +
                           std::to_string(j) + ")");
      const double avg = 0.5 * (a + b);
      m_(i, j) = avg;
      m_(j, i) = avg;
    }
    if (!std::isfinite(m(i, i))) throw InvalidInput("non-finite matrix entry");
  }
}

SymMatrix SymMatrix::diagonal(std::span<const double> d) {
  SymMatrix s(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) s.m_(i, i) = d[i];
  return s;
}

SymMatrix SymMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  return SymMatrix(Matrix::from_rows(rows));
}

SymMatrix SymMatrix::outer(std::span<const double> v, double scale) {
  SymMatrix s(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) s.m_(i, j) = scale * v[i] * v[j];
  return s;
}

SymMatrix SymMatrix::symmetrized(Matrix m) {
  const std::size_t n = m.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (m(i, j) + m(j, i));
      m(i, j) = avg;
      m(j, i) = avg;
    }
  SymMatrix s;
  s.m_ = std::move(m);
  return s;
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& o) { return add_scaled(1.0, o); }
SymMatrix& SymMatrix::operator-=(const SymMatrix& o) { return add_scaled(-1.0, o); }

SymMatrix& SymMatrix::operator*=(double s) {
  for (double& v : m_.values()) v *= s;
  return *this;
}

SymMatrix& SymMatrix::add_scaled(double s, const SymMatrix& o) {
  if (o.dim() != dim()) throw InvalidInput("symmetric matrix dimension mismatch");
  kernels::active().axpy(s, o.data(), m_.data(), m_.size());
  return *this;
}

SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
SymMatrix operator*(double s, SymMatrix a) { return a *= s; }

double trace(const SymMatrix& a) {
  double t = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) t += a(i, i);
  return t;
}

double dot(const SymMatrix& a, const SymMatrix& b) {
  if (a.dim() != b.dim()) throw InvalidInput("symmetric matrix dimension mismatch");
  return kernels::active().dot(a.data(), b.data(), a.dim() * a.dim());
}

double frobenius_norm(const SymMatrix& a) { return std::sqrt(dot(a, a)); }

bool is_zero(const SymMatrix& a) {
  return std::all_of(a.matrix().values().begin(), a.matrix().values().end(),
                     [](double v) { return v == 0.0; });
}

SymMatrix congruence_t(const Matrix& q, const SymMatrix& a) {
  const std::size_t n = a.dim();
  if (q.rows() != n || q.cols() != n) throw InvalidInput("congruence dimension mismatch");
  const auto& k = kernels::active();
  Matrix t(n, n);
  Matrix r(n, n);
  k.gemm(n, n, n, a.data(), q.data(), t.data());
  k.gemm_tn(n, n, n, q.data(), t.data(), r.data());
  return SymMatrix::symmetrized(std::move(r));
}

SymMatrix congruence(const Matrix& q, const SymMatrix& a) {
  return congruence_t(transpose(q), a);
}

BlockDiagMatrix::BlockDiagMatrix(std::vector<SymMatrix> blocks) : blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw InvalidInput("block-diagonal matrix needs at least one block");
  for (const auto& b : blocks_)
    if (b.dim() == 0) throw InvalidInput("empty diagonal block");
}

BlockDiagMatrix BlockDiagMatrix::zeros(std::span<const std::size_t> dims) {
  return scaled_identity(dims, 0.0);
}

BlockDiagMatrix BlockDiagMatrix::scaled_identity(std::span<const std::size_t> dims, double s) {
  std::vector<SymMatrix> blocks;
  blocks.reserve(dims.size());
  for (std::size_t d : dims) blocks.emplace_back(d, s);
  return BlockDiagMatrix(std::move(blocks));
}

std::vector<std::size_t> BlockDiagMatrix::dims() const {
  std::vector<std::size_t> d;
  d.reserve(blocks_.size());
  for (const auto& b : blocks_) d.push_back(b.dim());
  return d;
}

std::size_t BlockDiagMatrix::total_dim() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += b.dim();
  return n;
}

void require_conforming(const BlockDiagMatrix& a, const BlockDiagMatrix& b) {
  if (a.num_blocks() != b.num_blocks()) throw InvalidInput("block count mismatch");
  for (std::size_t i = 0; i < a.num_blocks(); ++i)
    if (a.block(i).dim() != b.block(i).dim()) throw InvalidInput("block dimension mismatch");
}

BlockDiagMatrix& BlockDiagMatrix::operator+=(const BlockDiagMatrix& o) { return add_scaled(1.0, o); }
BlockDiagMatrix& BlockDiagMatrix::operator-=(const BlockDiagMatrix& o) { return add_scaled(-1.0, o); }

BlockDiagMatrix& BlockDiagMatrix::operator*=(double s) {
  for (auto& b : blocks_) b *= s;
  return *this;
}

BlockDiagMatrix& BlockDiagMatrix::add_scaled(double s, const BlockDiagMatrix& o) {
  require_conforming(*this, o);
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].add_scaled(s, o.blocks_[i]);
  return *this;
}

BlockDiagMatrix operator+(BlockDiagMatrix a, const BlockDiagMatrix& b) { return a += b; }
BlockDiagMatrix operator-(BlockDiagMatrix a, const BlockDiagMatrix& b) { return a -= b; }
BlockDiagMatrix operator*(double s, BlockDiagMatrix a) { return a *= s; }

double trace(const BlockDiagMatrix& a) {
  double t = 0.0;
  for (const auto& b : a.blocks()) t += trace(b);
  return t;
}

double dot(const BlockDiagMatrix& a, const BlockDiagMatrix& b) {
  require_conforming(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.num_blocks(); ++i) s += dot(a.block(i), b.block(i));
  return s;
}

double frobenius_norm(const BlockDiagMatrix& a) { return std::sqrt(dot(a, a)); }

std::size_t svec_size(std::size_t n) { return n * (n + 1) / 2; }

std::size_t svec_index(std::size_t n, std::size_t i, std::size_t j) {
  if (i < j) std::swap(i, j);
  return j * n - (j * (j - 1)) / 2 + (i - j);
}

SVec svec(const SymMatrix& s) {
  const std::size_t n = s.dim();
  SVec v{n, std::vector<double>(svec_size(n))};
  std::size_t k = 0;
  for (std::size_t j = 0; j < n; ++j) {
    v.values[k++] = s(j, j);
    for (std::size_t i = j + 1; i < n; ++i) v.values[k++] = M_SQRT2 * s(i, j);
  }
  return v;
}

SVec svec(const Matrix& s) { return svec(SymMatrix(s)); }

SymMatrix smat(std::span<const double> v) {
  const auto n = static_cast<std::size_t>(std::llround((std::sqrt(8.0 * v.size() + 1.0) - 1.0) / 2.0));
  if (svec_size(n) != v.size() || n == 0)
    throw InvalidInput("svec length " + std::to_string(v.size()) + " is not a triangular number");
  Matrix m(n, n);
  std::size_t k = 0;
  for (std::size_t j = 0; j < n; ++j) {
    m(j, j) = v[k++];
    for (std::size_t i = j + 1; i < n; ++i) {
      const double x = v[k++] / M_SQRT2;
      m(i, j) = x;
      m(j, i) = x;
    }
  }
  return SymMatrix::symmetrized(std::move(m));
}

SymMatrix smat(const SVec& v) {
  if (svec_size(v.n) != v.values.size()) throw InvalidInput("svec length does not match n");
  return smat(std::span<const double>(v.values));
}

}  // namespace lmmsdp
