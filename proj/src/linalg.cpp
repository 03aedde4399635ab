#include "lmmsdp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lmmsdp/errors.hpp"
#include "lmmsdp/kernels.hpp"

namespace lmmsdp {

namespace dense {

void jacobi_eigh(std::size_t n, double* a, double* vt, double* w, double* scratch) {
  const auto& k = kernels::active();
  if (vt) {
    std::fill(vt, vt + n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) vt[i * n + i] = 1.0;
  }

  double norm2 = 0.0;
  for (std::size_t i = 0; i < n * n; ++i) norm2 += a[i] * a[i];
  const double eps = std::numeric_limits<double>::epsilon();
  const double floor = std::max(std::numeric_limits<double>::min(), eps * eps * std::sqrt(norm2));

  constexpr int kMaxSweeps = 80;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        const double app = a[p * n + p];
        const double aqq = a[q * n + q];
        if (std::abs(apq) <= floor ||
            std::abs(apq) <= 0.5 * eps * std::sqrt(std::abs(app) * std::abs(aqq)))
          continue;
        rotated = true;
        const double theta = (aqq - app) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 0.5 / theta;
        } else {
          t = 1.0 / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
          if (theta < 0.0) t = -t;
        }
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        k.rot(a + p * n, a + q * n, n, c, s);
        a[p * n + p] = app - t * apq;
        a[q * n + q] = aqq + t * apq;
        a[p * n + q] = 0.0;
        a[q * n + p] = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          a[r * n + p] = a[p * n + r];
          a[r * n + q] = a[q * n + r];
        }
        if (vt) k.rot(vt + p * n, vt + q * n, n, c, s);
      }
    }
    if (!rotated) break;
  }

  for (std::size_t i = 0; i < n; ++i) w[i] = a[i * n + i];
  // Selection sort keeps the eigenvector rows aligned without extra storage.
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = i;
    for (std::size_t j = i + 1; j < n; ++j)
      if (w[j] < w[best]) best = j;
    if (best != i) {
      std::swap(w[i], w[best]);
      if (!vt) continue;
      std::copy(vt + i * n, vt + i * n + n, scratch);
      std::copy(vt + best * n, vt + best * n + n, vt + i * n);
      std::copy(scratch, scratch + n, vt + best * n);
    }
  }
}

bool cholesky_in_place(std::size_t n, double* a, double floor, std::size_t* bad) {
  const auto& k = kernels::active();
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j] - k.dot(a + j * n, a + j * n, j);
    if (!(d > floor)) {
      if (bad) *bad = j;
      return false;
    }
    d = std::sqrt(d);
    a[j * n + j] = d;
    for (std::size_t i = j + 1; i < n; ++i)
      a[i * n + j] = (a[i * n + j] - k.dot(a + i * n, a + j * n, j)) / d;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a[i * n + j] = 0.0;
  return true;
}

}  // namespace dense

EigenDecomposition eigh(const SymMatrix& s) {
  const std::size_t n = s.dim();
  Matrix a = s.matrix();
  Matrix vt(n, n);
  std::vector<double> w(n);
  std::vector<double> scratch(n);
  dense::jacobi_eigh(n, a.data(), vt.data(), w.data(), scratch.data());
  return {std::move(w), transpose(vt)};
}

std::vector<double> eigenvalues(const SymMatrix& s) { return eigh(s).values; }

double min_eigenvalue(const SymMatrix& s) { return eigenvalues(s).front(); }
double max_eigenvalue(const SymMatrix& s) { return eigenvalues(s).back(); }

double spectral_norm(const SymMatrix& s) {
  const auto w = eigenvalues(s);
  return std::max(std::abs(w.front()), std::abs(w.back()));
}

Matrix cholesky(const SymMatrix& s) {
  const std::size_t n = s.dim();
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(s(i, i)));
  Matrix l = s.matrix();
  std::size_t bad = 0;
  if (!dense::cholesky_in_place(n, l.data(), 1e-12 * scale, &bad))
    throw NotPositiveDefinite("matrix is not positive definite (pivot " + std::to_string(bad) + ")",
                              bad);
  return l;
}

namespace {

SymMatrix spectral_function(const EigenDecomposition& e, const std::vector<double>& f) {
  const std::size_t n = f.size();
  Matrix scaled = e.vectors;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) scaled(i, j) *= f[j];
  Matrix r(n, n);
  kernels::active().gemm(n, n, n, scaled.data(), transpose(e.vectors).data(), r.data());
  return SymMatrix::symmetrized(std::move(r));
}

}  // namespace

SymMatrix inv_sqrt(const SymMatrix& s) {
  const auto e = eigh(s);
  const double norm = std::max(std::abs(e.values.front()), std::abs(e.values.back()));
  std::vector<double> f(e.values.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!(e.values[i] > 1e-12 * norm))
      throw NotPositiveDefinite("matrix is not positive definite (eigenvalue " +
                                    std::to_string(e.values[i]) + ")",
                                i);
    f[i] = 1.0 / std::sqrt(e.values[i]);
  }
  return spectral_function(e, f);
}

SymMatrix sqrt_psd(const SymMatrix& s) {
  const auto e = eigh(s);
  std::vector<double> f(e.values.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::sqrt(std::max(0.0, e.values[i]));
  return spectral_function(e, f);
}

SymMatrix sym_kron_apply(const SymMatrix& p, const SymMatrix& q, const SymMatrix& k) {
  const std::size_t n = p.dim();
  if (q.dim() != n || k.dim() != n) throw InvalidInput("sym_kron_apply dimension mismatch");
  const Matrix pk = p.matrix() * k.matrix();
  const Matrix pkq = pk * transpose(q.matrix());
  Matrix r(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) r(i, j) = 0.5 * (pkq(i, j) + pkq(j, i));
  return SymMatrix::symmetrized(std::move(r));
}

Matrix sym_kron_matrix(const SymMatrix& p, const SymMatrix& q) {
  const std::size_t n = p.dim();
  if (q.dim() != n) throw InvalidInput("sym_kron_matrix dimension mismatch");
  const std::size_t d = svec_size(n);
  Matrix g(d, d);
  // Entry for output (i, j) and input (k, l), both lower-triangular pairs:
  //   r_ij * c_kl * (P_ik Q_jl + P_jl Q_ik + P_il Q_jk + P_jk Q_il) / 2
  // with r_ij = sqrt2 off the diagonal (svec row scaling) and c_kl = 1/sqrt2
  // off the diagonal, 1/2 on it (smat column scaling and double counting).
  std::size_t row = 0;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = j; i < n; ++i, ++row) {
      const double r = (i == j) ? 1.0 : M_SQRT2;
      std::size_t col = 0;
      for (std::size_t l = 0; l < n; ++l) {
        for (std::size_t kk = l; kk < n; ++kk, ++col) {
          const double c = (kk == l) ? 0.5 : M_SQRT1_2;
          const double t = p(i, kk) * q(j, l) + p(j, l) * q(i, kk) + p(i, l) * q(j, kk) +
                           p(j, kk) * q(i, l);
          g(row, col) = 0.5 * r * c * t;
        }
      }
    }
  }
  return g;
}

LuFactor::LuFactor(Matrix a) : lu_(std::move(a)) {
  const std::size_t n = lu_.rows();
  if (lu_.cols() != n) throw InvalidInput("LU factorization needs a square matrix");
  perm_.resize(n);
  for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
  double umax = 0.0;
  double umin = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    double best = std::abs(lu_(c, c));
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(lu_(r, c)) > best) {
        best = std::abs(lu_(r, c));
        piv = r;
      }
    if (piv != c) {
      std::swap_ranges(lu_.row(c), lu_.row(c) + n, lu_.row(piv));
      std::swap(perm_[c], perm_[piv]);
    }
    umax = std::max(umax, best);
    umin = std::min(umin, best);
    if (best == 0.0 || !std::isfinite(best)) {
      singular_ = true;
      continue;
    }
    const double inv = 1.0 / lu_(c, c);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = lu_(r, c) * inv;
      lu_(r, c) = f;
      if (f != 0.0) kernels::active().axpy(-f, lu_.row(c) + c + 1, lu_.row(r) + c + 1, n - c - 1);
    }
  }
  pivot_ratio_ = (n == 0 || umax == 0.0) ? 0.0 : umin / umax;
}

void LuFactor::solve_in_place(std::span<double> b) const {
  const std::size_t n = dim();
  if (b.size() != n) throw InvalidInput("LU solve dimension mismatch");
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i];
    for (std::size_t j = 0; j < i; ++j) s -= lu_(i, j) * x[j];
    x[i] = s;
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = x[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= lu_(i, j) * x[j];
    x[i] = s / lu_(i, i);
  }
  std::copy(x.begin(), x.end(), b.begin());
}

std::vector<double> LuFactor::solve(std::span<const double> b) const {
  std::vector<double> x(b.begin(), b.end());
  solve_in_place(x);
  return x;
}

}  // namespace lmmsdp
