#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>

#include "lmmsdp/cone_program.hpp"
#include "lmmsdp/errors.hpp"
#include "lmmsdp/kernels.hpp"
#include "lmmsdp/linalg.hpp"

namespace lmmsdp {

std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::PrimalInfeasible: return "primal_infeasible";
    case SolveStatus::DualInfeasible: return "dual_infeasible";
    case SolveStatus::MaxIterations: return "max_iterations";
    case SolveStatus::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

void ConeProgram::validate() const {
  if (blocks.empty()) throw InvalidInput("cone program has no blocks");
  for (std::size_t d : blocks)
    if (d == 0) throw InvalidInput("cone program block of dimension 0");
  auto conforms = [&](const BlockDiagMatrix& m) {
    if (m.num_blocks() != blocks.size()) return false;
    for (std::size_t b = 0; b < blocks.size(); ++b)
      if (m.block(b).dim() != blocks[b]) return false;
    return true;
  };
  if (!conforms(c)) throw InvalidInput("objective does not match the block structure");
  for (std::size_t k = 0; k < constraints.size(); ++k) {
    if (!conforms(constraints[k].a))
      throw InvalidInput("constraint " + std::to_string(k) + " does not match the block structure");
    if (!std::isfinite(constraints[k].b))
      throw InvalidInput("constraint " + std::to_string(k) + " has a non-finite right-hand side");
  }
}

BlockDiagMatrix min_form_objective(const ConeProgram& p) {
  BlockDiagMatrix c = p.c;
  if (p.sense == Sense::Maximize) c *= -1.0;
  return c;
}

std::vector<double> apply_constraints(const ConeProgram& p, const BlockDiagMatrix& x) {
  std::vector<double> ax(p.constraints.size());
  for (std::size_t k = 0; k < ax.size(); ++k) ax[k] = dot(p.constraints[k].a, x);
  return ax;
}

BlockDiagMatrix apply_adjoint(const ConeProgram& p, const std::vector<double>& y) {
  if (y.size() != p.constraints.size()) throw InvalidInput("dual vector length mismatch");
  auto out = BlockDiagMatrix::zeros(p.blocks);
  for (std::size_t k = 0; k < y.size(); ++k)
    if (y[k] != 0.0) out.add_scaled(y[k], p.constraints[k].a);
  return out;
}

KktReport check_kkt(const ConeProgram& p, const ConeSolution& s) {
  KktReport r;
  const auto ax = apply_constraints(p, s.x);
  double res = 0.0;
  double bn = 0.0;
  for (std::size_t k = 0; k < ax.size(); ++k) {
    const double d = ax[k] - p.constraints[k].b;
    res += d * d;
    bn += p.constraints[k].b * p.constraints[k].b;
  }
  r.primal_residual = std::sqrt(res) / (1.0 + std::sqrt(bn));
  auto rd = min_form_objective(p);
  rd -= apply_adjoint(p, s.y);
  rd -= s.z;
  r.dual_residual = frobenius_norm(rd) / (1.0 + frobenius_norm(p.c));
  r.gap = dot(s.x, s.z);
  const double pobj = dot(p.c, s.x);
  r.relative_gap = std::abs(r.gap) / (1.0 + std::abs(pobj));
  r.min_eig_x = std::numeric_limits<double>::infinity();
  r.min_eig_z = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < s.x.num_blocks(); ++b) {
    r.min_eig_x = std::min(r.min_eig_x, min_eigenvalue(s.x.block(b)));
    r.min_eig_z = std::min(r.min_eig_z, min_eigenvalue(s.z.block(b)));
  }
  return r;
}

namespace {

// Per-block iterate and scratch storage. Quantities with a trailing `t` live
// in the eigenbasis of the current Z block, where Z is diagonal and the AHO
// operator E^{-1} is an elementwise division.
struct Block {
  std::size_t n = 0;
  Matrix c, x, z;
  Matrix q, qt;
  std::vector<double> lam;
  Matrix l;
  Matrix rd, xt, rdt, ht, dxt, dzt, dxt_a, dzt_a, zt;
  Matrix t1, t2;
  std::vector<double> w, scratch;

  explicit Block(std::size_t dim) : n(dim) {
    for (Matrix* m : {&c, &x, &z, &q, &qt, &l, &rd, &xt, &rdt, &ht, &dxt, &dzt, &dxt_a, &dzt_a,
                      &zt, &t1, &t2})
      *m = Matrix(n, n);
    lam.resize(n);
    w.resize(n);
    scratch.resize(n);
  }
};

double frob_dot(const Matrix& a, const Matrix& b) {
  return kernels::active().dot(a.data(), b.data(), a.size());
}

void symmetrize(Matrix& m) {
  const std::size_t n = m.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      m(i, j) = v;
      m(j, i) = v;
    }
}

class Solver {
 public:
  Solver(const ConeProgram& p, const SolverOptions& o) : p_(p), o_(o) {}
  ConeSolution run();

 private:
  void setup();
  bool check_rank(ConeSolution& out);
  void residuals();
  bool factor_schur();
  void solve_direction(std::vector<double>& dy, bool corrector);
  double primal_step_limit(bool use_affine);
  double dual_step_limit(bool use_affine);
  void rotate_in(Block& bk, const double* a, double* out);
  void rotate_out(Block& bk, const double* at, double* out);
  void finish(ConeSolution& out, SolveStatus status);

  const ConeProgram& p_;
  const SolverOptions& o_;

  std::size_t nb_ = 0;
  std::size_t m_ = 0;  // active constraints
  std::size_t ntot_ = 0;
  std::vector<Block> blocks_;
  std::vector<std::size_t> active_;  // original indices of active rows
  std::vector<double> scale_;        // ||A_k||_F of active rows
  std::vector<double> b_;            // scaled right-hand sides
  // a_[k][b]: scaled coefficient blocks; empty matrix when the block is zero.
  std::vector<std::vector<Matrix>> a_, at_, gt_;
  std::vector<double> y_, rp_;
  Matrix schur_;
  LuFactor lu_;
  double bnorm_orig_ = 0.0;
  double cnorm_ = 0.0;
  double pobj_ = 0.0, dobj_ = 0.0, gap_ = 0.0, mu_ = 0.0;
  double pres_ = 0.0, dres_ = 0.0, relgap_ = 0.0;
  double sigma_mu_ = 0.0;
  bool second_order_ = true;
  int iter_ = 0;
  std::vector<std::string> warnings_;
  std::vector<std::size_t> dropped_;

  // Best iterate by the worst tolerance ratio, restored on abnormal exits.
  void record_best();
  void restore_best();
  double best_merit_ = std::numeric_limits<double>::infinity();
  std::vector<Matrix> best_x_, best_z_;
  std::vector<double> best_y_;
  int best_iter_ = 0;
};

void Solver::record_best() {
  const double merit = std::max({pres_ / o_.tol_feas, dres_ / o_.tol_feas, relgap_ / o_.tol_gap});
  if (!(merit < best_merit_)) return;
  best_merit_ = merit;
  best_x_.resize(nb_);
  best_z_.resize(nb_);
  for (std::size_t b = 0; b < nb_; ++b) {
    best_x_[b] = blocks_[b].x;
    best_z_[b] = blocks_[b].z;
  }
  best_y_ = y_;
  best_iter_ = iter_;
}

void Solver::restore_best() {
  if (best_x_.empty()) return;
  for (std::size_t b = 0; b < nb_; ++b) {
    blocks_[b].x = best_x_[b];
    blocks_[b].z = best_z_[b];
  }
  y_ = best_y_;
  residuals();
}

void Solver::setup() {
  nb_ = p_.blocks.size();
  blocks_.reserve(nb_);
  const auto cmin = min_form_objective(p_);
  for (std::size_t b = 0; b < nb_; ++b) {
    blocks_.emplace_back(p_.blocks[b]);
    blocks_[b].c = cmin.block(b).matrix();
    ntot_ += p_.blocks[b];
  }
  cnorm_ = frobenius_norm(p_.c);
  double bn = 0.0;
  for (const auto& con : p_.constraints) bn += con.b * con.b;
  bnorm_orig_ = std::sqrt(bn);
}

// Gram-matrix pivoted Cholesky over the normalized rows. Dependent rows with
// a consistent right-hand side are dropped; an inconsistent one yields a
// Farkas ray immediately.
bool Solver::check_rank(ConeSolution& out) {
  const std::size_t mall = p_.constraints.size();
  std::vector<std::size_t> nonzero;
  std::vector<double> norms(mall, 0.0);
  for (std::size_t k = 0; k < mall; ++k) {
    norms[k] = frobenius_norm(p_.constraints[k].a);
    if (norms[k] > 0.0) {
      nonzero.push_back(k);
    } else if (p_.constraints[k].b != 0.0) {
      std::vector<double> cert(mall, 0.0);
      cert[k] = p_.constraints[k].b > 0 ? 1.0 : -1.0;
      out.certificate = cert;
      return false;
    } else {
      dropped_.push_back(k);
    }
  }
  const std::size_t mz = nonzero.size();
  Matrix g(mz, mz);
  for (std::size_t i = 0; i < mz; ++i)
    for (std::size_t j = i; j < mz; ++j) {
      const double v = dot(p_.constraints[nonzero[i]].a, p_.constraints[nonzero[j]].a) /
                       (norms[nonzero[i]] * norms[nonzero[j]]);
      g(i, j) = v;
      g(j, i) = v;
    }
  std::vector<std::size_t> perm(mz);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> d(mz);
  for (std::size_t i = 0; i < mz; ++i) d[i] = g(i, i);
  Matrix l(mz, mz);
  std::size_t rank = 0;
  constexpr double kDependentTol = 1e-18;
  for (; rank < mz; ++rank) {
    std::size_t best = rank;
    for (std::size_t i = rank + 1; i < mz; ++i)
      if (d[perm[i]] > d[perm[best]]) best = i;
    if (d[perm[best]] <= kDependentTol) break;
    std::swap(perm[rank], perm[best]);
    const std::size_t j = perm[rank];
    const double ljj = std::sqrt(d[j]);
    l(j, rank) = ljj;
    for (std::size_t ii = rank + 1; ii < mz; ++ii) {
      const std::size_t i = perm[ii];
      double s = g(i, j);
      for (std::size_t t = 0; t < rank; ++t) s -= l(i, t) * l(j, t);
      l(i, rank) = s / ljj;
      d[i] -= l(i, rank) * l(i, rank);
    }
  }
  std::vector<bool> keep(mz, false);
  for (std::size_t r = 0; r < rank; ++r) keep[perm[r]] = true;
  for (std::size_t rr = rank; rr < mz; ++rr) {
    const std::size_t i = perm[rr];
    // alpha solves L_K^T alpha = l(i, 0..rank) in pivot order.
    std::vector<double> alpha(rank);
    for (std::size_t t = rank; t-- > 0;) {
      double s = l(i, t);
      for (std::size_t u = t + 1; u < rank; ++u) s -= l(perm[u], t) * alpha[u];
      alpha[t] = s / l(perm[t], t);
    }
    const std::size_t ki = nonzero[i];
    const double bi = p_.constraints[ki].b / norms[ki];
    double pred = 0.0;
    double mag = std::abs(bi);
    for (std::size_t t = 0; t < rank; ++t) {
      const std::size_t kt = nonzero[perm[t]];
      const double term = alpha[t] * p_.constraints[kt].b / norms[kt];
      pred += term;
      mag += std::abs(term);
    }
    if (std::abs(bi - pred) > 1e-9 * std::max(1.0, mag)) {
      std::vector<double> cert(mall, 0.0);
      const double c = (pred - bi) > 0 ? 1.0 : -1.0;
      double nrm = 1.0;
      for (double a : alpha) nrm += a * a;
      nrm = std::sqrt(nrm);
      for (std::size_t t = 0; t < rank; ++t) {
        const std::size_t kt = nonzero[perm[t]];
        cert[kt] = c * alpha[t] / nrm / norms[kt];
      }
      cert[ki] = -c / nrm / norms[ki];
      out.certificate = cert;
      return false;
    }
    dropped_.push_back(ki);
  }
  std::sort(dropped_.begin(), dropped_.end());
  for (std::size_t k : dropped_)
    warnings_.push_back("constraint " + std::to_string(k) + " is linearly dependent and was dropped");

  for (std::size_t i = 0; i < mz; ++i)
    if (keep[i]) active_.push_back(nonzero[i]);
  std::sort(active_.begin(), active_.end());
  m_ = active_.size();
  scale_.resize(m_);
  b_.resize(m_);
  a_.assign(m_, std::vector<Matrix>(nb_));
  at_.assign(m_, std::vector<Matrix>(nb_));
  gt_.assign(m_, std::vector<Matrix>(nb_));
  for (std::size_t k = 0; k < m_; ++k) {
    const auto& con = p_.constraints[active_[k]];
    scale_[k] = norms[active_[k]];
    b_[k] = con.b / scale_[k];
    for (std::size_t b = 0; b < nb_; ++b) {
      if (is_zero(con.a.block(b))) continue;
      Matrix m = con.a.block(b).matrix();
      for (double& v : m.values()) v /= scale_[k];
      a_[k][b] = std::move(m);
      at_[k][b] = Matrix(p_.blocks[b], p_.blocks[b]);
      gt_[k][b] = Matrix(p_.blocks[b], p_.blocks[b]);
    }
  }
  return true;
}

void Solver::rotate_in(Block& bk, const double* a, double* out) {
  const auto& k = kernels::active();
  const std::size_t n = bk.n;
  k.gemm(n, n, n, a, bk.q.data(), bk.t1.data());
  k.gemm_tn(n, n, n, bk.q.data(), bk.t1.data(), out);
}

void Solver::rotate_out(Block& bk, const double* at, double* out) {
  const auto& k = kernels::active();
  const std::size_t n = bk.n;
  k.gemm(n, n, n, at, bk.qt.data(), bk.t1.data());
  k.gemm_tn(n, n, n, bk.qt.data(), bk.t1.data(), out);
}

void Solver::residuals() {
  const auto& kr = kernels::active();
  rp_.assign(m_, 0.0);
  pobj_ = 0.0;
  gap_ = 0.0;
  double rd2 = 0.0;
  for (std::size_t b = 0; b < nb_; ++b) {
    Block& bk = blocks_[b];
    pobj_ += frob_dot(bk.c, bk.x);
    gap_ += frob_dot(bk.x, bk.z);
    std::copy(bk.c.values().begin(), bk.c.values().end(), bk.rd.data());
    kr.axpy(-1.0, bk.z.data(), bk.rd.data(), bk.rd.size());
  }
  for (std::size_t k = 0; k < m_; ++k) {
    double ax = 0.0;
    for (std::size_t b = 0; b < nb_; ++b) {
      if (a_[k][b].size() == 0) continue;
      ax += frob_dot(a_[k][b], blocks_[b].x);
      kr.axpy(-y_[k], a_[k][b].data(), blocks_[b].rd.data(), blocks_[b].rd.size());
    }
    rp_[k] = b_[k] - ax;
  }
  for (auto& bk : blocks_) rd2 += frob_dot(bk.rd, bk.rd);
  dobj_ = 0.0;
  double rp2 = 0.0;
  for (std::size_t k = 0; k < m_; ++k) {
    dobj_ += b_[k] * y_[k];
    const double r = rp_[k] * scale_[k];
    rp2 += r * r;
  }
  mu_ = gap_ / static_cast<double>(ntot_);
  pres_ = std::sqrt(rp2) / (1.0 + bnorm_orig_);
  dres_ = std::sqrt(rd2) / (1.0 + cnorm_);
  relgap_ = std::abs(gap_) / (1.0 + std::abs(pobj_));
}

bool Solver::factor_schur() {
  const auto& kr = kernels::active();
  for (std::size_t b = 0; b < nb_; ++b) {
    Block& bk = blocks_[b];
    const std::size_t n = bk.n;
    std::copy(bk.z.values().begin(), bk.z.values().end(), bk.t2.data());
    dense::jacobi_eigh(n, bk.t2.data(), bk.qt.data(), bk.lam.data(), bk.scratch.data());
    if (!(bk.lam[0] > 0.0)) return false;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        bk.q(i, j) = bk.qt(j, i);
        bk.l(i, j) = 0.5 * (bk.lam[i] + bk.lam[j]);
      }
    rotate_in(bk, bk.x.data(), bk.xt.data());
    symmetrize(bk.xt);
    rotate_in(bk, bk.rd.data(), bk.rdt.data());
    symmetrize(bk.rdt);
  }
  for (std::size_t k = 0; k < m_; ++k) {
    for (std::size_t b = 0; b < nb_; ++b) {
      if (a_[k][b].size() == 0) continue;
      Block& bk = blocks_[b];
      const std::size_t n = bk.n;
      Matrix& at = at_[k][b];
      Matrix& gt = gt_[k][b];
      rotate_in(bk, a_[k][b].data(), at.data());
      symmetrize(at);
      kr.gemm(n, n, n, bk.xt.data(), at.data(), bk.t2.data());
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          gt(i, j) = 0.5 * (bk.t2(i, j) + bk.t2(j, i)) / bk.l(i, j);
    }
  }
  schur_ = Matrix(m_, m_);
  for (std::size_t i = 0; i < m_; ++i)
    for (std::size_t j = 0; j < m_; ++j) {
      double s = 0.0;
      for (std::size_t b = 0; b < nb_; ++b)
        if (a_[i][b].size() && a_[j][b].size()) s += frob_dot(at_[i][b], gt_[j][b]);
      schur_(i, j) = s;
    }
  lu_ = LuFactor(schur_);
  return !lu_.singular();
}

// Builds H = E^{-1}(R_c - F(R_d)) in the eigenbasis and solves for the full
// direction. Predictor: R_c = -(XZ+ZX)/2. Corrector adds sigma*mu*I and the
// second-order term of the affine direction.
void Solver::solve_direction(std::vector<double>& dy, bool corrector) {
  const auto& kr = kernels::active();
  for (std::size_t b = 0; b < nb_; ++b) {
    Block& bk = blocks_[b];
    const std::size_t n = bk.n;
    kr.gemm(n, n, n, bk.xt.data(), bk.rdt.data(), bk.t2.data());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        bk.ht(i, j) = -bk.xt(i, j) - 0.5 * (bk.t2(i, j) + bk.t2(j, i)) / bk.l(i, j);
    if (corrector) {
      if (second_order_) kr.gemm(n, n, n, bk.dxt_a.data(), bk.dzt_a.data(), bk.t2.data());
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          double rc = second_order_ ? -0.5 * (bk.t2(i, j) + bk.t2(j, i)) : 0.0;
          if (i == j) rc += sigma_mu_;
          bk.ht(i, j) += rc / bk.l(i, j);
        }
    }
  }
  std::vector<double> rhs(m_);
  for (std::size_t k = 0; k < m_; ++k) {
    double s = rp_[k];
    for (std::size_t b = 0; b < nb_; ++b)
      if (a_[k][b].size()) s -= frob_dot(at_[k][b], blocks_[b].ht);
    rhs[k] = s;
  }
  dy = lu_.solve(rhs);
  // One step of iterative refinement on the nonsymmetric Schur system.
  std::vector<double> r(m_);
  for (std::size_t i = 0; i < m_; ++i)
    r[i] = rhs[i] - kr.dot(schur_.row(i), dy.data(), m_);
  const auto corr = lu_.solve(r);
  for (std::size_t i = 0; i < m_; ++i) dy[i] += corr[i];

  for (std::size_t b = 0; b < nb_; ++b) {
    Block& bk = blocks_[b];
    Matrix& dx = corrector ? bk.dxt : bk.dxt_a;
    Matrix& dz = corrector ? bk.dzt : bk.dzt_a;
    dx = bk.ht;
    dz = bk.rdt;
    for (std::size_t k = 0; k < m_; ++k) {
      if (a_[k][b].size() == 0 || dy[k] == 0.0) continue;
      kr.axpy(dy[k], gt_[k][b].data(), dx.data(), dx.size());
      kr.axpy(-dy[k], at_[k][b].data(), dz.data(), dz.size());
    }
    symmetrize(dx);
    symmetrize(dz);
  }
}

// Largest alpha with Xt + alpha dXt PSD, via the whitened direction
// L^{-1} dXt L^{-T} with Xt = L L^T. Returns a negative value when Xt itself
// is not numerically positive definite.
double Solver::primal_step_limit(bool use_affine) {
  double alpha = std::numeric_limits<double>::infinity();
  for (auto& bk : blocks_) {
    const std::size_t n = bk.n;
    const Matrix& dx = use_affine ? bk.dxt_a : bk.dxt;
    if (n == 1) {
      if (dx(0, 0) < 0.0) alpha = std::min(alpha, -bk.xt(0, 0) / dx(0, 0));
      continue;
    }
    std::copy(bk.xt.values().begin(), bk.xt.values().end(), bk.t1.data());
    if (!dense::cholesky_in_place(n, bk.t1.data(), 0.0, nullptr)) return -1.0;
    const Matrix& l = bk.t1;
    // W = L^{-1} dX (column by column), then M = L^{-1} W^T.
    Matrix& w = bk.t2;
    for (std::size_t c = 0; c < n; ++c)
      for (std::size_t i = 0; i < n; ++i) {
        double s = dx(i, c);
        for (std::size_t j = 0; j < i; ++j) s -= l(i, j) * w(j, c);
        w(i, c) = s / l(i, i);
      }
    Matrix mm(n, n);
    for (std::size_t c = 0; c < n; ++c)
      for (std::size_t i = 0; i < n; ++i) {
        double s = w(c, i);
        for (std::size_t j = 0; j < i; ++j) s -= l(i, j) * mm(j, c);
        mm(i, c) = s / l(i, i);
      }
    symmetrize(mm);
    dense::jacobi_eigh(n, mm.data(), nullptr, bk.w.data(), bk.scratch.data());
    if (bk.w[0] < 0.0) alpha = std::min(alpha, -1.0 / bk.w[0]);
  }
  return alpha;
}

double Solver::dual_step_limit(bool use_affine) {
  double alpha = std::numeric_limits<double>::infinity();
  for (auto& bk : blocks_) {
    const std::size_t n = bk.n;
    const Matrix& dz = use_affine ? bk.dzt_a : bk.dzt;
    if (n == 1) {
      if (dz(0, 0) < 0.0) alpha = std::min(alpha, -bk.lam[0] / dz(0, 0));
      continue;
    }
    Matrix& mm = bk.t2;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) mm(i, j) = dz(i, j) / std::sqrt(bk.lam[i] * bk.lam[j]);
    dense::jacobi_eigh(n, mm.data(), nullptr, bk.w.data(), bk.scratch.data());
    if (bk.w[0] < 0.0) alpha = std::min(alpha, -1.0 / bk.w[0]);
  }
  return alpha;
}

void Solver::finish(ConeSolution& out, SolveStatus status) {
  out.status = status;
  std::vector<SymMatrix> xs, zs;
  for (auto& bk : blocks_) {
    xs.push_back(SymMatrix::symmetrized(bk.x));
    zs.push_back(SymMatrix::symmetrized(bk.z));
  }
  out.x = BlockDiagMatrix(std::move(xs));
  out.z = BlockDiagMatrix(std::move(zs));
  out.y.assign(p_.constraints.size(), 0.0);
  for (std::size_t k = 0; k < m_; ++k) out.y[active_[k]] = y_[k] / scale_[k];
  const double sign = p_.sense == Sense::Maximize ? -1.0 : 1.0;
  out.primal_objective = sign * pobj_;
  out.dual_objective = sign * dobj_;
  out.gap = gap_;
  out.primal_residual = pres_;
  out.dual_residual = dres_;
  out.iterations = iter_;
  out.dropped_constraints = dropped_;
  out.warnings = warnings_;
}

constexpr double kCentringTrigger = 0.1;

ConeSolution Solver::run() {
  p_.validate();
  ConeSolution out;
  setup();
  if (!check_rank(out)) {
    out.status = SolveStatus::PrimalInfeasible;
    out.x = BlockDiagMatrix::zeros(p_.blocks);
    out.z = BlockDiagMatrix::zeros(p_.blocks);
    out.y.assign(p_.constraints.size(), 0.0);
    out.warnings.push_back("inconsistent linearly dependent constraints");
    return out;
  }

  double eta = 1.0;
  for (double b : b_) eta = std::max(eta, std::abs(b));
  eta = std::max(eta, cnorm_);
  for (auto& bk : blocks_) {
    bk.x = Matrix::identity(bk.n);
    bk.z = Matrix::identity(bk.n);
    for (double& v : bk.x.values()) v *= eta;
    for (double& v : bk.z.values()) v *= eta;
  }
  y_.assign(m_, 0.0);

  const auto& kr = kernels::active();
  std::vector<double> dy_a, dy;
  double step_p = 0.0, step_d = 0.0, sigma = 0.0;
  int stalls = 0;
  bool centring_ok = true;
  for (iter_ = 0;; ++iter_) {
    residuals();
    if (o_.verbose)
      std::fprintf(stderr, "iter %3d  pobj %+.10e  dobj %+.10e  gap %.3e  pres %.3e  dres %.3e  ap %.3f  ad %.3f\n",
                   iter_, pobj_, dobj_, gap_, pres_, dres_, step_p, step_d);
    if (o_.on_iteration) {
      IterationInfo info;
      info.iteration = iter_;
      const double sgn = p_.sense == Sense::Maximize ? -1.0 : 1.0;
      info.primal_objective = sgn * pobj_;
      info.dual_objective = sgn * dobj_;
      info.gap = gap_;
      info.relative_gap = relgap_;
      info.primal_residual = pres_;
      info.dual_residual = dres_;
      info.step_primal = step_p;
      info.step_dual = step_d;
      info.sigma = sigma;
      o_.on_iteration(info);
    }
    if (!std::isfinite(gap_) || !std::isfinite(pres_) || !std::isfinite(dres_)) {
      finish(out, SolveStatus::NumericalFailure);
      return out;
    }
    if (pres_ <= o_.tol_feas && dres_ <= o_.tol_feas && relgap_ <= o_.tol_gap) {
      finish(out, SolveStatus::Optimal);
      return out;
    }
    record_best();

    // Farkas ray: b'y > 0 with sum y A <= 0 up to tolerance.
    if (dobj_ > 0.0) {
      double worst = -std::numeric_limits<double>::infinity();
      for (std::size_t b = 0; b < nb_; ++b) {
        Block& bk = blocks_[b];
        std::fill(bk.t2.values().begin(), bk.t2.values().end(), 0.0);
        for (std::size_t k = 0; k < m_; ++k)
          if (a_[k][b].size()) kr.axpy(y_[k] / dobj_, a_[k][b].data(), bk.t2.data(), bk.t2.size());
        symmetrize(bk.t2);
        dense::jacobi_eigh(bk.n, bk.t2.data(), nullptr, bk.w.data(), bk.scratch.data());
        worst = std::max(worst, bk.w[bk.n - 1]);
      }
      if (worst <= o_.tol_feas) {
        finish(out, SolveStatus::PrimalInfeasible);
        std::vector<double> cert(p_.constraints.size(), 0.0);
        double nrm = 0.0;
        for (std::size_t k = 0; k < m_; ++k) nrm += y_[k] * y_[k];
        nrm = std::sqrt(nrm);
        for (std::size_t k = 0; k < m_; ++k) cert[active_[k]] = y_[k] / nrm / scale_[k];
        out.certificate = cert;
        return out;
      }
    }
    // Improving primal ray: <C, X> < 0 with A(X) ~ 0.
    if (pobj_ < 0.0) {
      double r2 = 0.0;
      for (std::size_t k = 0; k < m_; ++k) {
        const double v = (b_[k] - rp_[k]) / -pobj_;
        r2 += v * v;
      }
      if (std::sqrt(r2) <= o_.tol_feas) {
        finish(out, SolveStatus::DualInfeasible);
        BlockDiagMatrix ray = out.x;
        ray *= 1.0 / -pobj_;
        out.primal_ray = ray;
        return out;
      }
    }
    if (iter_ >= o_.max_iter) {
      restore_best();
      finish(out, SolveStatus::MaxIterations);
      return out;
    }

    if (!factor_schur()) {
      restore_best();
      finish(out, SolveStatus::NumericalFailure);
      out.warnings.push_back("Schur complement numerically singular");
      return out;
    }

    solve_direction(dy_a, false);
    const double ap_max_a = primal_step_limit(true);
    const double ad_max_a = dual_step_limit(true);
    if (ap_max_a < 0.0) {
      restore_best();
      finish(out, SolveStatus::NumericalFailure);
      out.warnings.push_back("primal iterate lost positive definiteness");
      return out;
    }
    const double ap_a = std::min(1.0, ap_max_a);
    const double ad_a = std::min(1.0, ad_max_a);
    double mu_a = 0.0;
    for (auto& bk : blocks_) {
      const std::size_t n = bk.n;
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += bk.xt(i, i) * bk.lam[i];
      for (std::size_t i = 0; i < n; ++i) s += ap_a * bk.dxt_a(i, i) * bk.lam[i];
      s += ad_a * frob_dot(bk.xt, bk.dzt_a);
      s += ap_a * ad_a * frob_dot(bk.dxt_a, bk.dzt_a);
      mu_a += s;
    }
    mu_a /= static_cast<double>(ntot_);
    sigma = mu_ > 0.0 ? std::clamp(std::pow(std::max(mu_a, 0.0) / mu_, 3.0), 0.0, 1.0) : 0.0;
    // Keep the gap from collapsing ahead of the infeasibilities: once it is
    // far below them in tolerance units, further centring is cheaper than
    // losing the interior.
    const double infeas = std::max(pres_, dres_) / o_.tol_feas;
    if (infeas > 1.0 && relgap_ / o_.tol_gap < 1e-2 * infeas) sigma = std::max(sigma, 0.5);
    sigma_mu_ = sigma * mu_;

    solve_direction(dy, true);
    const double ap_max = primal_step_limit(false);
    const double ad_max = dual_step_limit(false);
    if (ap_max < 0.0) {
      restore_best();
      finish(out, SolveStatus::NumericalFailure);
      out.warnings.push_back("primal iterate lost positive definiteness");
      return out;
    }
    step_p = std::min(1.0, o_.step_fraction * ap_max);
    step_d = std::min(1.0, o_.step_fraction * ad_max);
    // AHO iterates can drift off the central path until both steps collapse;
    // a pure centring step without the second-order term recovers. When it
    // does not, the collapse is the signature of a diverging ray and the
    // plain corrector is left to expose it.
    if (centring_ok && std::min(step_p, step_d) < kCentringTrigger) {
      sigma = 1.0;
      sigma_mu_ = mu_;
      second_order_ = false;
      solve_direction(dy, true);
      second_order_ = true;
      const double cp = primal_step_limit(false);
      if (cp < 0.0) {
        restore_best();
        finish(out, SolveStatus::NumericalFailure);
        out.warnings.push_back("primal iterate lost positive definiteness");
        return out;
      }
      step_p = std::min(1.0, o_.step_fraction * cp);
      step_d = std::min(1.0, o_.step_fraction * dual_step_limit(false));
      if (std::min(step_p, step_d) < kCentringTrigger) centring_ok = false;
    }

    for (auto& bk : blocks_) {
      kr.axpy(step_p, bk.dxt.data(), bk.xt.data(), bk.xt.size());
      rotate_out(bk, bk.xt.data(), bk.x.data());
      symmetrize(bk.x);
      bk.zt = bk.dzt;
      for (double& v : bk.zt.values()) v *= step_d;
      for (std::size_t i = 0; i < bk.n; ++i) bk.zt(i, i) += bk.lam[i];
      rotate_out(bk, bk.zt.data(), bk.z.data());
      symmetrize(bk.z);
    }
    for (std::size_t k = 0; k < m_; ++k) y_[k] += step_d * dy[k];

    if (step_p < 1e-10 && step_d < 1e-10) {
      if (++stalls >= 3) {
        restore_best();
        finish(out, SolveStatus::NumericalFailure);
        out.warnings.push_back("step length stagnated");
        return out;
      }
    } else {
      stalls = 0;
    }
  }
}

}  // namespace

ConeSolution solve(const ConeProgram& p, const SolverOptions& opts) {
  Solver s(p, opts);
  return s.run();
}

}  // namespace lmmsdp
