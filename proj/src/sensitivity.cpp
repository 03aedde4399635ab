#include "lmmsdp/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lmmsdp/errors.hpp"

namespace lmmsdp {

PositivityCheck positivity_check(const BlockDiagMatrix& x, const BlockDiagMatrix& dx) {
  require_conforming(x, dx);
  PositivityCheck c;
  c.min_whitened_eigenvalue = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < x.num_blocks(); ++b) {
    const SymMatrix w = inv_sqrt(x.block(b));
    const SymMatrix m = congruence(w.matrix(), dx.block(b));
    const auto ev = eigenvalues(m);
    c.ratio = std::max({c.ratio, std::abs(ev.front()), std::abs(ev.back())});
    c.min_whitened_eigenvalue = std::min(c.min_whitened_eigenvalue, ev.front());
  }
  c.feasible = c.ratio <= 1.0;
  c.exact_feasible = c.min_whitened_eigenvalue >= -1.0;
  return c;
}

std::vector<double> objective_sensitivity(const CalibrationResult& result) {
  if (!result.has_duals) throw NotAvailable("calibration result carries no dual variables");
  return result.sensitivity;
}

NewtonOperator::NewtonOperator(const ConeProgram& p, const BlockDiagMatrix& x, const BlockDiagMatrix& z)
    : p_(&p), m_(p.constraints.size()), dims_(p.blocks) {
  require_conforming(x, z);
  if (x.dims() != p.blocks) throw InvalidInput("iterate does not match the program blocks");
  const std::size_t nb = dims_.size();
  g_.assign(m_, std::vector<std::vector<double>>(nb));
  std::vector<std::vector<SVec>> a(m_, std::vector<SVec>(nb));

  for (std::size_t b = 0; b < nb; ++b) {
    const std::size_t n = dims_[b];
    const SymMatrix& xb = x.block(b);
    const SymMatrix& zb = z.block(b);
    Matrix e = sym_kron_matrix(zb, SymMatrix::identity(n));
    const double shift = kRegularization * std::max(spectral_norm(zb), std::numeric_limits<double>::min());
    reg_ = std::max(reg_, shift);
    for (std::size_t i = 0; i < e.rows(); ++i) e(i, i) += shift;
    LuFactor lu(std::move(e));
    if (lu.singular() || lu.pivot_ratio() < 1e-15)
      throw SingularOperator("E = Z (*) I is numerically singular in block " + std::to_string(b),
                             lu.singular() ? 0.0 : lu.pivot_ratio());
    for (std::size_t k = 0; k < m_; ++k) {
      const SymMatrix& ak = p.constraints[k].a.block(b);
      if (is_zero(ak)) continue;
      a[k][b] = svec(ak);
      // F svec(A) = svec((X A + A X) / 2)
      const Matrix xa = xb.matrix() * ak.matrix();
      Matrix s(n, n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) s(i, j) = 0.5 * (xa(i, j) + xa(j, i));
      std::vector<double> v = svec(s).values;
      lu.solve_in_place(v);
      g_[k][b] = std::move(v);
    }
  }

  Matrix schur(m_, m_);
  for (std::size_t i = 0; i < m_; ++i)
    for (std::size_t j = 0; j < m_; ++j) {
      double s = 0.0;
      for (std::size_t b = 0; b < nb; ++b) {
        if (a[i][b].values.empty() || g_[j][b].empty()) continue;
        const auto& u = a[i][b].values;
        const auto& g = g_[j][b];
        for (std::size_t t = 0; t < u.size(); ++t) s += u[t] * g[t];
      }
      schur(i, j) = s;
    }
  schur_ = LuFactor(std::move(schur));
  if (schur_.singular() || schur_.pivot_ratio() < 1e-15)
    throw RankDeficientScenario("the m x m Newton system A E^{-1} F A^T is singular");
}

BlockDiagMatrix NewtonOperator::combine(std::span<const double> dy) const {
  const std::size_t nb = dims_.size();
  std::vector<std::vector<double>> acc(nb);
  for (std::size_t b = 0; b < nb; ++b) acc[b].assign(svec_size(dims_[b]), 0.0);
  for (std::size_t k = 0; k < m_; ++k)
    for (std::size_t b = 0; b < nb; ++b) {
      if (g_[k][b].empty() || dy[k] == 0.0) continue;
      for (std::size_t t = 0; t < acc[b].size(); ++t) acc[b][t] += dy[k] * g_[k][b][t];
    }
  std::vector<SymMatrix> blocks;
  blocks.reserve(nb);
  for (auto& v : acc) blocks.push_back(smat(v));
  return BlockDiagMatrix(std::move(blocks));
}

BlockDiagMatrix NewtonOperator::apply(std::span<const double> db) const {
  if (db.size() != m_) throw InvalidInput("perturbation length does not match the program rows");
  std::vector<double> dy = schur_.solve(db);
  BlockDiagMatrix dx = combine(dy);
  // The E^{-1} F part is badly scaled on the joint range of X and null space
  // of Z; refining against A(dX) itself restores the constraint match.
  for (int pass = 0; pass < 3; ++pass) {
    std::vector<double> r(m_);
    double rn = 0.0, un = 0.0;
    for (std::size_t k = 0; k < m_; ++k) {
      r[k] = db[k] - dot(p_->constraints[k].a, dx);
      rn = std::max(rn, std::abs(r[k]));
      un = std::max(un, std::abs(db[k]));
    }
    if (rn <= 1e-15 * std::max(un, 1e-300)) break;
    schur_.solve_in_place(r);
    dx += combine(r);
  }
  return dx;
}

BlockDiagMatrix newton_update(const ConeProgram& p, const BlockDiagMatrix& x, const BlockDiagMatrix& z,
                              std::span<const double> db) {
  bool zero = std::all_of(db.begin(), db.end(), [](double v) { return v == 0.0; });
  if (zero) return BlockDiagMatrix::zeros(p.blocks);
  return NewtonOperator(p, x, z).apply(db);
}

namespace {

const CalibrationResult& require_optimal(const CalibrationResult& r) {
  if (!r.has_duals || !r.compiled || !r.solution)
    throw NotAvailable("sensitivity analysis needs a solved cone program with duals");
  if (r.status != SolveStatus::Optimal) throw InvalidInput("sensitivity analysis needs an Optimal result");
  return r;
}

}  // namespace

SensitivityModel::SensitivityModel(const CalibrationResult& result)
    : result_(require_optimal(result)),
      op_(result.compiled->program, result.solution->x, result.solution->z),
      gradient_(objective_sensitivity(result)) {}

SensitivityReport SensitivityModel::evaluate(const PerturbationScenario& s) const {
  const auto& cc = *result_.compiled;
  const std::size_t m = cc.rhs_rows.size();
  if (s.u.size() != m)
    throw InvalidInput("scenario '" + s.name + "' has " + std::to_string(s.u.size()) + " entries, expected " +
                       std::to_string(m));
  std::vector<double> db(op_.num_rows(), 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    if (!std::isfinite(s.u[k])) throw InvalidInput("scenario '" + s.name + "' has a non-finite entry");
    for (const auto& [row, w] : cc.rhs_rows[k]) db[row] += w * s.u[k];
  }
  const BlockDiagMatrix full = op_.apply(db);

  SensitivityReport rep;
  rep.name = s.name;
  rep.objective_gradient = gradient_;
  for (std::size_t k = 0; k < m; ++k) rep.predicted_objective_change += gradient_[k] * s.u[k];
  std::vector<SymMatrix> blocks;
  for (std::size_t b = 0; b < cc.num_x_blocks; ++b) blocks.push_back(full.block(b));
  rep.delta_x = BlockDiagMatrix(std::move(blocks));
  rep.min_eigenvalue_after = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < cc.num_x_blocks; ++b)
    rep.min_eigenvalue_after =
        std::min(rep.min_eigenvalue_after, min_eigenvalue(result_.x.block(b) + rep.delta_x.block(b)));
  try {
    const auto pc = positivity_check(result_.x, rep.delta_x);
    rep.positivity_ratio = pc.ratio;
    rep.feasible_step = pc.feasible;
    rep.min_whitened_eigenvalue = pc.min_whitened_eigenvalue;
    rep.exact_feasible = pc.exact_feasible;
  } catch (const NotPositiveDefinite&) {
    // Rank-deficient optimum: the whitened test is undefined.
    rep.positivity_ratio = std::numeric_limits<double>::infinity();
    rep.min_whitened_eigenvalue = -std::numeric_limits<double>::infinity();
  }
  for (std::size_t k = 0; k < m; ++k) {
    // Rows that carry instrument k one-for-one (equality or spread rows).
    for (const auto& [row, w] : cc.rhs_rows[k]) {
      if (w != 1.0) continue;
      const double got = dot(cc.program.constraints[row].a, full);
      rep.constraint_error = std::max(rep.constraint_error, std::abs(got - db[row]));
    }
  }
  return rep;
}

std::vector<SensitivityReport> SensitivityModel::sweep(const std::vector<PerturbationScenario>& scenarios) const {
  std::vector<SensitivityReport> out;
  out.reserve(scenarios.size());
  for (const auto& s : scenarios) out.push_back(evaluate(s));
  return out;
}

std::vector<SensitivityReport> scenario_sweep(const CalibrationResult& result,
                                              const std::vector<PerturbationScenario>& scenarios) {
  return SensitivityModel(result).sweep(scenarios);
}

}  // namespace lmmsdp
