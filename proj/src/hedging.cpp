#include "lmmsdp/hedging.hpp"

#include <cmath>
#include <string>

#include "lmmsdp/errors.hpp"
#include "lmmsdp/linalg.hpp"

namespace lmmsdp {

BlackTerms black_terms(const SwaptionInstrument& inst) {
  return {inst.forward, inst.strike, inst.level, inst.expiry_time};
}

HedgeReport price_bounds(const CalibrationRow& target, const BlackTerms& target_terms,
                         const CalibrationSpec& calib, BoundDirection direction) {
  if (target.omega.dims() != calib.blocks) throw InvalidInput("target does not match the calibration variable");
  CalibrationSpec spec = calib;
  spec.objective.kind =
      direction == BoundDirection::Upper ? ObjectiveKind::MaximizeTarget : ObjectiveKind::MinimizeTarget;
  spec.objective.matrix = target.omega;
  spec.objective.covariance.reset();
  const CalibrationResult res = calibrate(spec);

  HedgeReport rep;
  rep.direction = direction;
  rep.bound_cumvar = std::max(0.0, res.objective);
  rep.bound_vol = std::sqrt(rep.bound_cumvar / target_terms.expiry_time);
  rep.bound_price = black_price(target_terms.forward, target_terms.strike, rep.bound_cumvar, target_terms.level);
  rep.y = res.sensitivity;
  for (const auto& row : spec.rows) rep.instrument_cumvar.push_back(dot(row.omega, res.x));
  rep.primal_objective = res.solution->primal_objective;
  rep.dual_objective = res.solution->dual_objective;
  rep.residual_gap = res.gap;
  rep.x = res.x;
  return rep;
}

std::vector<double> static_hedge_portfolio(const HedgeReport& report, const BlackTerms& target,
                                           const std::vector<BlackTerms>& calib) {
  if (calib.size() != report.y.size()) throw InvalidInput("hedge instruments do not match the dual vector");
  if (!(report.bound_cumvar > 0.0)) throw DegenerateVega("target variance at the bound is zero", calib.size());
  const double vega0 = black_variance_vega(target.forward, target.strike, report.bound_cumvar, target.level);
  std::vector<double> lambda(calib.size());
  for (std::size_t k = 0; k < calib.size(); ++k) {
    const double v = report.instrument_cumvar.at(k);
    double vega = 0.0;
    if (v > 0.0) vega = black_variance_vega(calib[k].forward, calib[k].strike, v, calib[k].level);
    if (!(vega > 0.0)) throw DegenerateVega("calibration instrument " + std::to_string(k) + " has zero vega", k);
    lambda[k] = report.y[k] * vega0 / vega;
  }
  return lambda;
}

namespace {

void validate(const GammaHedgeSpec& s) {
  const std::size_t n = s.gamma_matrix.dim();
  if (n == 0) throw InvalidInput("gamma hedge needs at least one asset");
  if (s.gammas.size() != n || s.sigma.dim() != n) throw InvalidInput("gamma hedge dimension mismatch");
  for (double g : s.gammas)
    if (g == 0.0 || !std::isfinite(g)) throw InvalidInput("per-asset gammas must be nonzero");
}

SymMatrix sigma_sqrt(const SymMatrix& sigma) {
  const auto e = eigh(sigma);
  if (!(e.values.front() > 1e-12 * std::abs(e.values.back())))
    throw InvalidInput("asset covariance is not positive definite");
  return sqrt_psd(sigma);
}

}  // namespace

double gamma_exposure(const GammaHedgeSpec& spec, const std::vector<double>& y) {
  validate(spec);
  const std::size_t n = spec.gamma_matrix.dim();
  if (y.size() != n) throw InvalidInput("hedge vector length mismatch");
  SymMatrix g = spec.gamma_matrix;
  for (std::size_t i = 0; i < n; ++i) g.add(i, i, spec.gammas[i] * y[i]);
  const SymMatrix s = sigma_sqrt(spec.sigma);
  return spectral_norm(congruence(s.matrix(), g));
}

GammaHedgeResult gamma_hedge(const GammaHedgeSpec& spec, const SolverOptions& opts) {
  validate(spec);
  const std::size_t n = spec.gamma_matrix.dim();
  const SymMatrix s = sigma_sqrt(spec.sigma);
  const SymMatrix g0 = congruence(s.matrix(), spec.gamma_matrix);

  // Dual of min t s.t. -tI <= G0 + sum y_i G_i <= tI, with X = diag(U, V):
  //   max Tr(G0 U) - Tr(G0 V)  s.t.  Tr U + Tr V = 1,  Tr(G_i U) = Tr(G_i V).
  // The solver's multipliers are then (-t, y).
  ConeProgram p;
  p.blocks = {n, n};
  p.sense = Sense::Maximize;
  p.c = BlockDiagMatrix({g0, -1.0 * g0});
  p.constraints.push_back({BlockDiagMatrix({SymMatrix::identity(n), SymMatrix::identity(n)}), 1.0});
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> col(n);
    for (std::size_t r = 0; r < n; ++r) col[r] = s(r, i);
    const SymMatrix gi = SymMatrix::outer(col, spec.gammas[i]);
    p.constraints.push_back({BlockDiagMatrix({gi, -1.0 * gi}), 0.0});
  }
  const ConeSolution sol = solve(p, opts);
  if (sol.status != SolveStatus::Optimal)
    throw SolverError(std::string("gamma hedge solve ended with ") + std::string(to_string(sol.status)));

  GammaHedgeResult r;
  r.status = sol.status;
  r.t = -sol.y[0];
  r.y.assign(sol.y.begin() + 1, sol.y.end());
  r.gap = sol.gap;
  return r;
}

}  // namespace lmmsdp
