#pragma once

#include <cstddef>
#include <vector>

#include "lmmsdp/calibration.hpp"
#include "lmmsdp/cone_program.hpp"
#include "lmmsdp/market.hpp"
#include "lmmsdp/matrix.hpp"

namespace lmmsdp {

enum class BoundDirection { Upper, Lower };

// Black-76 inputs of a basket option, independent of its variance.
struct BlackTerms {
  double forward = 0.0;
  double strike = 0.0;
  double level = 1.0;
  double expiry_time = 1.0;
};

BlackTerms black_terms(const SwaptionInstrument& inst);

struct HedgeReport {
  BoundDirection direction = BoundDirection::Upper;
  double bound_cumvar = 0.0;
  double bound_vol = 0.0;
  double bound_price = 0.0;
  // Bound sensitivities to the calibration targets. For the upper bound
  // sum_k y_k Omega_k - Omega_0 is PSD; for the lower bound
  // Omega_0 - sum_k y_k Omega_k is.
  std::vector<double> y;
  // Tr(Omega_k X) at the bound solution.
  std::vector<double> instrument_cumvar;
  std::vector<double> lambda;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double residual_gap = 0.0;
  BlockDiagMatrix x;
};

// Extremal Tr(Omega_0 X) over the calibrated set. Throws InfeasibleCalibration
// or Unbounded (the calibration set does not pin the target variance).
HedgeReport price_bounds(const CalibrationRow& target, const BlackTerms& target_terms,
                         const CalibrationSpec& calib, BoundDirection direction);

// lambda_k = y_k * vega_0 / vega_k with variance vegas at the bound solution.
// Throws DegenerateVega when a calibration instrument has zero vega.
std::vector<double> static_hedge_portfolio(const HedgeReport& report, const BlackTerms& target,
                                           const std::vector<BlackTerms>& calib);

struct GammaHedgeSpec {
  SymMatrix gamma_matrix;      // portfolio Gamma
  std::vector<double> gammas;  // per-asset vanilla gammas
  SymMatrix sigma;             // asset covariance, PD
};

struct GammaHedgeResult {
  std::vector<double> y;
  double t = 0.0;
  SolveStatus status = SolveStatus::NumericalFailure;
  double gap = 0.0;
};

// min_y lambda_max(|S^{1/2} (Gamma + diag(gamma) diag(y)) S^{1/2}|), posed
// through its dual so the cone program stays in standard form.
GammaHedgeResult gamma_hedge(const GammaHedgeSpec& spec, const SolverOptions& opts = {});

// max |eig(S^{1/2} (Gamma + diag(gamma y)) S^{1/2})| for a given hedge.
double gamma_exposure(const GammaHedgeSpec& spec, const std::vector<double>& y);

}  // namespace lmmsdp
