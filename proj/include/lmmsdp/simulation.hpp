#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lmmsdp/calibration.hpp"
#include "lmmsdp/cone_program.hpp"
#include "lmmsdp/market.hpp"
#include "lmmsdp/matrix.hpp"

namespace lmmsdp {

struct LognormalMarket {
  std::vector<double> x0;
  SymMatrix cov;  // annualized sigma^T sigma
  std::uint64_t seed = 0;

  void validate() const;
};

// Counter-based per-stream seed (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

// paths[p][t][i]: price of asset i at step t (t = 0..steps) on path p.
using PathArray = std::vector<std::vector<std::vector<double>>>;

// Exact driftless lognormal stepping; path p uses derive_seed(market.seed, p).
PathArray simulate_paths(const LognormalMarket& market, double maturity, std::size_t steps, std::size_t paths);
// Single path, written into out[(steps + 1) * n].
void simulate_path(const LognormalMarket& market, const Matrix& factor, double maturity, std::size_t steps,
                   std::uint64_t seed, std::vector<double>& out);
// Lower factor L with L L^T = cov (Cholesky, or the symmetric root when cov
// is only semidefinite).
Matrix covariance_factor(const SymMatrix& cov);

// Delta of a basket call under the frozen-weight lognormal approximation:
// w_i N(h), level 1.
std::vector<double> basket_delta(const std::vector<double>& weights, const std::vector<double>& x, double strike,
                                 double remaining_cumvar);
double basket_price(const std::vector<double>& weights, const std::vector<double>& x, double strike,
                    double cumvar);
// Basket weights hat(w)_i = w_i x_i / (w . x).
std::vector<double> basket_hat_weights(const std::vector<double>& weights, const std::vector<double>& x);

enum class HedgeMethod { RealCovariance, Robust, SuperHedging, Parametrized };
std::string_view to_string(HedgeMethod m);
// Accepts "real", "robust", "superhedging", "parametrized" and the
// CamelCase names; throws InvalidInput otherwise.
HedgeMethod parse_method(std::string_view s);

struct HedgingExperiment {
  std::vector<double> target_weights;
  std::vector<std::vector<double>> calibration_weights;
  double maturity = 1.0;
  std::size_t rebalances = 33;
  double noise_amplitude = 0.1;
  // Draw one price-noise factor per instrument and path instead of a fresh
  // one at every rebalance.
  bool noise_per_path = false;
  std::size_t paths = 10000;
  std::vector<HedgeMethod> methods{HedgeMethod::RealCovariance, HedgeMethod::Robust, HedgeMethod::SuperHedging,
                                   HedgeMethod::Parametrized};
  unsigned threads = 0;  // 0: hardware concurrency
  SolverOptions solver;
  int parametric_restarts = 5;
  int parametric_evaluations = 2000;

  void validate(std::size_t assets) const;
};

struct MethodStats {
  HedgeMethod method = HedgeMethod::RealCovariance;
  double mean = 0.0;
  double stdev = 0.0;
  double fraction_positive = 0.0;
  double mean_change = 0.0;  // mean Frobenius norm of X_j - X_{j-1}
  double mean_premium = 0.0;
  std::size_t fallback_calibrations = 0;  // solved with the widened bid-ask band
  std::size_t failed_calibrations = 0;    // kept the previous X
  std::size_t flagged_paths = 0;
  std::vector<double> ratios;             // per path
};

struct PnLReport {
  std::size_t paths = 0;
  std::size_t rebalances = 0;
  std::uint64_t seed = 0;
  double true_premium = 0.0;
  std::vector<MethodStats> methods;
  // Largest step-to-step self-financing mismatch over all paths and methods.
  double max_financing_error = 0.0;
};

PnLReport run_hedging_experiment(const HedgingExperiment& exp, const LognormalMarket& market);

// Bounds sweep over (expiry, tenor) pairs of the calendar.
struct BoundsCell {
  std::size_t expiry = 0;
  std::size_t tenor = 0;
  std::optional<double> lower_vol;
  std::optional<double> upper_vol;
  std::optional<double> market_vol;
  bool calibrated = false;  // the cell is one of the calibration instruments
  std::string error;        // non-empty when a solve failed
};

// Every (expiry, tenor) with expiry + tenor - 1 <= horizon unless `grid` is
// given. Cell failures are recorded and the sweep continues.
std::vector<BoundsCell> run_bounds_sweep(const DiscountCurve& curve, const std::vector<SwaptionInstrument>& calib,
                                         std::size_t horizon, double period, const SolverOptions& opts,
                                         const std::vector<std::pair<std::size_t, std::size_t>>& grid = {});

}  // namespace lmmsdp
