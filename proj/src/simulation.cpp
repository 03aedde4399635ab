#include "lmmsdp/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <thread>

#include "lmmsdp/errors.hpp"
#include "lmmsdp/hedging.hpp"
#include "lmmsdp/linalg.hpp"

namespace lmmsdp {

void LognormalMarket::validate() const {
  const std::size_t n = x0.size();
  if (n == 0) throw InvalidInput("market needs at least one asset");
  if (cov.dim() != n) throw InvalidInput("covariance dimension does not match the asset count");
  for (double v : x0)
    if (!(v > 0.0)) throw InvalidInput("initial prices must be positive");
  if (min_eigenvalue(cov) < -1e-12 * std::max(1.0, spectral_norm(cov)))
    throw InvalidInput("covariance is not positive semidefinite");
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Matrix covariance_factor(const SymMatrix& cov) {
  try {
    return cholesky(cov);
  } catch (const NotPositiveDefinite&) {
    return sqrt_psd(cov).matrix();
  }
}

void simulate_path(const LognormalMarket& market, const Matrix& factor, double maturity, std::size_t steps,
                   std::uint64_t seed, std::vector<double>& out) {
  const std::size_t n = market.x0.size();
  out.resize((steps + 1) * n);
  std::copy(market.x0.begin(), market.x0.end(), out.begin());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const double dt = maturity / static_cast<double>(steps);
  const double sdt = std::sqrt(dt);
  std::vector<double> z(n);
  for (std::size_t t = 0; t < steps; ++t) {
    for (auto& v : z) v = normal(rng);
    const double* prev = out.data() + t * n;
    double* next = out.data() + (t + 1) * n;
    for (std::size_t i = 0; i < n; ++i) {
      double inc = 0.0;
      for (std::size_t j = 0; j < n; ++j) inc += factor(i, j) * z[j];
      next[i] = prev[i] * std::exp(inc * sdt - 0.5 * market.cov(i, i) * dt);
    }
  }
}

PathArray simulate_paths(const LognormalMarket& market, double maturity, std::size_t steps, std::size_t paths) {
  market.validate();
  if (!(maturity > 0.0)) throw InvalidInput("maturity must be positive");
  if (steps < 1) throw InvalidInput("need at least one time step");
  const Matrix factor = covariance_factor(market.cov);
  const std::size_t n = market.x0.size();
  PathArray out(paths);
  std::vector<double> buf;
  for (std::size_t p = 0; p < paths; ++p) {
    simulate_path(market, factor, maturity, steps, derive_seed(market.seed, 2 * p), buf);
    out[p].resize(steps + 1);
    for (std::size_t t = 0; t <= steps; ++t) out[p][t].assign(buf.begin() + t * n, buf.begin() + (t + 1) * n);
  }
  return out;
}

namespace {

double weighted_sum(const std::vector<double>& w, const double* x) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
  return s;
}

}  // namespace

std::vector<double> basket_hat_weights(const std::vector<double>& weights, const std::vector<double>& x) {
  if (weights.size() != x.size()) throw InvalidInput("basket weights do not match the asset count");
  const double b = weighted_sum(weights, x.data());
  if (!(b > 0.0)) throw InvalidInput("basket value must be positive");
  std::vector<double> h(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) h[i] = weights[i] * x[i] / b;
  return h;
}

double basket_price(const std::vector<double>& weights, const std::vector<double>& x, double strike,
                    double cumvar) {
  if (weights.size() != x.size()) throw InvalidInput("basket weights do not match the asset count");
  const double b = weighted_sum(weights, x.data());
  if (!(b > 0.0)) throw InvalidInput("basket value must be positive");
  return black_price(b, strike, cumvar, 1.0);
}

std::vector<double> basket_delta(const std::vector<double>& weights, const std::vector<double>& x, double strike,
                                 double remaining_cumvar) {
  if (weights.size() != x.size()) throw InvalidInput("basket weights do not match the asset count");
  if (remaining_cumvar < 0.0) throw InvalidInput("negative remaining variance");
  if (!(strike > 0.0)) throw InvalidInput("strike must be positive");
  const double b = weighted_sum(weights, x.data());
  if (!(b > 0.0)) throw InvalidInput("basket value must be positive");
  double nh;
  if (remaining_cumvar == 0.0) {
    nh = b > strike ? 1.0 : 0.0;
  } else {
    const double sd = std::sqrt(remaining_cumvar);
    nh = normal_cdf((std::log(b / strike) + 0.5 * remaining_cumvar) / sd);
  }
  std::vector<double> d(weights.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = weights[i] * nh;
  return d;
}

std::string_view to_string(HedgeMethod m) {
  switch (m) {
    case HedgeMethod::RealCovariance: return "RealCovariance";
    case HedgeMethod::Robust: return "Robust";
    case HedgeMethod::SuperHedging: return "SuperHedging";
    case HedgeMethod::Parametrized: return "Parametrized";
  }
  return "unknown";
}

HedgeMethod parse_method(std::string_view s) {
  std::string l(s);
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  l.erase(std::remove(l.begin(), l.end(), '-'), l.end());
  l.erase(std::remove(l.begin(), l.end(), '_'), l.end());
  if (l == "real" || l == "realcovariance") return HedgeMethod::RealCovariance;
  if (l == "robust") return HedgeMethod::Robust;
  if (l == "superhedging" || l == "super") return HedgeMethod::SuperHedging;
  if (l == "parametrized" || l == "parameterized" || l == "parametric") return HedgeMethod::Parametrized;
  throw InvalidInput("unknown hedging method '" + std::string(s) + "'");
}

void HedgingExperiment::validate(std::size_t assets) const {
  if (target_weights.size() != assets) throw InvalidInput("target weights do not match the asset count");
  if (calibration_weights.empty()) throw InvalidInput("experiment needs calibration instruments");
  for (const auto& w : calibration_weights)
    if (w.size() != assets) throw InvalidInput("calibration weights do not match the asset count");
  if (!(maturity > 0.0)) throw InvalidInput("maturity must be positive");
  if (rebalances < 1) throw InvalidInput("need at least one rebalance");
  if (noise_amplitude < 0.0 || noise_amplitude >= 1.0) throw InvalidInput("noise amplitude must lie in [0, 1)");
  if (paths < 1) throw InvalidInput("need at least one path");
  if (methods.empty()) throw InvalidInput("no hedging methods selected");
}

namespace {

struct PathMethodResult {
  double ratio = 0.0;
  double change = 0.0;
  double premium = 0.0;
  double financing_error = 0.0;
  std::size_t fallback = 0;
  std::size_t failed = 0;
};

struct Quote {
  std::vector<double> hat;
  double basket = 0.0;
  double strike = 0.0;
  double target = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

double clamp_implied(double price, double forward, double strike) {
  const double lo = std::max(forward - strike, 0.0);
  const double hi = forward;
  if (price <= lo) return 0.0;
  price = std::min(price, hi * (1.0 - 1e-12));
  return implied_cumvariance(price, forward, strike, 1.0);
}

class PathRunner {
 public:
  PathRunner(const HedgingExperiment& exp, const LognormalMarket& market, const Matrix& factor)
      : exp_(exp), market_(market), factor_(factor), n_(market.x0.size()) {
    strikes_.resize(exp.calibration_weights.size());
    for (std::size_t k = 0; k < strikes_.size(); ++k)
      strikes_[k] = weighted_sum(exp.calibration_weights[k], market.x0.data());
    strike0_ = weighted_sum(exp.target_weights, market.x0.data());
  }

  double strike0() const { return strike0_; }

  std::vector<PathMethodResult> run(std::size_t path, double true_premium) {
    const std::size_t steps = exp_.rebalances;
    simulate_path(market_, factor_, exp_.maturity, steps, derive_seed(market_.seed, 2 * path), xs_);
    std::mt19937_64 noise_rng(derive_seed(market_.seed, 2 * path + 1));
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const double dt = exp_.maturity / static_cast<double>(steps);
    const double a = exp_.noise_amplitude;

    const std::size_t nm = exp_.methods.size();
    std::vector<PathMethodResult> res(nm);
    std::vector<BlockDiagMatrix> prev_x(nm);
    std::vector<std::vector<double>> delta(nm, std::vector<double>(n_, 0.0));
    std::vector<double> cash(nm, 0.0);
    std::vector<std::optional<std::vector<double>>> warm(nm);
    std::vector<Quote> quotes(strikes_.size());
    std::vector<double> x(n_);
    std::vector<double> shock(quotes.size());
    for (auto& v : shock) v = unif(noise_rng);

    for (std::size_t j = 0; j < steps; ++j) {
      const double tau = exp_.maturity - dt * static_cast<double>(j);
      std::copy(xs_.begin() + j * n_, xs_.begin() + (j + 1) * n_, x.begin());
      // Noisy quotes are shared by all methods at this date.
      for (std::size_t k = 0; k < quotes.size(); ++k) {
        Quote& q = quotes[k];
        const auto& w = exp_.calibration_weights[k];
        q.hat = basket_hat_weights(w, x);
        q.basket = weighted_sum(w, x.data());
        q.strike = strikes_[k];
        double var = 0.0;
        for (std::size_t r = 0; r < n_; ++r)
          for (std::size_t c = 0; c < n_; ++c) var += q.hat[r] * market_.cov(r, c) * q.hat[c];
        const double price = black_price(q.basket, q.strike, var * tau, 1.0);
        if (!exp_.noise_per_path) shock[k] = unif(noise_rng);
        const double noisy = price * (1.0 + a * shock[k]);
        q.target = clamp_implied(noisy, q.basket, q.strike);
        q.lower = clamp_implied(noisy / (1.0 + a), q.basket, q.strike);
        q.upper = clamp_implied(noisy / (1.0 - a), q.basket, q.strike);
      }
      const auto hat0 = basket_hat_weights(exp_.target_weights, x);

      for (std::size_t mi = 0; mi < nm; ++mi) {
        BlockDiagMatrix xm = calibrate_method(exp_.methods[mi], quotes, hat0, tau, prev_x[mi], warm[mi],
                                              res[mi], derive_seed(market_.seed ^ 0x5bd1e995ULL, path * steps + j));
        const SymMatrix& cx = xm.block(0);
        double v0 = 0.0;
        for (std::size_t r = 0; r < n_; ++r)
          for (std::size_t c = 0; c < n_; ++c) v0 += hat0[r] * cx(r, c) * hat0[c];
        v0 = std::max(v0, 0.0) * tau;
        const auto d = basket_delta(exp_.target_weights, x, strike0_, v0);
        if (j == 0) {
          res[mi].premium = basket_price(exp_.target_weights, x, strike0_, v0);
          cash[mi] = res[mi].premium - weighted_sum(d, x.data());
        } else {
          const double before = cash[mi] + weighted_sum(delta[mi], x.data());
          for (std::size_t i = 0; i < n_; ++i) cash[mi] -= (d[i] - delta[mi][i]) * x[i];
          const double after = cash[mi] + weighted_sum(d, x.data());
          res[mi].financing_error = std::max(res[mi].financing_error, std::abs(after - before) / strike0_);
          res[mi].change += frobenius_norm(xm - prev_x[mi]);
        }
        delta[mi] = d;
        prev_x[mi] = std::move(xm);
      }
    }

    const double* xt = xs_.data() + steps * n_;
    const double payoff = std::max(weighted_sum(exp_.target_weights, xt) - strike0_, 0.0);
    for (std::size_t mi = 0; mi < nm; ++mi) {
      const double value = cash[mi] + weighted_sum(delta[mi], xt);
      res[mi].ratio = (value - payoff) / true_premium;
      if (steps > 1) res[mi].change /= static_cast<double>(steps - 1);
    }
    return res;
  }

 private:
  CalibrationSpec make_spec(const std::vector<Quote>& quotes, double tau, bool band) const {
    CalibrationSpec spec;
    spec.blocks = {n_};
    spec.solver = exp_.solver;
    spec.mode = band ? CalibrationMode::BidAsk : CalibrationMode::Equality;
    for (const auto& q : quotes) {
      CalibrationRow row;
      row.omega = BlockDiagMatrix({SymMatrix::outer(q.hat, tau)});
      row.target = q.target;
      row.lower = q.lower;
      row.upper = q.upper;
      spec.rows.push_back(std::move(row));
    }
    return spec;
  }

  BlockDiagMatrix calibrate_method(HedgeMethod m, const std::vector<Quote>& quotes, const std::vector<double>& hat0,
                                   double tau, const BlockDiagMatrix& prev, std::optional<std::vector<double>>& warm,
                                   PathMethodResult& res, std::uint64_t seed) const {
    if (m == HedgeMethod::RealCovariance) return BlockDiagMatrix({market_.cov});
    if (m == HedgeMethod::Parametrized) {
      ParametricOptions po;
      po.restarts = exp_.parametric_restarts;
      po.max_evaluations = exp_.parametric_evaluations;
      po.seed = seed;
      po.initial = warm;
      auto fit = calibrate_parametric_twofactor(make_spec(quotes, tau, false), po);
      std::vector<double> p = fit.vols;
      p.insert(p.end(), fit.angles.begin(), fit.angles.end());
      warm = std::move(p);
      return std::move(fit.result.x);
    }
    for (int attempt = 0; attempt < 2; ++attempt) {
      CalibrationSpec spec = make_spec(quotes, tau, attempt == 1);
      if (m == HedgeMethod::SuperHedging) {
        spec.objective.kind = ObjectiveKind::MaximizeTarget;
        spec.objective.matrix = BlockDiagMatrix({SymMatrix::outer(hat0, tau)});
      } else {
        spec.objective.kind = ObjectiveKind::MinSpectralNorm;
      }
      try {
        auto r = calibrate(spec);
        if (attempt == 1) ++res.fallback;
        return std::move(r.x);
      } catch (const Error&) {
      }
    }
    ++res.failed;
    if (prev.num_blocks() > 0) return prev;
    // No earlier calibration on this path: uncorrelated fit to the
    // single-asset quotes.
    SymMatrix d(n_);
    for (const auto& q : quotes) {
      std::size_t nz = 0, idx = 0;
      for (std::size_t i = 0; i < n_; ++i)
        if (q.hat[i] != 0.0) {
          ++nz;
          idx = i;
        }
      if (nz == 1) d.set(idx, idx, q.target / tau);
    }
    return BlockDiagMatrix({std::move(d)});
  }

  const HedgingExperiment& exp_;
  const LognormalMarket& market_;
  const Matrix& factor_;
  std::size_t n_;
  std::vector<double> strikes_;
  double strike0_ = 0.0;
  std::vector<double> xs_;
};

}  // namespace

PnLReport run_hedging_experiment(const HedgingExperiment& exp, const LognormalMarket& market) {
  market.validate();
  exp.validate(market.x0.size());
  const Matrix factor = covariance_factor(market.cov);
  const std::size_t nm = exp.methods.size();

  const auto hat0 = basket_hat_weights(exp.target_weights, market.x0);
  double var0 = 0.0;
  for (std::size_t r = 0; r < hat0.size(); ++r)
    for (std::size_t c = 0; c < hat0.size(); ++c) var0 += hat0[r] * market.cov(r, c) * hat0[c];
  const double strike0 = weighted_sum(exp.target_weights, market.x0.data());
  const double true_premium = basket_price(exp.target_weights, market.x0, strike0, var0 * exp.maturity);
  if (!(true_premium > 0.0)) throw InvalidInput("target option has zero premium");

  std::vector<std::vector<PathMethodResult>> per_path(exp.paths);
  unsigned threads = exp.threads ? exp.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, exp.paths));
  std::vector<std::exception_ptr> errors(threads);
  auto worker = [&](unsigned id) {
    try {
      PathRunner runner(exp, market, factor);
      for (std::size_t p = id; p < exp.paths; p += threads) per_path[p] = runner.run(p, true_premium);
    } catch (...) {
      errors[id] = std::current_exception();
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  PnLReport rep;
  rep.paths = exp.paths;
  rep.rebalances = exp.rebalances;
  rep.seed = market.seed;
  rep.true_premium = true_premium;
  for (std::size_t mi = 0; mi < nm; ++mi) {
    MethodStats s;
    s.method = exp.methods[mi];
    s.ratios.reserve(exp.paths);
    double sum = 0.0, change = 0.0, premium = 0.0;
    std::size_t positive = 0;
    for (std::size_t p = 0; p < exp.paths; ++p) {
      const auto& r = per_path[p][mi];
      s.ratios.push_back(r.ratio);
      sum += r.ratio;
      change += r.change;
      premium += r.premium;
      if (r.ratio > 0.0) ++positive;
      s.fallback_calibrations += r.fallback;
      s.failed_calibrations += r.failed;
      if (r.failed) ++s.flagged_paths;
      rep.max_financing_error = std::max(rep.max_financing_error, r.financing_error);
    }
    const double np = static_cast<double>(exp.paths);
    s.mean = sum / np;
    double ss = 0.0;
    for (double v : s.ratios) ss += (v - s.mean) * (v - s.mean);
    s.stdev = exp.paths > 1 ? std::sqrt(ss / (np - 1.0)) : 0.0;
    s.fraction_positive = static_cast<double>(positive) / np;
    s.mean_change = change / np;
    s.mean_premium = premium / np;
    rep.methods.push_back(std::move(s));
  }
  return rep;
}

std::vector<BoundsCell> run_bounds_sweep(const DiscountCurve& curve, const std::vector<SwaptionInstrument>& calib,
                                         std::size_t horizon, double period, const SolverOptions& opts,
                                         const std::vector<std::pair<std::size_t, std::size_t>>& grid) {
  std::vector<std::pair<std::size_t, std::size_t>> cells = grid;
  if (cells.empty())
    for (std::size_t s = 1; s <= horizon; ++s)
      for (std::size_t t = 1; s + t - 1 <= horizon; ++t) cells.emplace_back(s, t);

  CalibrationSpec spec = make_spec(calib, horizon, period, VariableForm::Stationary);
  spec.solver = opts;
  std::vector<BoundsCell> out;
  out.reserve(cells.size());
  for (const auto& [s, t] : cells) {
    BoundsCell cell;
    cell.expiry = s;
    cell.tenor = t;
    for (const auto& inst : calib)
      if (inst.quote.expiry == s && inst.quote.end == s + t - 1) {
        cell.market_vol = inst.quote.vol;
        cell.calibrated = true;
      }
    try {
      SwaptionQuote q;
      q.expiry = s;
      q.end = s + t - 1;
      q.vol = 1.0;
      const SwaptionInstrument target = make_instrument(curve, q);
      const CalibrationRow row = make_row(target, horizon, period, VariableForm::Stationary);
      const BlackTerms terms = black_terms(target);
      cell.upper_vol = price_bounds(row, terms, spec, BoundDirection::Upper).bound_vol;
      cell.lower_vol = price_bounds(row, terms, spec, BoundDirection::Lower).bound_vol;
    } catch (const Error& e) {
      cell.error = e.what();
    }
    out.push_back(std::move(cell));
  }
  return out;
}

}  // namespace lmmsdp
