#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "lmmsdp/errors.hpp"
#include "lmmsdp/simulation.hpp"
#include "support.hpp"

using namespace lmmsdp;

namespace {

SymMatrix experiment_cov() {
  return SymMatrix::from_rows({{0.0144, 0.0133, 0.0074, 0.0029, 0.0013},
                               {0.0133, 0.0225, 0.0151, 0.0063, 0.0032},
                               {0.0074, 0.0151, 0.0144, 0.0065, 0.0032},
                               {0.0029, 0.0063, 0.0065, 0.0081, 0.0027},
                               {0.0013, 0.0032, 0.0032, 0.0027, 0.0036}});
}

LognormalMarket experiment_market(std::uint64_t seed = 7) { return {std::vector<double>(5, 0.1), experiment_cov(), seed}; }

HedgingExperiment small_experiment() {
  HedgingExperiment e;
  e.target_weights = {0, 0, 0.4, 0.1, 0.5};
  for (std::size_t i = 0; i < 5; ++i) {
    std::vector<double> w(5, 0.0);
    w[i] = 1.0;
    e.calibration_weights.push_back(w);
  }
  e.calibration_weights.push_back({1, 1, 0, 0, 0});
  e.paths = 12;
  e.rebalances = 6;
  e.threads = 1;
  e.parametric_restarts = 2;
  e.parametric_evaluations = 400;
  return e;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

}  // namespace

TEST_CASE("seeds are distinct per stream and reproducible") {
  CHECK(derive_seed(1, 0) == derive_seed(1, 0));
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
}

TEST_CASE("zero covariance gives constant paths") {
  const LognormalMarket m{{0.1, 0.2}, SymMatrix(2), 3};
  const auto p = simulate_paths(m, 1.0, 4, 3);
  for (const auto& path : p)
    for (const auto& step : path) {
      CHECK(step[0] == 0.1);
      CHECK(step[1] == 0.2);
    }
  CHECK_THROWS_AS(simulate_paths(m, 0.0, 4, 3), InvalidInput);
  CHECK_THROWS_AS(simulate_paths(m, 1.0, 0, 3), InvalidInput);
}

TEST_CASE("market validation") {
  LognormalMarket m{{0.1, -0.2}, SymMatrix::identity(2), 3};
  CHECK_THROWS_AS(m.validate(), InvalidInput);
  m.x0 = {0.1, 0.2};
  m.cov = SymMatrix::from_rows({{1, 2}, {2, 1}});
  CHECK_THROWS_AS(m.validate(), InvalidInput);
  m.cov = SymMatrix::identity(3);
  CHECK_THROWS_AS(m.validate(), InvalidInput);
}

TEST_CASE("covariance factor handles semidefinite input") {
  const auto pd = experiment_cov();
  const auto l = covariance_factor(pd);
  CHECK(testing::max_abs_diff(SymMatrix::symmetrized(l * transpose(l)), pd) <= 1e-15);
  const auto psd = SymMatrix::outer(std::vector<double>{0.1, 0.2, 0.3});
  const auto r = covariance_factor(psd);
  CHECK(testing::max_abs_diff(SymMatrix::symmetrized(r * transpose(r)), psd) <= 1e-14);
}

TEST_CASE("lognormal stepping is a martingale with the right covariance") {
  const auto m = experiment_market(99);
  const std::size_t n = 100000;
  const auto paths = simulate_paths(m, 1.0, 1, n);
  const auto cov = experiment_cov();
  for (std::size_t i = 0; i < 5; ++i) {
    double s = 0.0, s2 = 0.0;
    for (const auto& p : paths) {
      const double r = p[1][i] / p[0][i];
      s += r;
      s2 += r * r;
    }
    const double mu = s / n, se = std::sqrt((s2 / n - mu * mu) / n);
    CHECK(std::abs(mu - 1.0) <= 3.0 * se);
  }
  SymMatrix est(5);
  std::vector<double> lm(5, 0.0);
  for (const auto& p : paths)
    for (std::size_t i = 0; i < 5; ++i) lm[i] += std::log(p[1][i] / p[0][i]) / n;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double c = 0.0;
      for (const auto& p : paths)
        c += (std::log(p[1][i] / p[0][i]) - lm[i]) * (std::log(p[1][j] / p[0][j]) - lm[j]);
      est.set(i, j, c / (n - 1));
    }
  CHECK(frobenius_norm(est - cov) <= 0.05 * frobenius_norm(cov));
  for (std::size_t i = 0; i < 5; ++i) CHECK(est(i, i) == doctest::Approx(cov(i, i)).epsilon(0.05));
}

TEST_CASE("basket delta") {
  const std::vector<double> w{0.4, 0.1, 0.5};
  const auto itm = basket_delta(w, {1.0, 1.0, 1.0}, 0.1, 0.04);
  for (std::size_t i = 0; i < 3; ++i) CHECK(itm[i] == doctest::Approx(w[i]).epsilon(1e-12));
  const auto otm = basket_delta(w, {0.01, 0.01, 0.01}, 1.0, 0.04);
  for (double d : otm) CHECK(std::abs(d) <= 1e-12);
  CHECK(basket_delta(w, {0.1, 0.1, 0.1}, 0.09, 0.0) == w);
  CHECK(basket_delta(w, {0.1, 0.1, 0.1}, 0.11, 0.0) == std::vector<double>(3, 0.0));

  const std::vector<double> x{0.1, 0.12, 0.09};
  const double k = 0.1, v = 0.03, h = 1e-5;
  const auto d = basket_delta(w, x, k, v);
  for (std::size_t i = 0; i < 3; ++i) {
    auto up = x, dn = x;
    up[i] += h;
    dn[i] -= h;
    const double fd = (basket_price(w, up, k, v) - basket_price(w, dn, k, v)) / (2 * h);
    CHECK(d[i] == doctest::Approx(fd).epsilon(1e-4));
  }
  const auto hw = basket_hat_weights(w, x);
  CHECK(std::accumulate(hw.begin(), hw.end(), 0.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(basket_delta(w, x, k, -1.0), InvalidInput);
  CHECK_THROWS_AS(basket_delta({1.0}, x, k, v), InvalidInput);
}

TEST_CASE("method names") {
  for (auto m : {HedgeMethod::RealCovariance, HedgeMethod::Robust, HedgeMethod::SuperHedging, HedgeMethod::Parametrized})
    CHECK(parse_method(to_string(m)) == m);
  CHECK(parse_method("robust") == HedgeMethod::Robust);
  CHECK(parse_method("superhedging") == HedgeMethod::SuperHedging);
  CHECK_THROWS_AS(parse_method("delta"), InvalidInput);
}

TEST_CASE("hedging experiment is deterministic and self-financing") {
  const auto market = experiment_market(2024);
  auto e = small_experiment();
  const auto a = run_hedging_experiment(e, market);
  const auto b = run_hedging_experiment(e, market);
  e.threads = 3;
  const auto c = run_hedging_experiment(e, market);
  REQUIRE(a.methods.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(a.methods[k].ratios == b.methods[k].ratios);
    CHECK(a.methods[k].ratios == c.methods[k].ratios);
    CHECK(a.methods[k].mean_change == c.methods[k].mean_change);
    CHECK(a.methods[k].ratios.size() == e.paths);
  }
  CHECK(a.max_financing_error <= 1e-10);
  CHECK(a.methods[0].mean_change == 0.0);
  CHECK(a.methods[0].mean_premium == doctest::Approx(a.true_premium).epsilon(1e-12));
  // Super-hedging charges at least the calibrated upper bound.
  CHECK(a.methods[2].mean_premium >= a.methods[1].mean_premium);

  auto bad = small_experiment();
  bad.noise_amplitude = 1.0;
  CHECK_THROWS_AS(run_hedging_experiment(bad, market), InvalidInput);
  bad = small_experiment();
  bad.target_weights = {1, 0};
  CHECK_THROWS_AS(run_hedging_experiment(bad, market), InvalidInput);
}

TEST_CASE("discrete hedging error shrinks with rebalancing") {
  const auto market = experiment_market(31);
  auto e = small_experiment();
  e.methods = {HedgeMethod::RealCovariance};
  e.noise_amplitude = 0.0;
  e.paths = 2000;
  std::vector<double> means, ses, abs_means;
  for (std::size_t reb : {33u, 100u, 333u}) {
    e.rebalances = reb;
    const auto r = run_hedging_experiment(e, market);
    const auto& st = r.methods[0];
    means.push_back(st.mean);
    ses.push_back(st.stdev / std::sqrt(static_cast<double>(e.paths)));
    double s = 0.0;
    for (double v : st.ratios) s += std::abs(v);
    abs_means.push_back(s / static_cast<double>(st.ratios.size()));
    CHECK(st.mean == doctest::Approx(mean(st.ratios)).epsilon(1e-12));
  }
  MESSAGE("means " << means[0] << " " << means[1] << " " << means[2] << "; mean |ratio| " << abs_means[0] << " "
                   << abs_means[1] << " " << abs_means[2]);
  CHECK(std::abs(means[2]) <= 0.05);
  CHECK(abs_means[2] <= 0.05);
  for (std::size_t i = 1; i < 3; ++i) {
    CHECK(std::abs(means[i]) <= std::abs(means[i - 1]) + 3.0 * ses[i - 1]);
    CHECK(abs_means[i] < abs_means[i - 1]);
  }
}

TEST_CASE("bounds sweep on a small grid") {
  const auto s = testing::sydney();
  const std::vector<std::pair<std::size_t, std::size_t>> grid{{5, 2}, {3, 4}, {1, 1}};
  const auto cells = run_bounds_sweep(s.curve, s.instruments, 20, 1.0, {}, grid);
  REQUIRE(cells.size() == 3);
  for (const auto& c : cells) {
    REQUIRE(c.error.empty());
    CHECK(*c.lower_vol <= *c.upper_vol + 1e-12);
  }
  CHECK(cells[0].calibrated);
  CHECK(*cells[0].market_vol == doctest::Approx(0.14));
  CHECK(std::abs(*cells[0].upper_vol - 0.14) <= 1e-4);
  CHECK(std::abs(*cells[0].lower_vol - 0.14) <= 1e-4);
  CHECK_FALSE(cells[1].calibrated);
  CHECK_FALSE(cells[1].market_vol.has_value());
  CHECK(cells[2].calibrated);
}
