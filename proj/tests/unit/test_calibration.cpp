#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "lmmsdp/calibration.hpp"
#include "lmmsdp/errors.hpp"
#include "lmmsdp/linalg.hpp"
#include "support.hpp"

using namespace lmmsdp;
using testing::row;
using testing::unit;

namespace {

CalibrationSpec scalar_spec(std::vector<CalibrationRow> rows) {
  CalibrationSpec s;
  s.blocks = {1};
  s.rows = std::move(rows);
  return s;
}

SymMatrix one() { return SymMatrix(1, 1.0); }

// Baskets e_i (single assets) and e_i + e_j on n assets.
std::vector<std::vector<double>> basket_weights(std::size_t n, bool all_pairs) {
  std::vector<std::vector<double>> w;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> e(n, 0.0);
    e[i] = 1.0;
    w.push_back(e);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!all_pairs && !(i == 0 && j == 1)) continue;
      std::vector<double> e(n, 0.0);
      e[i] = e[j] = 1.0;
      w.push_back(e);
    }
  return w;
}

CalibrationSpec basket_spec(const SymMatrix& truth, const std::vector<std::vector<double>>& weights) {
  CalibrationSpec s;
  s.blocks = {truth.dim()};
  for (const auto& w : weights) {
    const auto om = SymMatrix::outer(w);
    s.rows.push_back(row(om, dot(om, truth)));
  }
  return s;
}

}  // namespace

TEST_CASE("single caplet calibrates exactly") {
  const auto curve = DiscountCurve::flat(0.05, 1.0, 1);
  SwaptionQuote q;
  q.expiry = q.end = 1;
  q.vol = 0.15;
  const auto spec = make_spec({make_instrument(curve, q)}, 1, 1.0, VariableForm::Stationary);
  const auto r = calibrate(spec);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.x.block(0)(0, 0) == doctest::Approx(0.0225).epsilon(1e-8));
  CHECK(r.sensitivity.size() == 1);
}

TEST_CASE("identical Omega with different targets is infeasible") {
  auto spec = scalar_spec({row(one(), 0.02), row(one(), 0.03)});
  try {
    calibrate(spec);
    FAIL("expected InfeasibleCalibration");
  } catch (const InfeasibleCalibration& e) {
    const auto& y = e.certificate();
    REQUIRE(y.size() == 2);
    CHECK(0.02 * y[0] + 0.03 * y[1] > 0.0);
    CHECK(y[0] + y[1] <= 1e-10);
  }
}

TEST_CASE("Sydney fixture calibrates with all constraints met") {
  const auto s = testing::sydney();
  CHECK(s.spec.rows.size() == 28);
  CHECK(s.spec.blocks == std::vector<std::size_t>{20});
  const auto r = calibrate(s.spec);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(testing::max_relative_misfit(s.spec, r.x) <= 1e-6);
  CHECK(testing::min_eig(r.x) >= -1e-8);
  // Minimum trace: the objective equals Tr(X).
  CHECK(r.objective == doctest::Approx(trace(r.x)).epsilon(1e-8));
}

TEST_CASE("l-infinity centering") {
  SUBCASE("symmetric spread centres at the midpoint") {
    const auto r = calibrate_robust_linf(scalar_spec({row(one(), 0.03, 0.02, 0.04)}));
    REQUIRE(r.margin.has_value());
    CHECK(*r.margin == doctest::Approx(0.01).epsilon(1e-7));
    CHECK(r.x.block(0)(0, 0) == doctest::Approx(0.03).epsilon(1e-7));
  }
  SUBCASE("zero-width spread recovers the equality") {
    const auto r = calibrate_robust_linf(scalar_spec({row(one(), 0.03, 0.03, 0.03)}));
    CHECK(*r.margin == 0.0);
    CHECK(r.x.block(0)(0, 0) == doctest::Approx(0.03).epsilon(1e-8));
  }
  SUBCASE("disjoint spreads are infeasible") {
    auto spec = scalar_spec({row(one(), 0.03, 0.02, 0.04), row(one(), 0.06, 0.05, 0.07)});
    CHECK_THROWS_AS(calibrate_robust_linf(spec), InfeasibleCalibration);
  }
  SUBCASE("missing spread is rejected") {
    CHECK_THROWS_AS(calibrate_robust_linf(scalar_spec({row(one(), 0.03)})), InvalidInput);
  }
}

TEST_CASE("l1 centering") {
  SUBCASE("single instrument") {
    const auto r = calibrate_robust_l1(scalar_spec({row(one(), 0.03, 0.02, 0.04)}));
    REQUIRE(r.margins.size() == 1);
    CHECK(r.margins[0] == doctest::Approx(0.01).epsilon(1e-7));
    CHECK(r.x.block(0)(0, 0) == doctest::Approx(0.03).epsilon(1e-7));
  }
  SUBCASE("orthogonal instruments separate") {
    CalibrationSpec s;
    s.blocks = {2};
    s.rows = {row(unit(2, 0), 0.03, 0.02, 0.04), row(unit(2, 1), 0.03, 0.01, 0.05)};
    const auto r = calibrate_robust_l1(s);
    CHECK(r.margins[0] == doctest::Approx(0.01).epsilon(1e-7));
    CHECK(r.margins[1] == doctest::Approx(0.02).epsilon(1e-7));
    CHECK(*r.margin == doctest::Approx(0.03).epsilon(1e-7));
  }
}

TEST_CASE("confidence calibration") {
  SUBCASE("attainable targets give t = 0") {
    CalibrationSpec s;
    s.blocks = {2};
    s.rows = {row(unit(2, 0), 0.02), row(unit(2, 1), 0.03)};
    const auto r = calibrate_confidence(s, SymMatrix::identity(2));
    CHECK(*r.margin == doctest::Approx(0.0).epsilon(1e-7).scale(1.0));
    CHECK(*r.confidence == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("two quotes on one direction split the misfit") {
    // |x - 0.02| and |x - 0.04| are both at most t, so t = 0.01 at x = 0.03.
    const auto r = calibrate_confidence(scalar_spec({row(one(), 0.02), row(one(), 0.04)}), SymMatrix::identity(2));
    CHECK(*r.margin == doctest::Approx(0.01).epsilon(1e-7));
    CHECK(r.x.block(0)(0, 0) == doctest::Approx(0.03).epsilon(1e-7));
    CHECK(*r.confidence == doctest::Approx(std::erfc(0.01 / std::sqrt(2.0))).epsilon(1e-9));
  }
  SUBCASE("covariance must be PD") {
    auto s = scalar_spec({row(one(), 0.02), row(one(), 0.04)});
    CHECK_THROWS_AS(calibrate_confidence(s, SymMatrix::from_rows({{1, 2}, {2, 1}})), InvalidInput);
    CHECK_THROWS_AS(calibrate_confidence(s, SymMatrix::identity(3)), InvalidInput);
  }
}

TEST_CASE("minimum spectral norm") {
  SUBCASE("one constrained diagonal entry") {
    CalibrationSpec s;
    s.blocks = {2};
    s.rows = {row(unit(2, 0), 0.04)};
    const auto r = calibrate_minnorm(s);
    CHECK(r.objective == doctest::Approx(0.04).epsilon(1e-7));
    CHECK(spectral_norm(r.x.block(0)) <= 0.04 * (1 + 1e-7));
  }
  SUBCASE("no constraints gives zero") {
    CalibrationSpec s;
    s.blocks = {3};
    const auto r = calibrate_minnorm(s);
    CHECK(frobenius_norm(r.x) <= 1e-7);
  }
  SUBCASE("spread across a basket") {
    // 1^T X 1 <= 3 lambda_max(X), attained by X = 0.01 * 11^T.
    CalibrationSpec s;
    s.blocks = {3};
    s.rows = {row(SymMatrix::outer(std::vector<double>{1, 1, 1}), 0.09)};
    const auto r = calibrate_minnorm(s);
    CHECK(r.objective == doctest::Approx(0.03).epsilon(1e-7));
  }
}

TEST_CASE("target objectives and priors") {
  const auto c = exponential_prior(4, 0.5);
  CHECK(c(0, 0) == 1.0);
  CHECK(c(0, 3) == doctest::Approx(std::exp(-1.5)));
  CHECK(min_eigenvalue(c) > 0.0);

  CalibrationSpec s;
  s.blocks = {2};
  s.rows = {row(unit(2, 0), 0.04), row(unit(2, 1), 0.01)};
  s.objective.kind = ObjectiveKind::MaximizeTarget;
  s.objective.matrix = BlockDiagMatrix({SymMatrix::outer(std::vector<double>{1, 1})});
  const auto hi = calibrate(s);
  // Perfect correlation: (0.2 + 0.1)^2.
  CHECK(hi.objective == doctest::Approx(0.09).epsilon(1e-7));
  s.objective.kind = ObjectiveKind::MinimizeTarget;
  const auto lo = calibrate(s);
  CHECK(lo.objective == doctest::Approx(0.01).epsilon(1e-6));

  s.objective.matrix = BlockDiagMatrix({SymMatrix::identity(3)});
  CHECK_THROWS_AS(calibrate(s), InvalidInput);
  s.objective.matrix.reset();
  CHECK_THROWS_AS(calibrate(s), InvalidInput);
}

TEST_CASE("bid-ask mode keeps every row inside its spread") {
  auto s = testing::sydney();
  for (auto& r : s.spec.rows) {
    r.lower = r.target * 0.95;
    r.upper = r.target * 1.05;
  }
  s.spec.mode = CalibrationMode::BidAsk;
  const auto r = calibrate(s.spec);
  REQUIRE(r.status == SolveStatus::Optimal);
  for (const auto& row : s.spec.rows) {
    const double v = dot(row.omega, r.x);
    CHECK(v >= *row.lower * (1 - 1e-7));
    CHECK(v <= *row.upper * (1 + 1e-7));
  }
  // A strictly slack row has zero sensitivity.
  for (std::size_t k = 0; k < s.spec.rows.size(); ++k) {
    const double v = dot(s.spec.rows[k].omega, r.x);
    if (v > *s.spec.rows[k].lower * 1.001 && v < *s.spec.rows[k].upper * 0.999)
      CHECK(std::abs(r.sensitivity[k]) <= 1e-5);
  }
}

TEST_CASE("parametric two-factor fit") {
  SUBCASE("rank-two truth is recovered") {
    const std::size_t n = 5;
    Matrix b(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
      const double v = 0.1 + 0.02 * static_cast<double>(i), th = 0.3 * static_cast<double>(i);
      b(i, 0) = v * std::cos(th);
      b(i, 1) = v * std::sin(th);
    }
    const SymMatrix truth = SymMatrix::symmetrized(b * transpose(b));
    const auto spec = basket_spec(truth, basket_weights(n, false));
    const auto fit = calibrate_parametric_twofactor(spec);
    CHECK(fit.residual <= 1e-6);
    CHECK_FALSE(fit.result.has_duals);
    CHECK(fit.vols.size() == n);
    CHECK(min_eigenvalue(fit.result.x.block(0)) >= -1e-12);
    // Rank at most two.
    const auto ev = eigenvalues(fit.result.x.block(0));
    CHECK(std::abs(ev[0]) + std::abs(ev[1]) + std::abs(ev[2]) <= 1e-10);
  }
  SUBCASE("rank-five truth cannot be matched on all pairs") {
    const SymMatrix cov = SymMatrix::from_rows({{0.0144, 0.0133, 0.0074, 0.0029, 0.0013},
                                                {0.0133, 0.0225, 0.0151, 0.0063, 0.0032},
                                                {0.0074, 0.0151, 0.0144, 0.0065, 0.0032},
                                                {0.0029, 0.0063, 0.0065, 0.0081, 0.0027},
                                                {0.0013, 0.0032, 0.0032, 0.0027, 0.0036}});
    const auto spec = basket_spec(cov, basket_weights(5, true));
    ParametricOptions o;
    o.restarts = 3;
    const auto fit = calibrate_parametric_twofactor(spec, o);
    CHECK(fit.residual > 1e-12);
  }
  SUBCASE("single caplet is fit exactly") {
    CalibrationSpec s;
    s.blocks = {3};
    s.rows = {row(unit(3, 0), 0.0225)};
    const auto fit = calibrate_parametric_twofactor(s);
    CHECK(fit.residual <= 1e-10);
    CHECK(fit.result.x.block(0)(0, 0) == doctest::Approx(0.0225).epsilon(1e-4));
  }
  SUBCASE("deterministic for a fixed seed") {
    CalibrationSpec s;
    s.blocks = {3};
    s.rows = {row(unit(3, 0), 0.0225), row(SymMatrix::outer(std::vector<double>{1, 1, 0}), 0.05)};
    const auto a = calibrate_parametric_twofactor(s);
    const auto b = calibrate_parametric_twofactor(s);
    CHECK(a.residual == b.residual);
    CHECK(a.vols == b.vols);
  }
}

TEST_CASE("non-stationary form on a small calendar") {
  const auto curve = DiscountCurve::flat(0.04, 1.0, 4);
  std::vector<SwaptionInstrument> inst;
  for (std::size_t s = 1; s <= 4; ++s) {
    SwaptionQuote q;
    q.expiry = q.end = s;
    q.vol = 0.15 - 0.005 * static_cast<double>(s);
    inst.push_back(make_instrument(curve, q));
  }
  SwaptionQuote q;
  q.expiry = 2;
  q.end = 3;
  q.vol = 0.13;
  inst.push_back(make_instrument(curve, q));
  const auto spec = make_spec(inst, 4, 1.0, VariableForm::NonStationary);
  CHECK(spec.blocks == std::vector<std::size_t>{4, 3, 2, 1});
  const auto r = calibrate(spec);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(testing::max_relative_misfit(spec, r.x) <= 1e-6);
  CHECK(testing::min_eig(r.x) >= -1e-8);
}
