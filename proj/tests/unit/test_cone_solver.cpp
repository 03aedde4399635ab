#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "lmmsdp/cone_program.hpp"
#include "lmmsdp/errors.hpp"
#include "lmmsdp/kernels.hpp"
#include "lmmsdp/linalg.hpp"
#include "sdp_gen.hpp"
#include "support.hpp"

using namespace lmmsdp;

namespace {

SymMatrix scalar(double v) { return SymMatrix(1, v); }

}  // namespace

TEST_CASE("scalar LP") {
  ConeProgram p;
  p.blocks = {1};
  p.c = BlockDiagMatrix({scalar(1.0)});
  p.constraints.push_back({BlockDiagMatrix({scalar(1.0)}), 1.0});
  const auto s = solve(p);
  REQUIRE(s.status == SolveStatus::Optimal);
  CHECK(s.x.block(0)(0, 0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(s.primal_objective == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(s.y[0] == doctest::Approx(1.0).epsilon(1e-6));

  SUBCASE("hand-built optimal pair has zero residuals") {
    ConeSolution h;
    h.x = BlockDiagMatrix({scalar(1.0)});
    h.z = BlockDiagMatrix({scalar(0.0)});
    h.y = {1.0};
    const auto k = check_kkt(p, h);
    CHECK(k.primal_residual <= 1e-12);
    CHECK(k.dual_residual <= 1e-12);
    CHECK(std::abs(k.gap) <= 1e-12);
  }
}

TEST_CASE("trace objective equal to the constraint") {
  ConeProgram p;
  p.blocks = {3};
  p.c = BlockDiagMatrix({SymMatrix::identity(3)});
  p.constraints.push_back({BlockDiagMatrix({SymMatrix::identity(3)}), 1.0});
  const auto s = solve(p);
  REQUIRE(s.status == SolveStatus::Optimal);
  CHECK(s.primal_objective == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(std::abs(s.gap) <= 1e-8);
}

TEST_CASE("largest eigenvalue through an LMI") {
  // minimize t s.t. t I - A = W, W >= 0, with t in a 1x1 block.
  const SymMatrix a = SymMatrix::from_rows({{1, 2}, {2, 1}});
  ConeProgram p;
  p.blocks = {1, 2};
  p.c = BlockDiagMatrix({scalar(1.0), SymMatrix(2)});
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      SymMatrix e(2);
      e.set(i, j, i == j ? 1.0 : 0.5);
      p.constraints.push_back({BlockDiagMatrix({scalar(i == j ? 1.0 : 0.0), -1.0 * e}), a(i, j)});
    }
  const auto s = solve(p);
  REQUIRE(s.status == SolveStatus::Optimal);
  CHECK(s.primal_objective == doctest::Approx(testing::oracle_eigenvalues(a).back()).epsilon(1e-7));
}

TEST_CASE("maximize sense reports objectives in its own sense") {
  std::mt19937_64 rng(17);
  const auto c = testing::random_sym(4, rng);
  ConeProgram p;
  p.blocks = {4};
  p.sense = Sense::Maximize;
  p.c = BlockDiagMatrix({c});
  p.constraints.push_back({BlockDiagMatrix({SymMatrix::identity(4)}), 1.0});
  const auto s = solve(p);
  REQUIRE(s.status == SolveStatus::Optimal);
  CHECK(s.primal_objective == doctest::Approx(testing::oracle_eigenvalues(c).back()).epsilon(1e-7));
  CHECK(s.dual_objective == doctest::Approx(s.primal_objective).epsilon(1e-7));
}

TEST_CASE("inconsistent duplicate rows give a Farkas certificate") {
  std::mt19937_64 rng(1);
  const auto omega = testing::random_pd(3, rng);
  ConeProgram p;
  p.blocks = {3};
  p.c = BlockDiagMatrix({SymMatrix::identity(3)});
  p.constraints.push_back({BlockDiagMatrix({omega}), 1.0});
  p.constraints.push_back({BlockDiagMatrix({omega}), 2.0});
  const auto s = solve(p);
  REQUIRE(s.status == SolveStatus::PrimalInfeasible);
  REQUIRE(s.certificate.has_value());
  const auto& y = *s.certificate;
  CHECK(y[0] * 1.0 + y[1] * 2.0 > 0.0);
  CHECK(y[0] == doctest::Approx(-y[1]).epsilon(1e-9));
  const auto aty = apply_adjoint(p, y);
  CHECK(max_eigenvalue(aty.block(0)) <= 1e-10);
}

TEST_CASE("infeasible by positivity") {
  // X11 = -1 has no PSD solution.
  ConeProgram p;
  p.blocks = {2};
  p.c = BlockDiagMatrix({SymMatrix::identity(2)});
  SymMatrix e(2);
  e.set(0, 0, 1.0);
  p.constraints.push_back({BlockDiagMatrix({e}), -1.0});
  const auto s = solve(p);
  REQUIRE(s.status == SolveStatus::PrimalInfeasible);
  const auto& y = *s.certificate;
  CHECK(-y[0] > 0.0);
  CHECK(max_eigenvalue(apply_adjoint(p, y).block(0)) <= 1e-10);
}

TEST_CASE("unbounded objective is reported as dual infeasible") {
  // minimize -X22 with only X11 = 1 fixed.
  ConeProgram p;
  p.blocks = {2};
  SymMatrix c(2);
  c.set(1, 1, -1.0);
  p.c = BlockDiagMatrix({c});
  SymMatrix e(2);
  e.set(0, 0, 1.0);
  p.constraints.push_back({BlockDiagMatrix({e}), 1.0});
  const auto s = solve(p);
  CHECK(s.status == SolveStatus::DualInfeasible);
}

TEST_CASE("consistent dependent rows are dropped with a warning") {
  ConeProgram p;
  p.blocks = {2};
  p.c = BlockDiagMatrix({SymMatrix::identity(2)});
  SymMatrix e(2);
  e.set(0, 0, 1.0);
  p.constraints.push_back({BlockDiagMatrix({e}), 1.0});
  p.constraints.push_back({BlockDiagMatrix({2.0 * e}), 2.0});
  const auto s = solve(p);
  REQUIRE(s.status == SolveStatus::Optimal);
  CHECK(s.dropped_constraints.size() == 1);
  CHECK_FALSE(s.warnings.empty());
  CHECK(s.primal_objective == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("KKT residuals respond to perturbations") {
  std::mt19937_64 rng(23);
  const auto ps = testing::planted_sdp(5, 4, rng);
  auto s = solve(ps.program);
  REQUIRE(s.status == SolveStatus::Optimal);
  const auto base = check_kkt(ps.program, s);
  CHECK(base.dual_residual <= 1e-8);
  // Dual residual grows like ||sum dy_k A_k|| for y + 1e-3 e_0.
  s.y[0] += 1e-3;
  const auto k = check_kkt(ps.program, s);
  const double expect = 1e-3 * frobenius_norm(ps.program.constraints[0].a) / (1.0 + frobenius_norm(ps.program.c));
  CHECK(k.dual_residual == doctest::Approx(expect).epsilon(1e-3));
  ConeSolution bad = s;
  bad.x = BlockDiagMatrix({testing::random_sym(5, rng)});
  CHECK(check_kkt(ps.program, bad).primal_residual > 0.0);
}

TEST_CASE("planted instances solve to optimality") {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 2 + t % 9, m = 1 + (t * 7) % 12;
    const auto ps = testing::planted_sdp(n, std::min(m, n * (n + 1) / 2), rng);
    const auto s = solve(ps.program);
    REQUIRE(s.status == SolveStatus::Optimal);
    const auto k = check_kkt(ps.program, s);
    CHECK(k.relative_gap <= 1e-7);
    CHECK(k.primal_residual <= 1e-6);
    CHECK(k.dual_residual <= 1e-6);
    CHECK(s.primal_objective == doctest::Approx(ps.optimal_value).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("iteration callback and validation") {
  std::mt19937_64 rng(5);
  const auto ps = testing::planted_sdp(4, 3, rng);
  int calls = 0;
  SolverOptions o;
  o.on_iteration = [&](const IterationInfo& info) {
    // Iteration 0 reports the starting point.
    CHECK(info.iteration == calls);
    ++calls;
  };
  const auto s = solve(ps.program, o);
  CHECK(calls == s.iterations + 1);

  ConeProgram bad = ps.program;
  bad.constraints[0].a = BlockDiagMatrix({SymMatrix::identity(3)});
  CHECK_THROWS_AS(solve(bad), InvalidInput);
}

TEST_CASE("results do not depend on the kernel table beyond rounding") {
  std::mt19937_64 rng(77);
  const auto ps = testing::planted_sdp(8, 6, rng);
  kernels::select(kernels::Isa::Scalar);
  const auto a = solve(ps.program);
  kernels::select_auto();
  const auto b = solve(ps.program);
  CHECK(a.primal_objective == doctest::Approx(b.primal_objective).epsilon(1e-8));
}

TEST_CASE("centring step recovers an instance whose steps collapse") {
  // Draw 163 of this stream stalled at gap 0.75 before the centring fallback.
  std::mt19937_64 rng(2002);
  std::uniform_int_distribution<std::size_t> nd(2, 20);
  for (int t = 0; t <= 163; ++t) {
    const std::size_t n = nd(rng);
    std::uniform_int_distribution<std::size_t> md(1, std::min<std::size_t>(20, n * (n + 1) / 2));
    const std::size_t m = md(rng);
    const auto ps = testing::planted_sdp(n, m, rng);
    if (t < 163) continue;
    const auto s = solve(ps.program);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.primal_objective == doctest::Approx(ps.optimal_value).epsilon(1e-7));
  }
}
