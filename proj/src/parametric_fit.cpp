#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "lmmsdp/calibration.hpp"
#include "lmmsdp/errors.hpp"
#include "lmmsdp/linalg.hpp"

namespace lmmsdp {

namespace {

struct FitData {
  std::size_t n = 0;
  // Each Omega_k as sum_r lambda_r u_r u_r^T over its nonzero eigenpairs, so
  // Tr(Omega_k B B^T) costs O(rank * n).
  std::vector<std::vector<std::pair<double, std::vector<double>>>> omega;
  std::vector<double> target;
  std::vector<double> b0, b1;  // columns of B, scratch
  int evaluations = 0;
};

void fill_factors(const FitData& d, const double* p, std::vector<double>& b0, std::vector<double>& b1) {
  for (std::size_t i = 0; i < d.n; ++i) {
    b0[i] = p[i] * std::cos(p[d.n + i]);
    b1[i] = p[i] * std::sin(p[d.n + i]);
  }
}

double misfit(const gsl_vector* x, void* params) {
  auto* d = static_cast<FitData*>(params);
  ++d->evaluations;
  fill_factors(*d, x->data, d->b0, d->b1);
  double f = 0.0;
  for (std::size_t k = 0; k < d->omega.size(); ++k) {
    double v = 0.0;
    for (const auto& [lambda, u] : d->omega[k]) {
      double s0 = 0.0, s1 = 0.0;
      for (std::size_t i = 0; i < d->n; ++i) {
        s0 += u[i] * d->b0[i];
        s1 += u[i] * d->b1[i];
      }
      v += lambda * (s0 * s0 + s1 * s1);
    }
    const double r = v - d->target[k];
    f += r * r;
  }
  return f;
}

double run_simplex(FitData& d, std::vector<double>& p, double v_step, int max_evals, double exact) {
  const std::size_t dim = p.size();
  gsl_vector* x = gsl_vector_alloc(dim);
  gsl_vector* step = gsl_vector_alloc(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    gsl_vector_set(x, i, p[i]);
    gsl_vector_set(step, i, i < d.n ? v_step : 0.3);
  }
  gsl_multimin_function fn{&misfit, dim, &d};
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim);
  gsl_multimin_fminimizer_set(s, &fn, x, step);
  const int start = d.evaluations;
  while (d.evaluations - start < max_evals) {
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    if (s->fval <= exact) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-12) == GSL_SUCCESS) break;
  }
  const double f = s->fval;
  for (std::size_t i = 0; i < dim; ++i) p[i] = gsl_vector_get(s->x, i);
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(step);
  gsl_vector_free(x);
  return f;
}

}  // namespace

ParametricFit calibrate_parametric_twofactor(const CalibrationSpec& spec, const ParametricOptions& opts) {
  if (spec.blocks.size() != 1) throw InvalidInput("parametric fit needs a stationary single-block variable");
  if (opts.restarts < 1 || opts.max_evaluations < 1) throw InvalidInput("parametric fit needs a positive budget");
  gsl_set_error_handler_off();

  FitData d;
  d.n = spec.blocks[0];
  d.b0.resize(d.n);
  d.b1.resize(d.n);
  double sum_target = 0.0, sum_trace = 0.0, sum_sq = 0.0;
  for (const auto& r : spec.rows) {
    const auto e = eigh(r.omega.block(0));
    const double scale = std::max(std::abs(e.values.front()), std::abs(e.values.back()));
    std::vector<std::pair<double, std::vector<double>>> terms;
    for (std::size_t j = 0; j < d.n; ++j) {
      if (std::abs(e.values[j]) <= 1e-14 * scale) continue;
      std::vector<double> u(d.n);
      for (std::size_t i = 0; i < d.n; ++i) u[i] = e.vectors(i, j);
      terms.emplace_back(e.values[j], std::move(u));
    }
    d.omega.push_back(std::move(terms));
    d.target.push_back(r.target);
    sum_target += r.target;
    sum_sq += r.target * r.target;
    sum_trace += trace(r.omega.block(0));
  }
  // Misfit at which the targets are matched to ~1e-6 relative; further
  // simplex iterations or restarts cannot improve the fit meaningfully.
  const double exact = 1e-12 * sum_sq;
  const double v0 = (sum_trace > 0.0 && sum_target > 0.0) ? std::sqrt(sum_target / sum_trace) : 0.1;

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> angle(0.0, M_PI);
  std::uniform_real_distribution<double> jitter(0.8, 1.2);

  std::vector<double> best;
  double best_f = std::numeric_limits<double>::infinity();
  for (int r = 0; r < opts.restarts && best_f > exact; ++r) {
    std::vector<double> p(2 * d.n);
    if (r == 0 && opts.initial) {
      if (opts.initial->size() != p.size()) throw InvalidInput("parametric warm start has the wrong length");
      p = *opts.initial;
    } else {
      for (std::size_t i = 0; i < d.n; ++i) {
        p[i] = v0 * jitter(rng);
        p[d.n + i] = angle(rng);
      }
    }
    const double f = run_simplex(d, p, 0.2 * v0, opts.max_evaluations, exact);
    // A second start landing on the same misfit means the remaining starts
    // are unlikely to find a better basin.
    const bool repeat = std::abs(f - best_f) <= 1e-6 * best_f;
    if (f < best_f) {
      best_f = f;
      best = p;
    }
    if (repeat) break;
  }

  ParametricFit fit;
  fit.vols.assign(best.begin(), best.begin() + static_cast<std::ptrdiff_t>(d.n));
  fit.angles.assign(best.begin() + static_cast<std::ptrdiff_t>(d.n), best.end());
  fill_factors(d, best.data(), d.b0, d.b1);
  SymMatrix x(d.n);
  for (std::size_t i = 0; i < d.n; ++i)
    for (std::size_t j = 0; j <= i; ++j) x.set(i, j, d.b0[i] * d.b0[j] + d.b1[i] * d.b1[j]);
  fit.residual = best_f;
  fit.result.status = SolveStatus::Optimal;
  fit.result.x = BlockDiagMatrix({std::move(x)});
  fit.result.objective = best_f;
  fit.result.fit_residual = best_f;
  fit.result.has_duals = false;
  return fit;
}

}  // namespace lmmsdp
