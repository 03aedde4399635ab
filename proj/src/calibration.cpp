#include "lmmsdp/calibration.hpp"

#include <cmath>
#include <string>

#include <fmt/format.h>

#include "lmmsdp/errors.hpp"
#include "lmmsdp/linalg.hpp"

namespace lmmsdp {

CalibrationRow make_row(const SwaptionInstrument& inst, std::size_t horizon, double period,
                        VariableForm form) {
  CalibrationRow row;
  if (form == VariableForm::Stationary)
    row.omega = BlockDiagMatrix({build_omega_stationary(inst, horizon, period)});
  else
    row.omega = build_omega_nonstationary(inst, horizon, period);
  row.target = inst.target;
  row.lower = inst.target_bid;
  row.upper = inst.target_ask;
  row.label = inst.quote.label;
  return row;
}

CalibrationSpec make_spec(const std::vector<SwaptionInstrument>& instruments, std::size_t horizon,
                          double period, VariableForm form) {
  CalibrationSpec spec;
  spec.blocks = form == VariableForm::Stationary ? std::vector<std::size_t>{horizon}
                                                 : nonstationary_dims(horizon);
  for (const auto& inst : instruments) spec.rows.push_back(make_row(inst, horizon, period, form));
  return spec;
}

SymMatrix exponential_prior(std::size_t n, double decay) {
  SymMatrix c(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) c.set(i, j, std::exp(-decay * static_cast<double>(i - j)));
  return c;
}

double confidence_level(double t) { return std::erfc(t * M_SQRT1_2); }

namespace {

bool needs_spreads(ObjectiveKind k) {
  return k == ObjectiveKind::MaxLinfMargin || k == ObjectiveKind::MaxL1Margin;
}

bool zero_spread(const CalibrationRow& r) { return *r.lower == *r.upper; }

// Incremental builder: blocks are declared first, rows are then assembled
// from sparse (block, matrix) terms.
class ProgramBuilder {
 public:
  std::size_t add_block(std::size_t dim) {
    dims_.push_back(dim);
    return dims_.size() - 1;
  }
  std::size_t num_blocks() const { return dims_.size(); }

  struct Term {
    std::size_t block;
    SymMatrix a;
  };

  std::size_t add_row(std::vector<Term> terms, double b, std::string label) {
    rows_.push_back({std::move(terms), b});
    labels_.push_back(std::move(label));
    return rows_.size() - 1;
  }

  ConeProgram build(const std::vector<Term>& objective, Sense sense) const {
    ConeProgram p;
    p.blocks = dims_;
    p.sense = sense;
    p.c = assemble(objective);
    p.constraints.reserve(rows_.size());
    for (const auto& r : rows_) p.constraints.push_back({assemble(r.terms), r.b});
    return p;
  }
  std::vector<std::string> labels() const { return labels_; }

 private:
  BlockDiagMatrix assemble(const std::vector<Term>& terms) const {
    auto m = BlockDiagMatrix::zeros(dims_);
    for (const auto& t : terms) m.block(t.block) += t.a;
    return m;
  }
  struct Row {
    std::vector<Term> terms;
    double b;
  };
  std::vector<std::size_t> dims_;
  std::vector<Row> rows_;
  std::vector<std::string> labels_;
};

using Terms = std::vector<ProgramBuilder::Term>;

Terms x_terms(const BlockDiagMatrix& omega, double scale) {
  Terms t;
  for (std::size_t b = 0; b < omega.num_blocks(); ++b) {
    if (is_zero(omega.block(b))) continue;
    t.push_back({b, scale * omega.block(b)});
  }
  return t;
}

SymMatrix scalar(double v) { return SymMatrix(1, v); }

}  // namespace

CompiledCalibration compile(const CalibrationSpec& spec) {
  const auto kind = spec.objective.kind;
  const std::size_t m = spec.rows.size();
  const std::size_t nx = spec.blocks.size();
  if (nx == 0) throw InvalidInput("calibration variable has no blocks");
  for (std::size_t k = 0; k < m; ++k) {
    const auto& r = spec.rows[k];
    if (r.omega.dims() != spec.blocks)
      throw InvalidInput("row " + std::to_string(k) + " does not match the variable blocks");
    if (!std::isfinite(r.target)) throw InvalidInput("row " + std::to_string(k) + " has a non-finite target");
  }
  const bool spreads = spec.mode == CalibrationMode::BidAsk || needs_spreads(kind);
  if (spreads && kind != ObjectiveKind::MaxConfidence) {
    for (std::size_t k = 0; k < m; ++k) {
      const auto& r = spec.rows[k];
      if (!r.lower || !r.upper)
        throw InvalidInput("row " + std::to_string(k) + " (" + r.label + ") has no bid/ask targets");
      if (*r.lower > *r.upper)
        throw InvalidInput("row " + std::to_string(k) + " (" + r.label + ") has bid above ask");
    }
  }
  if (kind == ObjectiveKind::MaxConfidence && !spec.objective.covariance)
    throw InvalidInput("confidence calibration needs a quote covariance");
  if ((kind == ObjectiveKind::MaximizeTarget || kind == ObjectiveKind::MinimizeTarget) &&
      !spec.objective.matrix)
    throw InvalidInput("target objective needs Omega_0");

  CompiledCalibration out;
  out.num_x_blocks = nx;
  out.rhs_rows.resize(m);
  out.tk_blocks.resize(m);
  ProgramBuilder pb;
  for (std::size_t d : spec.blocks) pb.add_block(d);

  std::vector<std::size_t> w_blocks;
  std::optional<std::size_t> s_block;
  if (kind == ObjectiveKind::MinSpectralNorm) {
    for (std::size_t d : spec.blocks) w_blocks.push_back(pb.add_block(d));
    s_block = pb.add_block(1);
  }
  bool any_spread = false;
  if (spreads)
    for (const auto& r : spec.rows) any_spread |= !zero_spread(r);
  if (kind == ObjectiveKind::MaxLinfMargin && any_spread) out.t_block = pb.add_block(1);
  if (kind == ObjectiveKind::MaxConfidence) out.t_block = pb.add_block(1);

  if (kind == ObjectiveKind::MaxConfidence) {
    const SymMatrix& v = *spec.objective.covariance;
    if (v.dim() != m) throw InvalidInput("quote covariance dimension does not match the rows");
    SymMatrix r;
    try {
      r = inv_sqrt(v);
    } catch (const NotPositiveDefinite&) {
      throw InvalidInput("quote covariance is not positive definite");
    }
    for (std::size_t i = 0; i < m; ++i) {
      BlockDiagMatrix comb = BlockDiagMatrix::zeros(spec.blocks);
      double rhs = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        comb.add_scaled(r(i, k), spec.rows[k].omega);
        rhs += r(i, k) * spec.rows[k].target;
      }
      const std::size_t a = pb.add_block(1);
      const std::size_t b = pb.add_block(1);
      // (R v)_i <= t
      Terms minus = x_terms(comb, 1.0);
      minus.push_back({*out.t_block, scalar(-1.0)});
      minus.push_back({a, scalar(1.0)});
      const std::size_t r1 = pb.add_row(std::move(minus), rhs, fmt::format("conf_upper_{}", i));
      // (R v)_i >= -t
      Terms plus = x_terms(comb, 1.0);
      plus.push_back({*out.t_block, scalar(1.0)});
      plus.push_back({b, scalar(-1.0)});
      const std::size_t r2 = pb.add_row(std::move(plus), rhs, fmt::format("conf_lower_{}", i));
      for (std::size_t k = 0; k < m; ++k) {
        if (r(i, k) == 0.0) continue;
        out.rhs_rows[k].push_back({r1, r(i, k)});
        out.rhs_rows[k].push_back({r2, r(i, k)});
      }
    }
  } else {
    for (std::size_t k = 0; k < m; ++k) {
      const auto& row = spec.rows[k];
      const std::string name = row.label.empty() ? fmt::format("row_{}", k) : row.label;
      if (!spreads || zero_spread(row)) {
        const double b = spreads ? *row.lower : row.target;
        out.rhs_rows[k].push_back({pb.add_row(x_terms(row.omega, 1.0), b, name), 1.0});
        continue;
      }
      std::optional<std::size_t> margin = out.t_block;
      if (kind == ObjectiveKind::MaxL1Margin) {
        margin = pb.add_block(1);
        out.tk_blocks[k] = margin;
      }
      const std::size_t lo = pb.add_block(1);
      const std::size_t hi = pb.add_block(1);
      Terms lower = x_terms(row.omega, 1.0);
      lower.push_back({lo, scalar(-1.0)});
      if (margin) lower.push_back({*margin, scalar(-1.0)});
      Terms upper = x_terms(row.omega, 1.0);
      upper.push_back({hi, scalar(1.0)});
      if (margin) upper.push_back({*margin, scalar(1.0)});
      out.rhs_rows[k].push_back({pb.add_row(std::move(lower), *row.lower, name + ":bid"), 1.0});
      out.rhs_rows[k].push_back({pb.add_row(std::move(upper), *row.upper, name + ":ask"), 1.0});
    }
  }

  if (kind == ObjectiveKind::MinSpectralNorm) {
    // X + W = s I entrywise, so W = s I - X is PSD and s >= lambda_max(X).
    for (std::size_t b = 0; b < nx; ++b) {
      const std::size_t n = spec.blocks[b];
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = j; i < n; ++i) {
          SymMatrix e(n);
          e.set(i, j, i == j ? 1.0 : 0.5);
          Terms t{{b, e}, {w_blocks[b], e}};
          if (i == j) t.push_back({*s_block, scalar(-1.0)});
          pb.add_row(std::move(t), 0.0, fmt::format("link_{}_{}_{}", b, i, j));
        }
    }
  }

  Terms obj;
  Sense sense = Sense::Minimize;
  switch (kind) {
    case ObjectiveKind::MinTrace:
      if (spec.objective.matrix) {
        obj = x_terms(*spec.objective.matrix, 1.0);
      } else {
        for (std::size_t b = 0; b < nx; ++b) obj.push_back({b, SymMatrix::identity(spec.blocks[b])});
      }
      break;
    case ObjectiveKind::MaximizeTarget:
      obj = x_terms(*spec.objective.matrix, 1.0);
      sense = Sense::Maximize;
      break;
    case ObjectiveKind::MinimizeTarget:
      obj = x_terms(*spec.objective.matrix, 1.0);
      break;
    case ObjectiveKind::MinSpectralNorm:
      obj.push_back({*s_block, scalar(1.0)});
      break;
    case ObjectiveKind::MaxLinfMargin:
      if (out.t_block) obj.push_back({*out.t_block, scalar(1.0)});
      sense = Sense::Maximize;
      break;
    case ObjectiveKind::MaxL1Margin:
      for (const auto& tk : out.tk_blocks)
        if (tk) obj.push_back({*tk, scalar(1.0)});
      sense = Sense::Maximize;
      break;
    case ObjectiveKind::MaxConfidence:
      obj.push_back({*out.t_block, scalar(1.0)});
      break;
  }
  if (spec.objective.matrix && spec.objective.matrix->dims() != spec.blocks)
    throw InvalidInput("objective matrix does not match the variable blocks");
  out.program = pb.build(obj, sense);
  out.row_labels = pb.labels();
  return out;
}

CalibrationResult calibrate(const CalibrationSpec& spec) {
  CompiledCalibration cc = compile(spec);
  ConeSolution sol = solve(cc.program, spec.solver);
  switch (sol.status) {
    case SolveStatus::Optimal:
      break;
    case SolveStatus::PrimalInfeasible:
      throw InfeasibleCalibration("calibration quotes are inconsistent (infeasible program)",
                                  sol.certificate.value_or(std::vector<double>{}));
    case SolveStatus::DualInfeasible:
      throw Unbounded("calibration objective is unbounded over the feasible set");
    case SolveStatus::MaxIterations:
    case SolveStatus::NumericalFailure:
      throw SolverError(fmt::format("calibration solve ended with {} (gap {:.3e}, pres {:.3e}, dres {:.3e})",
                                    to_string(sol.status), sol.gap, sol.primal_residual,
                                    sol.dual_residual));
  }

  CalibrationResult res;
  res.status = sol.status;
  std::vector<SymMatrix> xs, zs;
  for (std::size_t b = 0; b < cc.num_x_blocks; ++b) {
    xs.push_back(sol.x.block(b));
    zs.push_back(sol.z.block(b));
  }
  res.x = BlockDiagMatrix(std::move(xs));
  res.z = BlockDiagMatrix(std::move(zs));
  const double sign = cc.program.sense == Sense::Maximize ? -1.0 : 1.0;
  res.sensitivity.assign(spec.rows.size(), 0.0);
  for (std::size_t k = 0; k < spec.rows.size(); ++k)
    for (const auto& [row, w] : cc.rhs_rows[k]) res.sensitivity[k] += sign * w * sol.y[row];
  res.objective = sol.primal_objective;
  res.gap = sol.gap;
  res.primal_residual = sol.primal_residual;
  res.dual_residual = sol.dual_residual;
  res.iterations = sol.iterations;
  res.has_duals = true;
  const auto kind = spec.objective.kind;
  if (kind == ObjectiveKind::MaxLinfMargin) {
    bool degenerate = !cc.t_block;
    for (const auto& r : spec.rows) degenerate |= zero_spread(r);
    // A zero-width spread pins the common margin at 0; the solve still
    // centres the remaining rows.
    res.margin = degenerate ? 0.0 : sol.x.block(*cc.t_block)(0, 0);
    if (degenerate && cc.t_block) res.warnings.push_back("zero-width spread forces margin 0");
  }
  if (kind == ObjectiveKind::MaxL1Margin) {
    res.margins.assign(spec.rows.size(), 0.0);
    for (std::size_t k = 0; k < spec.rows.size(); ++k)
      if (cc.tk_blocks[k]) res.margins[k] = sol.x.block(*cc.tk_blocks[k])(0, 0);
    double total = 0.0;
    for (double t : res.margins) total += t;
    res.margin = total;
  }
  if (kind == ObjectiveKind::MaxConfidence) {
    const double t = std::max(0.0, sol.x.block(*cc.t_block)(0, 0));
    res.margin = t;
    res.confidence = confidence_level(t);
  }
  res.warnings.insert(res.warnings.end(), sol.warnings.begin(), sol.warnings.end());
  res.compiled = std::move(cc);
  res.solution = std::move(sol);
  return res;
}

CalibrationResult calibrate_robust_linf(CalibrationSpec spec) {
  spec.objective = {ObjectiveKind::MaxLinfMargin, std::nullopt, std::nullopt};
  spec.mode = CalibrationMode::BidAsk;
  return calibrate(spec);
}

CalibrationResult calibrate_robust_l1(CalibrationSpec spec) {
  spec.objective = {ObjectiveKind::MaxL1Margin, std::nullopt, std::nullopt};
  spec.mode = CalibrationMode::BidAsk;
  return calibrate(spec);
}

CalibrationResult calibrate_confidence(CalibrationSpec spec, const SymMatrix& v) {
  spec.objective = {ObjectiveKind::MaxConfidence, std::nullopt, v};
  return calibrate(spec);
}

CalibrationResult calibrate_minnorm(CalibrationSpec spec) {
  spec.objective = {ObjectiveKind::MinSpectralNorm, std::nullopt, std::nullopt};
  return calibrate(spec);
}

}  // namespace lmmsdp
