#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lmmsdp/cone_program.hpp"
#include "lmmsdp/market.hpp"
#include "lmmsdp/matrix.hpp"

namespace lmmsdp {

enum class VariableForm { Stationary, NonStationary };
enum class CalibrationMode { Equality, BidAsk };

enum class ObjectiveKind {
  MinTrace,         // minimize Tr(C X), C = I when absent
  MinSpectralNorm,  // minimize lambda_max(X)
  MaxLinfMargin,    // maximize a common margin t inside the spreads
  MaxL1Margin,      // maximize the sum of per-instrument margins
  MaxConfidence,    // minimize || V^{-1/2} v ||_inf over target misfits v
  MaximizeTarget,   // maximize Tr(Omega_0 X)
  MinimizeTarget,   // minimize Tr(Omega_0 X)
};

struct Objective {
  ObjectiveKind kind = ObjectiveKind::MinTrace;
  // C for MinTrace, Omega_0 for the target objectives; must conform to the
  // variable blocks.
  std::optional<BlockDiagMatrix> matrix;
  // Quote-variance covariance for MaxConfidence (m x m, PD).
  std::optional<SymMatrix> covariance;
};

// One calibration instrument reduced to what the programs see: a linear
// functional Tr(Omega X) and a target with an optional spread.
struct CalibrationRow {
  BlockDiagMatrix omega;
  double target = 0.0;
  std::optional<double> lower;
  std::optional<double> upper;
  std::string label;
};

struct CalibrationSpec {
  std::vector<std::size_t> blocks;  // variable block dimensions
  std::vector<CalibrationRow> rows;
  Objective objective;
  CalibrationMode mode = CalibrationMode::Equality;
  SolverOptions solver;
};

// Builds rows from market instruments on the sliding (stationary) or
// per-period (non-stationary) variable.
CalibrationSpec make_spec(const std::vector<SwaptionInstrument>& instruments, std::size_t horizon,
                          double period, VariableForm form);
CalibrationRow make_row(const SwaptionInstrument& inst, std::size_t horizon, double period,
                        VariableForm form);

// The cone program for a spec together with the bookkeeping that maps
// program rows and blocks back to instruments.
struct CompiledCalibration {
  ConeProgram program;
  std::size_t num_x_blocks = 0;
  // rhs_rows[k]: (program row, weight) pairs; moving the target of
  // instrument k by u moves the right-hand side of each row by weight * u.
  std::vector<std::vector<std::pair<std::size_t, double>>> rhs_rows;
  // Index of the scalar margin / confidence block, if any.
  std::optional<std::size_t> t_block;
  // Per-instrument margin blocks for the l1 program (absent entries are
  // zero-spread instruments).
  std::vector<std::optional<std::size_t>> tk_blocks;
  std::vector<std::string> row_labels;
};

CompiledCalibration compile(const CalibrationSpec& spec);

struct CalibrationResult {
  SolveStatus status = SolveStatus::NumericalFailure;
  BlockDiagMatrix x;
  BlockDiagMatrix z;
  // Derivative of the optimal objective with respect to each instrument
  // target (program sense). Empty for the parametric fit.
  std::vector<double> sensitivity;
  double objective = 0.0;
  double gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  std::optional<double> margin;
  std::vector<double> margins;
  std::optional<double> confidence;
  std::optional<double> fit_residual;
  bool has_duals = false;
  // Full program and solution, kept for sensitivity analysis.
  std::optional<CompiledCalibration> compiled;
  std::optional<ConeSolution> solution;
  std::vector<std::string> warnings;
};

// Throws InfeasibleCalibration (certificate over program rows), Unbounded,
// or SolverError when the solve does not reach Optimal.
CalibrationResult calibrate(const CalibrationSpec& spec);
CalibrationResult calibrate_robust_linf(CalibrationSpec spec);
CalibrationResult calibrate_robust_l1(CalibrationSpec spec);
CalibrationResult calibrate_confidence(CalibrationSpec spec, const SymMatrix& v);
CalibrationResult calibrate_minnorm(CalibrationSpec spec);

// C_ij = exp(-decay |i - j|): a smooth correlation prior used as the
// objective of maximize Tr(C X), whose optimum is low-rank but nondegenerate.
SymMatrix exponential_prior(std::size_t n, double decay);

// The confidence level as the two-sided normal tail mass beyond t.
double confidence_level(double t);

struct ParametricOptions {
  int restarts = 5;
  int max_evaluations = 2000;
  std::uint64_t seed = 12345;
  // Warm start (v_1..v_M, theta_1..theta_M); replaces the first restart.
  std::optional<std::vector<double>> initial;
};

struct ParametricFit {
  CalibrationResult result;
  std::vector<double> vols;
  std::vector<double> angles;
  double residual = 0.0;  // sum of squared target misfits
};

// Rank-two fit X = B B^T, rows of B = v_i (cos theta_i, sin theta_i), by
// Nelder-Mead on the squared target misfit. Stationary single-block specs only.
ParametricFit calibrate_parametric_twofactor(const CalibrationSpec& spec,
                                             const ParametricOptions& opts = {});

}  // namespace lmmsdp
