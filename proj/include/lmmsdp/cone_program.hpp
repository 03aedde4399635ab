#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lmmsdp/matrix.hpp"

namespace lmmsdp {

enum class Sense { Minimize, Maximize };

enum class SolveStatus { Optimal, PrimalInfeasible, DualInfeasible, MaxIterations, NumericalFailure };

std::string_view to_string(SolveStatus s);

struct Constraint {
  BlockDiagMatrix a;
  double b = 0.0;
};

// Standard form: optimize Tr(C X) subject to Tr(A_k X) = b_k, X block-diagonal
// and PSD. A block of dimension 1 is a nonnegative scalar.
struct ConeProgram {
  std::vector<std::size_t> blocks;
  BlockDiagMatrix c;
  std::vector<Constraint> constraints;
  Sense sense = Sense::Minimize;

  std::size_t num_constraints() const noexcept { return constraints.size(); }
  // Throws InvalidInput when C or some A_k does not match `blocks`.
  void validate() const;
};

struct IterationInfo {
  int iteration = 0;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double gap = 0.0;
  double relative_gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double step_primal = 0.0;
  double step_dual = 0.0;
  double sigma = 0.0;
};

struct SolverOptions {
  double tol_gap = 1e-8;
  double tol_feas = 1e-8;
  int max_iter = 100;
  double step_fraction = 0.98;
  // Per-iteration trace lines on standard error.
  bool verbose = false;
  std::function<void(const IterationInfo&)> on_iteration;
};

// Dual convention: y belongs to the minimization form, Z = C_min - sum y_k A_k
// where C_min = C for minimize and -C for maximize.
struct ConeSolution {
  SolveStatus status = SolveStatus::NumericalFailure;
  BlockDiagMatrix x;
  std::vector<double> y;
  BlockDiagMatrix z;
  // Objective values in the program's own sense.
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  // PrimalInfeasible: y with sum y_k b_k > 0 and sum y_k A_k <= 0.
  std::optional<std::vector<double>> certificate;
  // DualInfeasible: X >= 0 with A(X) ~ 0 and an improving objective.
  std::optional<BlockDiagMatrix> primal_ray;
  std::vector<std::size_t> dropped_constraints;
  std::vector<std::string> warnings;
};

struct KktReport {
  double primal_residual = 0.0;  // ||A(X) - b|| / (1 + ||b||)
  double dual_residual = 0.0;    // ||C_min - A^T y - Z||_F / (1 + ||C||_F)
  double gap = 0.0;              // Tr(XZ)
  double relative_gap = 0.0;     // gap / (1 + |primal objective|)
  double min_eig_x = 0.0;
  double min_eig_z = 0.0;
};

ConeSolution solve(const ConeProgram& p, const SolverOptions& opts = {});
KktReport check_kkt(const ConeProgram& p, const ConeSolution& s);

// A(X): vector of Tr(A_k X).
std::vector<double> apply_constraints(const ConeProgram& p, const BlockDiagMatrix& x);
// A^T(y) = sum_k y_k A_k.
BlockDiagMatrix apply_adjoint(const ConeProgram& p, const std::vector<double>& y);
// C in minimization form.
BlockDiagMatrix min_form_objective(const ConeProgram& p);

}  // namespace lmmsdp
