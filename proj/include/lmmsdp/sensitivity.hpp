#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lmmsdp/calibration.hpp"
#include "lmmsdp/cone_program.hpp"
#include "lmmsdp/linalg.hpp"
#include "lmmsdp/matrix.hpp"

namespace lmmsdp {

// A shift u_k of each instrument's target variance.
struct PerturbationScenario {
  std::string name;
  std::vector<double> u;
};

struct PositivityCheck {
  // || X^{-1/2} dX X^{-1/2} ||_2 and the sufficient test ratio <= 1.
  double ratio = 0.0;
  bool feasible = false;
  // lambda_min of the whitened step; X + dX is PSD iff this is >= -1.
  double min_whitened_eigenvalue = 0.0;
  bool exact_feasible = false;
};

// Throws NotPositiveDefinite when some block of X is not PD.
PositivityCheck positivity_check(const BlockDiagMatrix& x, const BlockDiagMatrix& dx);

// d(optimal objective) / d(target_k) from the duals. Throws NotAvailable for
// results without duals.
std::vector<double> objective_sensitivity(const CalibrationResult& result);

// Linearized KKT map of the AHO direction at (X, Z):
//   dX = E^{-1} F A^T [(A E^{-1} F A^T)^{-1} db],  E = Z (*) I, F = X (*) I,
// materialized per block in svec coordinates. Built once, applied to any
// right-hand-side perturbation db over the program rows.
class NewtonOperator {
 public:
  NewtonOperator(const ConeProgram& p, const BlockDiagMatrix& x, const BlockDiagMatrix& z);

  // Throws InvalidInput when db has the wrong length.
  BlockDiagMatrix apply(std::span<const double> db) const;
  // Diagonal shift added to each E block, relative to ||Z_b||_2.
  static constexpr double kRegularization = 1e-12;
  double regularization() const noexcept { return reg_; }
  double schur_pivot_ratio() const noexcept { return schur_.pivot_ratio(); }
  std::size_t num_rows() const noexcept { return m_; }

 private:
  BlockDiagMatrix combine(std::span<const double> dy) const;

  const ConeProgram* p_ = nullptr;
  std::size_t m_ = 0;
  std::vector<std::size_t> dims_;
  // g_[k][b]: svec of E_b^{-1} F_b svec(A_k,b); empty when A_k,b = 0.
  std::vector<std::vector<std::vector<double>>> g_;
  LuFactor schur_;
  double reg_ = 0.0;
};

BlockDiagMatrix newton_update(const ConeProgram& p, const BlockDiagMatrix& x, const BlockDiagMatrix& z,
                              std::span<const double> db);

struct SensitivityReport {
  std::string name;
  std::vector<double> objective_gradient;
  double predicted_objective_change = 0.0;
  BlockDiagMatrix delta_x;  // calibration variable blocks only
  bool feasible_step = false;
  double positivity_ratio = 0.0;
  double min_whitened_eigenvalue = 0.0;
  bool exact_feasible = false;
  // lambda_min(X + dX) over the calibration blocks, computed directly.
  double min_eigenvalue_after = 0.0;
  // max_k |Tr(Omega_k dX) - u_k|
  double constraint_error = 0.0;
};

// Newton-step scenario analysis around an Optimal calibration result. The
// operator is factored once at construction.
class SensitivityModel {
 public:
  explicit SensitivityModel(const CalibrationResult& result);

  SensitivityReport evaluate(const PerturbationScenario& s) const;
  std::vector<SensitivityReport> sweep(const std::vector<PerturbationScenario>& scenarios) const;
  const NewtonOperator& op() const noexcept { return op_; }

 private:
  const CalibrationResult& result_;
  NewtonOperator op_;
  std::vector<double> gradient_;
};

std::vector<SensitivityReport> scenario_sweep(const CalibrationResult& result,
                                              const std::vector<PerturbationScenario>& scenarios);

}  // namespace lmmsdp
