#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lmmsdp/calibration.hpp"
#include "lmmsdp/io.hpp"
#include "lmmsdp/linalg.hpp"

namespace testing {

inline std::string source_path(const std::string& rel) { return std::string(LMMSDP_SOURCE_DIR) + "/" + rel; }

struct Sydney {
  lmmsdp::MarketData md;
  lmmsdp::DiscountCurve curve;
  std::vector<lmmsdp::SwaptionInstrument> instruments;
  lmmsdp::CalibrationSpec spec;
};

inline Sydney sydney(lmmsdp::VariableForm form = lmmsdp::VariableForm::Stationary) {
  Sydney s;
  s.md = lmmsdp::parse_market_data(source_path("data/sydney.json"));
  s.curve = lmmsdp::build_curve(s.md);
  s.instruments = lmmsdp::instruments(s.md);
  s.spec = lmmsdp::make_spec(s.instruments, s.md.calendar.horizon, s.md.calendar.period, form);
  return s;
}

// Row on a single dense block.
inline lmmsdp::CalibrationRow row(const lmmsdp::SymMatrix& omega, double target,
                                  std::optional<double> lower = std::nullopt,
                                  std::optional<double> upper = std::nullopt) {
  lmmsdp::CalibrationRow r;
  r.omega = lmmsdp::BlockDiagMatrix({omega});
  r.target = target;
  r.lower = lower;
  r.upper = upper;
  return r;
}

inline lmmsdp::SymMatrix unit(std::size_t n, std::size_t i) {
  lmmsdp::SymMatrix e(n);
  e.set(i, i, 1.0);
  return e;
}

// Largest relative misfit |Tr(Omega_k X) - target_k| / max(|target_k|, 1e-300),
// recomputed from the rows.
inline double max_relative_misfit(const lmmsdp::CalibrationSpec& spec, const lmmsdp::BlockDiagMatrix& x) {
  double worst = 0.0;
  for (const auto& r : spec.rows) {
    const double v = lmmsdp::dot(r.omega, x);
    worst = std::max(worst, std::abs(v - r.target) / std::max(std::abs(r.target), 1e-300));
  }
  return worst;
}

inline double min_eig(const lmmsdp::BlockDiagMatrix& x) {
  double m = INFINITY;
  for (const auto& b : x.blocks()) m = std::min(m, lmmsdp::min_eigenvalue(b));
  return m;
}

}  // namespace testing
