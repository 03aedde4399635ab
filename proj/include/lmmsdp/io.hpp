#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lmmsdp/calibration.hpp"
#include "lmmsdp/hedging.hpp"
#include "lmmsdp/market.hpp"
#include "lmmsdp/matrix.hpp"
#include "lmmsdp/sensitivity.hpp"
#include "lmmsdp/simulation.hpp"

namespace lmmsdp {

using json = nlohmann::ordered_json;

// Market-data records as they appear in the file. Vols are percentages
// (14.3 means 14.3%); expiries and tenors are in years.
struct CurveRecord {
  std::optional<double> flat_rate;
  std::vector<std::pair<double, double>> points;  // (tenor, discount)
  bool operator==(const CurveRecord&) const = default;
};

struct CapletRecord {
  double expiry = 0.0;
  double vol = 0.0;
  std::optional<double> bid;
  std::optional<double> ask;
  bool operator==(const CapletRecord&) const = default;
};

struct SwaptionRecord {
  double expiry = 0.0;
  double tenor = 0.0;
  double vol = 0.0;
  std::optional<double> bid;
  std::optional<double> ask;
  bool operator==(const SwaptionRecord&) const = default;
};

struct MarketData {
  Calendar calendar;
  CurveRecord curve;
  std::vector<CapletRecord> caplets;
  std::vector<SwaptionRecord> swaptions;

  bool operator==(const MarketData& o) const {
    return calendar.period == o.calendar.period && calendar.horizon == o.calendar.horizon &&
           curve == o.curve && caplets == o.caplets && swaptions == o.swaptions;
  }
};

// Format chosen by extension (.json or .csv). ParseError carries a line and
// field location; ValidationError flags off-grid tenors, duplicates and
// instruments past the horizon.
MarketData parse_market_data(const std::filesystem::path& path);
MarketData parse_market_json(const std::string& text, const std::string& source = "<json>");
MarketData parse_market_csv(const std::string& text, const std::string& source = "<csv>");
void validate(const MarketData& md);

std::string serialize_market_json(const MarketData& md);
std::string serialize_market_csv(const MarketData& md);

DiscountCurve build_curve(const MarketData& md);
// Caplets first (by file order), then swaptions. Labels are "caplet 3Y" and
// "5Y into 2Y".
std::vector<SwaptionInstrument> instruments(const MarketData& md);
// Grid indices (S, N) for "EXPIRYxTENOR" in years, e.g. "5x2".
std::pair<std::size_t, std::size_t> parse_target(const std::string& s, const Calendar& cal);

// Matrices as CSV, one row per line, 17 significant digits (lossless).
std::string matrix_to_csv(const Matrix& m);
std::string matrix_to_csv(const SymMatrix& m);
Matrix parse_matrix_csv(const std::string& text, const std::string& source = "<csv>");
SymMatrix parse_symmetric_csv(const std::string& text, const std::string& source = "<csv>");

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string sha256_hex(const std::string& bytes);

// JSON list of {"name": ..., "u": [...]}.
std::vector<PerturbationScenario> parse_scenarios(const std::string& text, const std::string& source = "<json>");

// 17-significant-digit rendering shared by all CSV writers.
std::string format_double(double v);

json to_json(const CalibrationResult& r);
json to_json(const HedgeReport& r);
json to_json(const GammaHedgeResult& r);
json to_json(const SensitivityReport& r);
json to_json(const PnLReport& r);
json to_json(const SolverOptions& o);

std::string sensitivity_csv(const std::vector<SensitivityReport>& reports);
std::string bounds_csv(const std::vector<BoundsCell>& cells);
std::string pnl_paths_csv(const PnLReport& r);
std::string pnl_histogram_csv(const PnLReport& r, std::size_t bins = 50);

// Experiment config: {"market": {"x0", "cov", "seed"}, "target_weights",
// "calibration_weights", "maturity", "rebalances", "noise_amplitude",
// "paths", "methods", "threads"}.
struct ExperimentConfig {
  LognormalMarket market;
  HedgingExperiment experiment;
};
ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source = "<json>");

// Everything needed to replay a CLI run bit-for-bit.
struct RunManifest {
  std::string command;
  std::vector<std::string> args;  // argv after the program name
  std::vector<std::pair<std::string, std::string>> inputs;  // (path, sha256)
  SolverOptions solver;
  std::optional<std::uint64_t> seed;
  std::string version;
  std::string kernels;
  // (file name, sha256) of each output written
  std::vector<std::pair<std::string, std::string>> outputs;
};

std::string tool_version();
json to_json(const RunManifest& m);
RunManifest parse_manifest(const std::string& text, const std::string& source = "<manifest>");

}  // namespace lmmsdp
