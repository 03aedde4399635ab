// lmmsdp command-line front end. Every command writes its outputs and a
// manifest.json into --out-dir; `replay` re-runs a manifest and compares the
// output digests.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "lmmsdp/calibration.hpp"
#include "lmmsdp/errors.hpp"
#include "lmmsdp/hedging.hpp"
#include "lmmsdp/io.hpp"
#include "lmmsdp/kernels.hpp"
#include "lmmsdp/sensitivity.hpp"
#include "lmmsdp/simulation.hpp"

namespace fs = std::filesystem;
using namespace lmmsdp;

int run_main(int argc, char** argv);

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;

struct Common {
  std::string out_dir = "out";
  std::string format = "json";
  double tol_gap = SolverOptions{}.tol_gap;
  double tol_feas = SolverOptions{}.tol_feas;
  std::string kernels = "auto";
  std::optional<std::uint64_t> seed;
  bool verbose = false;

  SolverOptions solver() const {
    SolverOptions o;
    o.tol_gap = tol_gap;
    o.tol_feas = tol_feas;
    o.verbose = verbose;
    return o;
  }
};

// Collected outputs of one command; written together with the manifest.
struct Run {
  std::string command;
  std::vector<std::string> inputs;
  std::map<std::string, std::string> files;
  int exit_code = kExitOk;

  const std::string& input(const std::string& path) {
    inputs.push_back(path);
    return path;
  }
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--out-dir", c.out_dir, "Output directory")->capture_default_str();
  sub->add_option("--format", c.format, "Tabular output format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  sub->add_option("--tol-gap", c.tol_gap, "Relative duality-gap tolerance")->capture_default_str();
  sub->add_option("--tol-feas", c.tol_feas, "Feasibility tolerance")->capture_default_str();
  sub->add_option("--kernels", c.kernels, "Dense kernels")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}))
      ->capture_default_str();
  sub->add_option("--seed", c.seed, "Master random seed");
  sub->add_flag("--verbose", c.verbose, "Per-iteration solver trace on stderr");
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string certificate_json(const InfeasibleCalibration& e, const std::vector<std::string>& labels) {
  json j;
  j["status"] = "infeasible";
  j["message"] = e.what();
  j["certificate"] = e.certificate();
  if (labels.size() == e.certificate().size()) j["rows"] = labels;
  return dump(j);
}

// Program row labels for a spec, used to annotate certificates.
std::vector<std::string> row_labels(const CalibrationSpec& spec) {
  try {
    return compile(spec).row_labels;
  } catch (const Error&) {
    return {};
  }
}

struct CalibrateArgs {
  std::string data;
  std::string objective = "min-trace";
  std::string mode = "equality";
  std::string form = "stationary";
  std::string quote_cov;
  std::string cost;
  double prior_decay = 0.1;
};

CalibrationSpec load_spec(Run& run, const std::string& data, const std::string& form, std::vector<SwaptionInstrument>* out_inst = nullptr,
                          MarketData* out_md = nullptr) {
  const MarketData md = parse_market_data(run.input(data));
  const auto inst = instruments(md);
  const VariableForm vf = form == "nonstationary" ? VariableForm::NonStationary : VariableForm::Stationary;
  CalibrationSpec spec = make_spec(inst, md.calendar.horizon, md.calendar.period, vf);
  if (out_inst) *out_inst = inst;
  if (out_md) *out_md = md;
  return spec;
}

CalibrationResult run_calibration(Run& run, const CalibrateArgs& a, CalibrationSpec spec) {
  spec.mode = a.mode == "bid-ask" ? CalibrationMode::BidAsk : CalibrationMode::Equality;
  const std::size_t n = spec.blocks.front();
  if (a.objective == "min-trace") {
    spec.objective.kind = ObjectiveKind::MinTrace;
    if (!a.cost.empty()) {
      spec.objective.matrix = BlockDiagMatrix({parse_symmetric_csv(read_text_file(run.input(a.cost)), a.cost)});
    }
  } else if (a.objective == "min-norm") {
    spec.objective.kind = ObjectiveKind::MinSpectralNorm;
  } else if (a.objective == "linf") {
    spec.objective.kind = ObjectiveKind::MaxLinfMargin;
    spec.mode = CalibrationMode::BidAsk;
  } else if (a.objective == "l1") {
    spec.objective.kind = ObjectiveKind::MaxL1Margin;
    spec.mode = CalibrationMode::BidAsk;
  } else if (a.objective == "confidence") {
    if (a.quote_cov.empty()) throw InvalidInput("--objective confidence needs --quote-cov");
    spec.objective.kind = ObjectiveKind::MaxConfidence;
    spec.objective.covariance = parse_symmetric_csv(read_text_file(run.input(a.quote_cov)), a.quote_cov);
  } else {  // max-prior
    if (spec.blocks.size() != 1) throw InvalidInput("max-prior needs the stationary variable");
    spec.objective.kind = ObjectiveKind::MaximizeTarget;
    spec.objective.matrix = BlockDiagMatrix({exponential_prior(n, a.prior_decay)});
  }
  return calibrate(spec);
}

void add_x_outputs(Run& run, const BlockDiagMatrix& x) {
  if (x.num_blocks() == 1) {
    run.files["x.csv"] = matrix_to_csv(x.block(0));
    return;
  }
  for (std::size_t b = 0; b < x.num_blocks(); ++b) run.files[fmt::format("x_block{:02}.csv", b)] = matrix_to_csv(x.block(b));
}

void cmd_calibrate(Run& run, const Common& c, const CalibrateArgs& a) {
  CalibrationSpec spec = load_spec(run, a.data, a.form);
  spec.solver = c.solver();
  try {
    const CalibrationResult r = run_calibration(run, a, spec);
    add_x_outputs(run, r.x);
    run.files["duals.json"] = dump(to_json(r));
    if (c.format == "csv") {
      std::string s = "instrument,target,sensitivity\n";
      for (std::size_t k = 0; k < spec.rows.size(); ++k)
        s += fmt::format("{},{},{}\n", spec.rows[k].label, format_double(spec.rows[k].target),
                         format_double(r.sensitivity[k]));
      run.files["duals.csv"] = s;
    }
    fmt::print(stderr, "calibrate: {} objective {} after {} iterations\n", to_string(r.status),
               format_double(r.objective), r.iterations);
  } catch (const InfeasibleCalibration& e) {
    run.files["certificate.json"] = certificate_json(e, row_labels(spec));
    run.exit_code = kExitInfeasible;
    fmt::print(stderr, "calibrate: {}\n", e.what());
  }
}

struct BoundsArgs {
  std::string data;
  std::string target;
  bool sweep = false;
  std::string form = "stationary";
};

struct TargetBounds {
  HedgeReport upper, lower;
  std::vector<std::string> warnings;
};

TargetBounds bound_target(const MarketData& md, const std::vector<SwaptionInstrument>& inst,
                          const CalibrationSpec& spec, const std::string& target, VariableForm vf) {
  const auto [s, n] = parse_target(target, md.calendar);
  SwaptionQuote q;
  q.expiry = s;
  q.end = n;
  q.vol = 1.0;
  q.label = target;
  const DiscountCurve curve = build_curve(md);
  const SwaptionInstrument ti = make_instrument(curve, q);
  const CalibrationRow row = make_row(ti, md.calendar.horizon, md.calendar.period, vf);
  const BlackTerms terms = black_terms(ti);
  std::vector<BlackTerms> calib;
  for (const auto& i : inst) calib.push_back(black_terms(i));
  TargetBounds tb;
  tb.upper = price_bounds(row, terms, spec, BoundDirection::Upper);
  tb.lower = price_bounds(row, terms, spec, BoundDirection::Lower);
  for (auto* rep : {&tb.upper, &tb.lower}) {
    try {
      rep->lambda = static_hedge_portfolio(*rep, terms, calib);
    } catch (const DegenerateVega& e) {
      tb.warnings.push_back(e.what());
    }
  }
  return tb;
}

void cmd_bounds(Run& run, const Common& c, const BoundsArgs& a, bool with_hedge) {
  MarketData md;
  std::vector<SwaptionInstrument> inst;
  CalibrationSpec spec = load_spec(run, a.data, a.form, &inst, &md);
  spec.solver = c.solver();
  try {
    if (a.sweep) {
      const auto cells =
          run_bounds_sweep(build_curve(md), inst, md.calendar.horizon, md.calendar.period, spec.solver);
      run.files["bounds.csv"] = bounds_csv(cells);
      std::size_t failed = 0;
      for (const auto& cell : cells) failed += cell.error.empty() ? 0 : 1;
      fmt::print(stderr, "bounds: {} cells, {} failed\n", cells.size(), failed);
      return;
    }
    const VariableForm vf = a.form == "nonstationary" ? VariableForm::NonStationary : VariableForm::Stationary;
    const TargetBounds tb = bound_target(md, inst, spec, a.target, vf);
    json j;
    j["target"] = a.target;
    j["upper"] = to_json(tb.upper);
    j["lower"] = to_json(tb.lower);
    std::vector<std::string> labels;
    for (const auto& i : inst) labels.push_back(i.quote.label);
    j["instruments"] = labels;
    j["warnings"] = tb.warnings;
    run.files[with_hedge ? "hedge.json" : "bounds.json"] = dump(j);
    if (with_hedge || c.format == "csv") {
      std::string s = "instrument,y_upper,lambda_upper,y_lower,lambda_lower\n";
      auto at = [](const std::vector<double>& v, std::size_t k) { return k < v.size() ? format_double(v[k]) : ""; };
      for (std::size_t k = 0; k < inst.size(); ++k)
        s += fmt::format("{},{},{},{},{}\n", labels[k], at(tb.upper.y, k), at(tb.upper.lambda, k), at(tb.lower.y, k),
                         at(tb.lower.lambda, k));
      run.files[with_hedge ? "hedge.csv" : "bounds.csv"] = s;
    }
    fmt::print(stderr, "{}: vol in [{}, {}]\n", a.target, format_double(tb.lower.bound_vol),
               format_double(tb.upper.bound_vol));
  } catch (const InfeasibleCalibration& e) {
    run.files["certificate.json"] = certificate_json(e, row_labels(spec));
    run.exit_code = kExitInfeasible;
    fmt::print(stderr, "bounds: {}\n", e.what());
  }
}

struct SensitivityArgs {
  CalibrateArgs calib;
  std::string scenarios;
  bool dump_dx = false;
};

void cmd_sensitivity(Run& run, const Common& c, const SensitivityArgs& a) {
  CalibrationSpec spec = load_spec(run, a.calib.data, a.calib.form);
  spec.solver = c.solver();
  const auto scenarios = parse_scenarios(read_text_file(run.input(a.scenarios)), a.scenarios);
  try {
    const CalibrationResult r = run_calibration(run, a.calib, spec);
    const auto reports = scenario_sweep(r, scenarios);
    json j;
    j["calibration"] = to_json(r);
    j["scenarios"] = json::array();
    for (const auto& rep : reports) j["scenarios"].push_back(to_json(rep));
    run.files["sensitivity.json"] = dump(j);
    run.files["sensitivity.csv"] = sensitivity_csv(reports);
    if (a.dump_dx)
      for (const auto& rep : reports)
        for (std::size_t b = 0; b < rep.delta_x.num_blocks(); ++b)
          run.files[fmt::format("dx_{}_{:02}.csv", rep.name, b)] = matrix_to_csv(rep.delta_x.block(b));
  } catch (const InfeasibleCalibration& e) {
    run.files["certificate.json"] = certificate_json(e, row_labels(spec));
    run.exit_code = kExitInfeasible;
    fmt::print(stderr, "sensitivity: {}\n", e.what());
  }
}

struct GammaArgs {
  std::string gamma;
  std::string sigma;
  std::string gammas;
};

void cmd_gamma(Run& run, const Common& c, const GammaArgs& a) {
  GammaHedgeSpec spec;
  spec.gamma_matrix = parse_symmetric_csv(read_text_file(run.input(a.gamma)), a.gamma);
  spec.sigma = parse_symmetric_csv(read_text_file(run.input(a.sigma)), a.sigma);
  const Matrix g = parse_matrix_csv(read_text_file(run.input(a.gammas)), a.gammas);
  spec.gammas.assign(g.data(), g.data() + g.size());
  const GammaHedgeResult r = gamma_hedge(spec, c.solver());
  json j = to_json(r);
  j["exposure_unhedged"] = gamma_exposure(spec, std::vector<double>(spec.gammas.size(), 0.0));
  j["exposure_hedged"] = gamma_exposure(spec, r.y);
  run.files["gamma_hedge.json"] = dump(j);
  fmt::print(stderr, "gamma-hedge: t = {}\n", format_double(r.t));
}

struct SimulateArgs {
  std::string config;
  std::optional<std::size_t> paths;
  std::optional<std::size_t> rebalances;
  std::optional<unsigned> threads;
  std::size_t bins = 50;
};

void cmd_simulate(Run& run, const Common& c, const SimulateArgs& a) {
  ExperimentConfig cfg = parse_experiment_config(read_text_file(run.input(a.config)), a.config);
  if (c.seed) cfg.market.seed = *c.seed;
  if (a.paths) cfg.experiment.paths = *a.paths;
  if (a.rebalances) cfg.experiment.rebalances = *a.rebalances;
  if (a.threads) cfg.experiment.threads = *a.threads;
  cfg.experiment.solver = c.solver();
  const PnLReport r = run_hedging_experiment(cfg.experiment, cfg.market);
  run.files["pnl.json"] = dump(to_json(r));
  run.files["pnl_paths.csv"] = pnl_paths_csv(r);
  run.files["pnl_histogram.csv"] = pnl_histogram_csv(r, a.bins);
  for (const auto& m : r.methods)
    fmt::print(stderr, "{:>15}: mean {:+.4f} sd {:.4f} positive {:.1f}% change {:.3e}\n", to_string(m.method), m.mean,
               m.stdev, 100.0 * m.fraction_positive, m.mean_change);
}

// argv without --out-dir and --kernels; both are supplied explicitly on replay.
std::vector<std::string> replayable_args(int argc, char** argv) {
  std::vector<std::string> out;
  for (int i = 1; i < argc; ++i) {
    const std::string s = argv[i];
    if (s == "--out-dir" || s == "--kernels") {
      ++i;
      continue;
    }
    if (s.rfind("--out-dir=", 0) == 0 || s.rfind("--kernels=", 0) == 0) continue;
    out.push_back(s);
  }
  return out;
}

void write_run(const Run& run, const Common& c, const std::vector<std::string>& args) {
  const fs::path dir = c.out_dir;
  fs::create_directories(dir);
  RunManifest m;
  m.command = run.command;
  m.args = args;
  for (const auto& p : run.inputs) m.inputs.emplace_back(p, sha256_hex(read_text_file(p)));
  m.solver = c.solver();
  m.seed = c.seed;
  m.version = tool_version();
  m.kernels = std::string(kernels::name(kernels::active_isa()));
  for (const auto& [name, text] : run.files) {
    write_text_file(dir / name, text);
    m.outputs.emplace_back(name, sha256_hex(text));
  }
  write_text_file(dir / "manifest.json", dump(to_json(m)));
}

int replay(const std::string& manifest_path, const std::string& out_dir, const std::string& self) {
  const RunManifest m = parse_manifest(read_text_file(manifest_path), manifest_path);
  if (m.version != tool_version())
    fmt::print(stderr, "replay: manifest written by version {}, running {}\n", m.version, tool_version());
  for (const auto& [path, digest] : m.inputs)
    if (sha256_hex(read_text_file(path)) != digest) throw ValidationError("input " + path + " changed since the run");
  std::vector<std::string> argv_s{self};
  argv_s.insert(argv_s.end(), m.args.begin(), m.args.end());
  argv_s.insert(argv_s.end(), {"--out-dir", out_dir, "--kernels", m.kernels});
  std::vector<char*> argv;
  for (auto& s : argv_s) argv.push_back(s.data());
  const int code = run_main(static_cast<int>(argv.size()), argv.data());
  const RunManifest again = parse_manifest(read_text_file(fs::path(out_dir) / "manifest.json"), out_dir);
  bool same = again.outputs == m.outputs;
  for (const auto& [name, digest] : m.outputs) {
    const auto it = std::find_if(again.outputs.begin(), again.outputs.end(),
                                 [&](const auto& o) { return o.first == name; });
    const bool ok = it != again.outputs.end() && it->second == digest;
    fmt::print(stderr, "replay: {} {}\n", name, ok ? "identical" : "DIFFERS");
  }
  if (!same) {
    fmt::print(stderr, "replay: outputs differ from the manifest\n");
    return kExitError;
  }
  fmt::print(stderr, "replay: all {} outputs reproduced bit-for-bit\n", m.outputs.size());
  return code;
}

}  // namespace

int run_main(int argc, char** argv) {
  CLI::App app{"Semidefinite calibration, price bounds and hedging for the Libor market model"};
  app.require_subcommand(1);
  Common common;

  CalibrateArgs cal;
  auto add_calib_opts = [&](CLI::App* s, CalibrateArgs& a) {
    s->add_option("--data", a.data, "Market data file (.json or .csv)")->required()->check(CLI::ExistingFile);
    s->add_option("--objective", a.objective, "Calibration objective")
        ->check(CLI::IsMember({"min-trace", "min-norm", "linf", "l1", "confidence", "max-prior"}))
        ->capture_default_str();
    s->add_option("--mode", a.mode, "Quote handling")->check(CLI::IsMember({"equality", "bid-ask"}))->capture_default_str();
    s->add_option("--form", a.form, "Covariance variable")
        ->check(CLI::IsMember({"stationary", "nonstationary"}))
        ->capture_default_str();
    s->add_option("--quote-cov", a.quote_cov, "Quote covariance CSV for --objective confidence")
        ->check(CLI::ExistingFile);
    s->add_option("--cost", a.cost, "Cost matrix CSV for --objective min-trace")->check(CLI::ExistingFile);
    s->add_option("--prior-decay", a.prior_decay, "Decay of the max-prior correlation prior")->capture_default_str();
  };
  auto* calibrate_cmd = app.add_subcommand("calibrate", "Calibrate the forward covariance to market quotes");
  add_calib_opts(calibrate_cmd, cal);
  add_common(calibrate_cmd, common);

  BoundsArgs bnd;
  auto* bounds_cmd = app.add_subcommand("bounds", "Price bounds on a swaption over the calibrated set");
  bounds_cmd->add_option("--data", bnd.data, "Market data file")->required()->check(CLI::ExistingFile);
  auto* target_opt = bounds_cmd->add_option("--target", bnd.target, "Target swaption EXPIRYxTENOR in years");
  auto* sweep_flag = bounds_cmd->add_flag("--sweep", bnd.sweep, "Bound every expiry/tenor pair on the calendar");
  target_opt->excludes(sweep_flag);
  bounds_cmd->add_option("--form", bnd.form, "Covariance variable")
      ->check(CLI::IsMember({"stationary", "nonstationary"}))
      ->capture_default_str();
  add_common(bounds_cmd, common);

  BoundsArgs hdg;
  auto* hedge_cmd = app.add_subcommand("hedge", "Bounds plus the static hedge portfolio of the dual solution");
  hedge_cmd->add_option("--data", hdg.data, "Market data file")->required()->check(CLI::ExistingFile);
  hedge_cmd->add_option("--target", hdg.target, "Target swaption EXPIRYxTENOR in years")->required();
  add_common(hedge_cmd, common);

  SensitivityArgs sen;
  sen.calib.objective = "max-prior";
  auto* sens_cmd = app.add_subcommand("sensitivity", "Newton-step scenario analysis of a calibration");
  add_calib_opts(sens_cmd, sen.calib);
  sens_cmd->add_option("--scenarios", sen.scenarios, "Scenario list JSON")->required()->check(CLI::ExistingFile);
  sens_cmd->add_flag("--dump-dx", sen.dump_dx, "Write the covariance step of each scenario");
  add_common(sens_cmd, common);

  GammaArgs gam;
  auto* gamma_cmd = app.add_subcommand("gamma-hedge", "Minimize the worst-case gamma exposure with vanillas");
  gamma_cmd->add_option("--gamma", gam.gamma, "Portfolio gamma matrix CSV")->required()->check(CLI::ExistingFile);
  gamma_cmd->add_option("--sigma", gam.sigma, "Asset covariance CSV")->required()->check(CLI::ExistingFile);
  gamma_cmd->add_option("--gammas", gam.gammas, "Per-asset vanilla gammas CSV")->required()->check(CLI::ExistingFile);
  add_common(gamma_cmd, common);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Delta-hedging P&L experiment");
  sim_cmd->add_option("--config", sim.config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("--paths", sim.paths, "Override the path count");
  sim_cmd->add_option("--rebalances", sim.rebalances, "Override the rebalance count");
  sim_cmd->add_option("--threads", sim.threads, "Worker threads (results do not depend on it)");
  sim_cmd->add_option("--bins", sim.bins, "Histogram bins")->capture_default_str();
  add_common(sim_cmd, common);

  std::string manifest_path, replay_dir = "replay";
  auto* replay_cmd = app.add_subcommand("replay", "Re-run a manifest and compare outputs bit-for-bit");
  replay_cmd->add_option("--manifest", manifest_path, "manifest.json of an earlier run")
      ->required()
      ->check(CLI::ExistingFile);
  replay_cmd->add_option("--out-dir", replay_dir, "Directory for the replayed outputs")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (replay_cmd->parsed()) return replay(manifest_path, replay_dir, argv[0]);

    if (common.kernels == "auto")
      kernels::select_auto();
    else
      kernels::select(kernels::parse_isa(common.kernels));

    Run run;
    if (calibrate_cmd->parsed()) {
      run.command = "calibrate";
      cmd_calibrate(run, common, cal);
    } else if (bounds_cmd->parsed()) {
      run.command = "bounds";
      if (!bnd.sweep && bnd.target.empty()) throw InvalidInput("bounds needs --target or --sweep");
      cmd_bounds(run, common, bnd, false);
    } else if (hedge_cmd->parsed()) {
      run.command = "hedge";
      cmd_bounds(run, common, hdg, true);
    } else if (sens_cmd->parsed()) {
      run.command = "sensitivity";
      cmd_sensitivity(run, common, sen);
    } else if (gamma_cmd->parsed()) {
      run.command = "gamma-hedge";
      cmd_gamma(run, common, gam);
    } else if (sim_cmd->parsed()) {
      run.command = "simulate";
      cmd_simulate(run, common, sim);
    }
    write_run(run, common, replayable_args(argc, argv));
    return run.exit_code;
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitError;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitError;
  }
}

int main(int argc, char** argv) { return run_main(argc, argv); }
