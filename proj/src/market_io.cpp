#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "lmmsdp/errors.hpp"
#include "lmmsdp/io.hpp"

namespace lmmsdp {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_number(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (!s.empty() && *b == '+') ++b;
  const auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e || s.empty()) throw ParseError("expected a number, got '" + s + "'", where);
  return v;
}

// 1-based line and column of a byte offset.
std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

double json_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ParseError("expected a number", where);
  return j.get<double>();
}

const json& json_field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object()) throw ParseError("expected an object", where);
  const auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("missing field '") + key + "'", where);
  return *it;
}

std::optional<double> json_optional(const json& j, const char* key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return json_number(*it, where + "." + key);
}

json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), source + ": " + line_col(text, e.byte ? e.byte - 1 : 0));
  }
}

std::size_t grid_index(double years, double period, const std::string& what) {
  const double k = years / period;
  const double r = std::round(k);
  if (!(years > 0.0) || std::abs(k - r) > 1e-9 * std::max(1.0, r))
    throw ValidationError(what + " " + format_double(years) + "Y is not on the " + format_double(period) +
                          "Y calendar grid");
  return static_cast<std::size_t>(r);
}

std::string year_label(double y) { return fmt::format("{}Y", y); }

}  // namespace

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

MarketData parse_market_json(const std::string& text, const std::string& source) {
  const json root = parse_json_text(text, source);
  MarketData md;
  const auto& cal = json_field(root, "calendar", source);
  md.calendar.period = json_number(json_field(cal, "period", source + ": calendar"), source + ": calendar.period");
  const double horizon = json_number(json_field(cal, "horizon", source + ": calendar"), source + ": calendar.horizon");
  if (horizon < 1 || horizon != std::floor(horizon))
    throw ParseError("horizon must be a positive integer", source + ": calendar.horizon");
  md.calendar.horizon = static_cast<std::size_t>(horizon);

  const auto& curve = json_field(root, "curve", source);
  if (curve.contains("flat_rate")) md.curve.flat_rate = json_number(curve["flat_rate"], source + ": curve.flat_rate");
  if (curve.contains("points")) {
    const auto& pts = curve["points"];
    if (!pts.is_array()) throw ParseError("expected an array", source + ": curve.points");
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const std::string where = source + ": curve.points[" + std::to_string(i) + "]";
      if (!pts[i].is_array() || pts[i].size() != 2) throw ParseError("expected [tenor, discount]", where);
      md.curve.points.emplace_back(json_number(pts[i][0], where), json_number(pts[i][1], where));
    }
  }

  if (root.contains("caplet_vols")) {
    const auto& arr = root["caplet_vols"];
    if (!arr.is_array()) throw ParseError("expected an array", source + ": caplet_vols");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string where = source + ": caplet_vols[" + std::to_string(i) + "]";
      CapletRecord c;
      c.expiry = json_number(json_field(arr[i], "expiry", where), where + ".expiry");
      c.vol = json_number(json_field(arr[i], "vol", where), where + ".vol");
      c.bid = json_optional(arr[i], "bid", where);
      c.ask = json_optional(arr[i], "ask", where);
      md.caplets.push_back(c);
    }
  }
  if (root.contains("swaptions")) {
    const auto& arr = root["swaptions"];
    if (!arr.is_array()) throw ParseError("expected an array", source + ": swaptions");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string where = source + ": swaptions[" + std::to_string(i) + "]";
      SwaptionRecord s;
      s.expiry = json_number(json_field(arr[i], "expiry", where), where + ".expiry");
      s.tenor = json_number(json_field(arr[i], "tenor", where), where + ".tenor");
      s.vol = json_number(json_field(arr[i], "vol", where), where + ".vol");
      s.bid = json_optional(arr[i], "bid", where);
      s.ask = json_optional(arr[i], "ask", where);
      md.swaptions.push_back(s);
    }
  }
  validate(md);
  return md;
}

MarketData parse_market_csv(const std::string& text, const std::string& source) {
  MarketData md;
  bool have_calendar = false;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto f = split_csv(t);
    const std::string loc = source + ": line " + std::to_string(lineno);
    auto field = [&](std::size_t i, const char* name) {
      if (i >= f.size() || f[i].empty()) throw ParseError(std::string("missing field '") + name + "'", loc);
      return parse_number(f[i], loc + ", field '" + name + "'");
    };
    auto optional_field = [&](std::size_t i, const char* name) -> std::optional<double> {
      if (i >= f.size() || f[i].empty()) return std::nullopt;
      return parse_number(f[i], loc + ", field '" + name + "'");
    };
    const std::string& kind = f[0];
    std::size_t max_fields = 0;
    if (kind == "record") {
      continue;  // header
    } else if (kind == "calendar") {
      md.calendar.period = field(1, "period");
      const double h = field(2, "horizon");
      if (h < 1 || h != std::floor(h)) throw ParseError("horizon must be a positive integer", loc);
      md.calendar.horizon = static_cast<std::size_t>(h);
      have_calendar = true;
      max_fields = 3;
    } else if (kind == "flat_rate") {
      md.curve.flat_rate = field(1, "rate");
      max_fields = 2;
    } else if (kind == "discount") {
      md.curve.points.emplace_back(field(1, "tenor"), field(2, "discount"));
      max_fields = 3;
    } else if (kind == "caplet") {
      md.caplets.push_back({field(1, "expiry"), field(2, "vol"), optional_field(3, "bid"), optional_field(4, "ask")});
      max_fields = 5;
    } else if (kind == "swaption") {
      md.swaptions.push_back({field(1, "expiry"), field(2, "tenor"), field(3, "vol"), optional_field(4, "bid"),
                              optional_field(5, "ask")});
      max_fields = 6;
    } else {
      throw ParseError("unknown record type '" + kind + "'", loc);
    }
    if (f.size() > max_fields) throw ParseError("too many fields", loc);
  }
  if (!have_calendar) throw ParseError("missing calendar record", source);
  validate(md);
  return md;
}

MarketData parse_market_data(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  const auto ext = path.extension().string();
  if (ext == ".csv") return parse_market_csv(text, path.string());
  if (ext == ".json") return parse_market_json(text, path.string());
  throw ParseError("unknown market-data format '" + ext + "' (expected .json or .csv)", path.string());
}

void validate(const MarketData& md) {
  if (!(md.calendar.period > 0.0) || md.calendar.horizon < 1)
    throw ValidationError("calendar needs a positive period and horizon");
  const double period = md.calendar.period;
  const std::size_t h = md.calendar.horizon;
  if (md.curve.flat_rate.has_value() == !md.curve.points.empty())
    throw ValidationError("curve needs exactly one of flat_rate or points");

  auto check_quote = [](double vol, std::optional<double> bid, std::optional<double> ask, const std::string& what) {
    if (!(vol > 0.0)) throw ValidationError(what + ": vol must be positive");
    if (bid && !(*bid >= 0.0)) throw ValidationError(what + ": bid must be nonnegative");
    if (bid.has_value() != ask.has_value()) throw ValidationError(what + ": bid and ask come together");
    if (bid && !(*bid <= vol && vol <= *ask)) throw ValidationError(what + ": vol outside [bid, ask]");
  };

  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& c : md.caplets) {
    const std::string what = "caplet " + year_label(c.expiry);
    const std::size_t s = grid_index(c.expiry, period, what + " expiry");
    if (s > h) throw ValidationError(what + " lies past the horizon");
    check_quote(c.vol, c.bid, c.ask, what);
    if (!seen.insert({s, s}).second) throw ValidationError("duplicate instrument: " + what);
  }
  for (const auto& w : md.swaptions) {
    const std::string what = year_label(w.expiry) + " into " + year_label(w.tenor);
    const std::size_t s = grid_index(w.expiry, period, what + " expiry");
    const std::size_t len = grid_index(w.tenor, period, what + " tenor");
    if (s + len - 1 > h) throw ValidationError(what + " ends past the horizon");
    check_quote(w.vol, w.bid, w.ask, what);
    if (!seen.insert({s, s + len - 1}).second) throw ValidationError("duplicate instrument: " + what);
  }
}

std::string serialize_market_json(const MarketData& md) {
  json root;
  root["calendar"] = {{"period", md.calendar.period}, {"horizon", md.calendar.horizon}};
  json curve = json::object();
  if (md.curve.flat_rate) curve["flat_rate"] = *md.curve.flat_rate;
  if (!md.curve.points.empty()) {
    curve["points"] = json::array();
    for (const auto& [t, b] : md.curve.points) curve["points"].push_back({t, b});
  }
  root["curve"] = curve;
  root["caplet_vols"] = json::array();
  for (const auto& c : md.caplets) {
    json e = {{"expiry", c.expiry}, {"vol", c.vol}};
    if (c.bid) e["bid"] = *c.bid;
    if (c.ask) e["ask"] = *c.ask;
    root["caplet_vols"].push_back(e);
  }
  root["swaptions"] = json::array();
  for (const auto& s : md.swaptions) {
    json e = {{"expiry", s.expiry}, {"tenor", s.tenor}, {"vol", s.vol}};
    if (s.bid) e["bid"] = *s.bid;
    if (s.ask) e["ask"] = *s.ask;
    root["swaptions"].push_back(e);
  }
  return root.dump(2) + "\n";
}

std::string serialize_market_csv(const MarketData& md) {
  auto opt = [](std::optional<double> v) { return v ? format_double(*v) : std::string(); };
  std::string out = "record,a,b,c,d,e\n";
  out += fmt::format("calendar,{},{}\n", format_double(md.calendar.period), md.calendar.horizon);
  if (md.curve.flat_rate) out += "flat_rate," + format_double(*md.curve.flat_rate) + "\n";
  for (const auto& [t, b] : md.curve.points) out += "discount," + format_double(t) + "," + format_double(b) + "\n";
  for (const auto& c : md.caplets)
    out += fmt::format("caplet,{},{},{},{}\n", format_double(c.expiry), format_double(c.vol), opt(c.bid), opt(c.ask));
  for (const auto& s : md.swaptions)
    out += fmt::format("swaption,{},{},{},{},{}\n", format_double(s.expiry), format_double(s.tenor),
                       format_double(s.vol), opt(s.bid), opt(s.ask));
  return out;
}

DiscountCurve build_curve(const MarketData& md) {
  if (md.curve.flat_rate) return DiscountCurve::flat(*md.curve.flat_rate, md.calendar.period, md.calendar.horizon);
  return DiscountCurve::from_points(md.curve.points, md.calendar.period, md.calendar.horizon);
}

std::vector<SwaptionInstrument> instruments(const MarketData& md) {
  validate(md);
  const DiscountCurve curve = build_curve(md);
  const double period = md.calendar.period;
  auto pct = [](std::optional<double> v) -> std::optional<double> {
    if (v) return *v / 100.0;
    return std::nullopt;
  };
  std::vector<SwaptionInstrument> out;
  for (const auto& c : md.caplets) {
    SwaptionQuote q;
    q.expiry = q.end = grid_index(c.expiry, period, "caplet expiry");
    q.vol = c.vol / 100.0;
    q.bid = pct(c.bid);
    q.ask = pct(c.ask);
    q.label = "caplet " + year_label(c.expiry);
    out.push_back(make_instrument(curve, q));
  }
  for (const auto& s : md.swaptions) {
    SwaptionQuote q;
    q.expiry = grid_index(s.expiry, period, "swaption expiry");
    q.end = q.expiry + grid_index(s.tenor, period, "swaption tenor") - 1;
    q.vol = s.vol / 100.0;
    q.bid = pct(s.bid);
    q.ask = pct(s.ask);
    q.label = year_label(s.expiry) + " into " + year_label(s.tenor);
    out.push_back(make_instrument(curve, q));
  }
  return out;
}

std::pair<std::size_t, std::size_t> parse_target(const std::string& s, const Calendar& cal) {
  const auto x = s.find_first_of("xX");
  if (x == std::string::npos) throw ParseError("expected EXPIRYxTENOR, e.g. 5x2", "--target '" + s + "'");
  const double e = parse_number(trim(std::string_view(s).substr(0, x)), "--target expiry");
  const double t = parse_number(trim(std::string_view(s).substr(x + 1)), "--target tenor");
  const std::size_t S = grid_index(e, cal.period, "target expiry");
  const std::size_t len = grid_index(t, cal.period, "target tenor");
  if (S + len - 1 > cal.horizon) throw ValidationError("target ends past the horizon");
  return {S, S + len - 1};
}

std::string matrix_to_csv(const Matrix& m) {
  std::string out;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

std::string matrix_to_csv(const SymMatrix& m) { return matrix_to_csv(m.matrix()); }

Matrix parse_matrix_csv(const std::string& text, const std::string& source) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto f = split_csv(t);
    std::vector<double> r;
    for (std::size_t j = 0; j < f.size(); ++j)
      r.push_back(parse_number(f[j], source + ": line " + std::to_string(lineno) + ", column " + std::to_string(j + 1)));
    if (!rows.empty() && r.size() != rows.front().size())
      throw ParseError("ragged matrix row", source + ": line " + std::to_string(lineno));
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ParseError("empty matrix", source);
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

SymMatrix parse_symmetric_csv(const std::string& text, const std::string& source) {
  const Matrix m = parse_matrix_csv(text, source);
  if (m.rows() != m.cols()) throw ValidationError(source + ": matrix is not square");
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (std::abs(m(i, j) - m(j, i)) > 1e-12 * std::max({1.0, std::abs(m(i, j)), std::abs(m(j, i))}))
        throw ValidationError(source + ": matrix is not symmetric");
  return SymMatrix::symmetrized(m);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file", path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << text;
  if (!out) throw InvalidInput("write failed for " + path.string());
}

std::vector<PerturbationScenario> parse_scenarios(const std::string& text, const std::string& source) {
  const json root = parse_json_text(text, source);
  if (!root.is_array()) throw ParseError("expected a list of scenarios", source);
  std::vector<PerturbationScenario> out;
  for (std::size_t i = 0; i < root.size(); ++i) {
    const std::string where = source + ": [" + std::to_string(i) + "]";
    PerturbationScenario s;
    const auto& name = json_field(root[i], "name", where);
    if (!name.is_string()) throw ParseError("expected a string", where + ".name");
    s.name = name.get<std::string>();
    const auto& u = json_field(root[i], "u", where);
    if (!u.is_array()) throw ParseError("expected an array", where + ".u");
    for (std::size_t k = 0; k < u.size(); ++k) s.u.push_back(json_number(u[k], where + ".u[" + std::to_string(k) + "]"));
    out.push_back(std::move(s));
  }
  return out;
}

json to_json(const SolverOptions& o) {
  return {{"tol_gap", o.tol_gap}, {"tol_feas", o.tol_feas}, {"max_iter", o.max_iter}, {"step_fraction", o.step_fraction}};
}

json to_json(const CalibrationResult& r) {
  json j;
  j["status"] = std::string(to_string(r.status));
  j["objective"] = r.objective;
  j["gap"] = r.gap;
  j["primal_residual"] = r.primal_residual;
  j["dual_residual"] = r.dual_residual;
  j["iterations"] = r.iterations;
  if (r.has_duals) j["sensitivity"] = r.sensitivity;
  if (r.solution) j["y"] = r.solution->y;
  if (r.margin) j["margin"] = *r.margin;
  if (!r.margins.empty()) j["margins"] = r.margins;
  if (r.confidence) j["confidence"] = *r.confidence;
  if (r.fit_residual) j["fit_residual"] = *r.fit_residual;
  if (r.compiled) j["row_labels"] = r.compiled->row_labels;
  j["warnings"] = r.warnings;
  return j;
}

json to_json(const HedgeReport& r) {
  json j;
  j["direction"] = r.direction == BoundDirection::Upper ? "upper" : "lower";
  j["bound_cumvar"] = r.bound_cumvar;
  j["bound_vol"] = r.bound_vol;
  j["bound_price"] = r.bound_price;
  j["y"] = r.y;
  j["instrument_cumvar"] = r.instrument_cumvar;
  j["lambda"] = r.lambda;
  j["primal_objective"] = r.primal_objective;
  j["dual_objective"] = r.dual_objective;
  j["residual_gap"] = r.residual_gap;
  return j;
}

json to_json(const GammaHedgeResult& r) {
  return {{"status", std::string(to_string(r.status))}, {"t", r.t}, {"y", r.y}, {"gap", r.gap}};
}

json to_json(const SensitivityReport& r) {
  json j;
  j["name"] = r.name;
  j["predicted_objective_change"] = r.predicted_objective_change;
  j["feasible_step"] = r.feasible_step;
  j["positivity_ratio"] = std::isfinite(r.positivity_ratio) ? json(r.positivity_ratio) : json("inf");
  j["min_whitened_eigenvalue"] = r.min_whitened_eigenvalue;
  j["exact_feasible"] = r.exact_feasible;
  j["min_eigenvalue_after"] = r.min_eigenvalue_after;
  j["constraint_error"] = r.constraint_error;
  return j;
}

json to_json(const PnLReport& r) {
  json j;
  j["paths"] = r.paths;
  j["rebalances"] = r.rebalances;
  j["seed"] = r.seed;
  j["true_premium"] = r.true_premium;
  j["max_financing_error"] = r.max_financing_error;
  j["methods"] = json::array();
  for (const auto& m : r.methods) {
    j["methods"].push_back({{"method", std::string(to_string(m.method))},
                            {"mean", m.mean},
                            {"stdev", m.stdev},
                            {"fraction_positive", m.fraction_positive},
                            {"mean_change", m.mean_change},
                            {"mean_premium", m.mean_premium},
                            {"fallback_calibrations", m.fallback_calibrations},
                            {"failed_calibrations", m.failed_calibrations},
                            {"flagged_paths", m.flagged_paths}});
  }
  return j;
}

std::string sensitivity_csv(const std::vector<SensitivityReport>& reports) {
  std::string out = "scenario,predicted_objective_change,positivity_ratio,feasible_step,min_whitened_eigenvalue,"
                    "exact_feasible,min_eigenvalue_after,constraint_error\n";
  for (const auto& r : reports)
    out += fmt::format("{},{},{},{},{},{},{},{}\n", r.name, format_double(r.predicted_objective_change),
                       format_double(r.positivity_ratio), r.feasible_step ? 1 : 0,
                       format_double(r.min_whitened_eigenvalue), r.exact_feasible ? 1 : 0,
                       format_double(r.min_eigenvalue_after), format_double(r.constraint_error));
  return out;
}

std::string bounds_csv(const std::vector<BoundsCell>& cells) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  std::string out = "expiry,tenor,lower_vol,upper_vol,market_vol,calibrated,error\n";
  for (const auto& c : cells) {
    std::string err = c.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out += fmt::format("{},{},{},{},{},{},{}\n", c.expiry, c.tenor, opt(c.lower_vol), opt(c.upper_vol),
                       opt(c.market_vol), c.calibrated ? 1 : 0, err);
  }
  return out;
}

std::string pnl_paths_csv(const PnLReport& r) {
  std::string out = "path";
  for (const auto& m : r.methods) out += fmt::format(",{}", to_string(m.method));
  out += '\n';
  for (std::size_t p = 0; p < r.paths; ++p) {
    out += std::to_string(p);
    for (const auto& m : r.methods) out += "," + format_double(m.ratios[p]);
    out += '\n';
  }
  return out;
}

std::string pnl_histogram_csv(const PnLReport& r, std::size_t bins) {
  if (bins < 1) throw InvalidInput("histogram needs at least one bin");
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& m : r.methods)
    for (double v : m.ratios) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  std::string out = "bin_lo,bin_hi";
  for (const auto& m : r.methods) out += fmt::format(",{}", to_string(m.method));
  out += '\n';
  if (!(hi >= lo)) return out;
  if (hi == lo) hi = lo + 1.0;
  const double w = (hi - lo) / static_cast<double>(bins);
  std::vector<std::vector<std::size_t>> counts(r.methods.size(), std::vector<std::size_t>(bins, 0));
  for (std::size_t mi = 0; mi < r.methods.size(); ++mi)
    for (double v : r.methods[mi].ratios) {
      auto b = static_cast<std::size_t>((v - lo) / w);
      counts[mi][std::min(b, bins - 1)]++;
    }
  for (std::size_t b = 0; b < bins; ++b) {
    out += format_double(lo + w * static_cast<double>(b)) + "," + format_double(lo + w * static_cast<double>(b + 1));
    for (const auto& c : counts) out += "," + std::to_string(c[b]);
    out += '\n';
  }
  return out;
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source) {
  const json root = parse_json_text(text, source);
  ExperimentConfig cfg;
  auto vec = [&](const json& j, const std::string& where) {
    if (!j.is_array()) throw ParseError("expected an array", where);
    std::vector<double> v;
    for (std::size_t i = 0; i < j.size(); ++i) v.push_back(json_number(j[i], where + "[" + std::to_string(i) + "]"));
    return v;
  };
  const auto& market = json_field(root, "market", source);
  cfg.market.x0 = vec(json_field(market, "x0", source + ": market"), source + ": market.x0");
  const auto& cov = json_field(market, "cov", source + ": market");
  if (!cov.is_array() || cov.size() != cfg.market.x0.size())
    throw ParseError("cov must be an n x n array", source + ": market.cov");
  Matrix c(cov.size(), cov.size());
  for (std::size_t i = 0; i < cov.size(); ++i) {
    const auto row = vec(cov[i], source + ": market.cov[" + std::to_string(i) + "]");
    if (row.size() != cov.size()) throw ParseError("cov must be an n x n array", source + ": market.cov");
    for (std::size_t j = 0; j < row.size(); ++j) c(i, j) = row[j];
  }
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (c(i, j) != c(j, i)) throw ValidationError(source + ": market.cov is not symmetric");
  cfg.market.cov = SymMatrix::symmetrized(c);
  if (market.contains("seed")) {
    if (!market["seed"].is_number_unsigned()) throw ParseError("seed must be a nonnegative integer", source + ": market.seed");
    cfg.market.seed = market["seed"].get<std::uint64_t>();
  }

  auto& e = cfg.experiment;
  e.target_weights = vec(json_field(root, "target_weights", source), source + ": target_weights");
  const auto& cw = json_field(root, "calibration_weights", source);
  if (!cw.is_array()) throw ParseError("expected an array", source + ": calibration_weights");
  for (std::size_t k = 0; k < cw.size(); ++k)
    e.calibration_weights.push_back(vec(cw[k], source + ": calibration_weights[" + std::to_string(k) + "]"));
  auto count = [&](const char* key, auto& dst) {
    if (!root.contains(key)) return;
    if (!root[key].is_number_unsigned()) throw ParseError("expected a nonnegative integer", source + ": " + key);
    dst = root[key].get<std::remove_reference_t<decltype(dst)>>();
  };
  if (root.contains("maturity")) e.maturity = json_number(root["maturity"], source + ": maturity");
  if (root.contains("noise_amplitude"))
    e.noise_amplitude = json_number(root["noise_amplitude"], source + ": noise_amplitude");
  if (root.contains("noise_per_path")) {
    if (!root["noise_per_path"].is_boolean()) throw ParseError("expected true or false", source + ": noise_per_path");
    e.noise_per_path = root["noise_per_path"].get<bool>();
  }
  count("rebalances", e.rebalances);
  count("paths", e.paths);
  count("threads", e.threads);
  count("parametric_restarts", e.parametric_restarts);
  count("parametric_evaluations", e.parametric_evaluations);
  if (root.contains("methods")) {
    const auto& m = root["methods"];
    if (!m.is_array()) throw ParseError("expected an array", source + ": methods");
    e.methods.clear();
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!m[i].is_string()) throw ParseError("expected a method name", source + ": methods[" + std::to_string(i) + "]");
      try {
        e.methods.push_back(parse_method(m[i].get<std::string>()));
      } catch (const InvalidInput& ex) {
        throw ParseError(ex.what(), source + ": methods[" + std::to_string(i) + "]");
      }
    }
  }
  cfg.market.validate();
  e.validate(cfg.market.x0.size());
  return cfg;
}

}  // namespace lmmsdp
