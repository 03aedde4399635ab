#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include "fixtures.hpp"
#include "lmmsdp/errors.hpp"
#include "lmmsdp/io.hpp"
#include "support.hpp"

using namespace lmmsdp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lmmsdp_cli_io_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = std::string(LMMSDP_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

json load_json(const fs::path& p) { return json::parse(read_text_file(p)); }

const char* kCapletsOnly = R"({
  "calendar": {"period": 1.0, "horizon": 3},
  "curve": {"flat_rate": 0.04},
  "caplet_vols": [{"expiry": 1, "vol": 15}, {"expiry": 2, "vol": 14}, {"expiry": 3, "vol": 13.5, "bid": 13, "ask": 14}],
  "swaptions": []
})";

}  // namespace

TEST_CASE("bundled fixture parses to 28 instruments") {
  const auto md = parse_market_data(testing::source_path("data/sydney.json"));
  CHECK(md.caplets.size() == 20);
  CHECK(md.swaptions.size() == 8);
  CHECK(md.caplets.front().vol == 14.3);
  CHECK(md.caplets.back().vol == 12.0);
  const auto inst = instruments(md);
  REQUIRE(inst.size() == 28);
  CHECK(inst[2].quote.label == "caplet 3Y");
  CHECK(inst[20].quote.label == "2Y into 5Y");
  CHECK(inst[20].quote.expiry == 2);
  CHECK(inst[20].quote.end == 6);
  CHECK(inst[20].quote.vol == doctest::Approx(0.124));
}

TEST_CASE("caplet-only market data is valid") {
  const auto md = parse_market_json(kCapletsOnly);
  CHECK(md.swaptions.empty());
  const auto inst = instruments(md);
  REQUIRE(inst.size() == 3);
  CHECK(*inst[2].quote.bid == doctest::Approx(0.13));
}

TEST_CASE("validation errors") {
  CHECK_THROWS_AS(parse_market_data(testing::source_path("tests/data/duplicate.json")), ValidationError);
  auto md = parse_market_json(kCapletsOnly);
  auto bad = md;
  bad.caplets[0].expiry = 1.5;
  CHECK_THROWS_AS(validate(bad), ValidationError);
  bad = md;
  bad.swaptions.push_back({2, 2.5, 12, std::nullopt, std::nullopt});
  CHECK_THROWS_AS(validate(bad), ValidationError);
  bad = md;
  bad.swaptions.push_back({2, 3, 12, std::nullopt, std::nullopt});
  CHECK_THROWS_AS(validate(bad), ValidationError);  // ends past the horizon
  bad = md;
  bad.swaptions.push_back({2, 1, 12, std::nullopt, std::nullopt});
  CHECK_THROWS_AS(validate(bad), ValidationError);  // same (S, N) as caplet 2Y
  bad = md;
  bad.caplets[0].bid = 16;
  bad.caplets[0].ask = 17;
  CHECK_THROWS_AS(validate(bad), ValidationError);
  bad = md;
  bad.caplets[0].bid = 14;
  CHECK_THROWS_AS(validate(bad), ValidationError);
}

TEST_CASE("parse errors carry a location") {
  try {
    parse_market_json(R"({"calendar": {"period": 1, "horizon": 2}, "curve": {"flat_rate": 0.05},
      "caplet_vols": [{"expiry": 1, "vol": 10}, {"expiry": 2, "vol": "high"}]})",
                      "m.json");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.location() == "m.json: caplet_vols[1].vol");
  }
  try {
    parse_market_json("{\"calendar\": {\"period\": 1,\n \"horizon\": }", "m.json");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.location().find("line 2") != std::string::npos);
  }
  try {
    parse_market_csv("calendar,1,3\nflat_rate,0.05\ncaplet,1,abc\n", "m.csv");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.location() == "m.csv: line 3, field 'vol'");
  }
  CHECK_THROWS_AS(parse_market_csv("flat_rate,0.05\n"), ParseError);
  CHECK_THROWS_AS(parse_market_csv("calendar,1,3\nflat_rate,0.05\nbond,1,2\n"), ParseError);
  CHECK_THROWS_AS(parse_market_data("market.txt"), ParseError);
}

TEST_CASE("market data round-trips through JSON and CSV") {
  const auto md = parse_market_data(testing::source_path("data/sydney.json"));
  CHECK(parse_market_json(serialize_market_json(md)) == md);
  CHECK(parse_market_csv(serialize_market_csv(md)) == md);
  auto with_points = parse_market_json(kCapletsOnly);
  with_points.curve.flat_rate.reset();
  with_points.curve.points = {{1.0, 0.96}, {2.0, 0.921}, {4.0, 0.85}};
  CHECK(parse_market_csv(serialize_market_csv(with_points)) == with_points);
  CHECK(parse_market_json(serialize_market_json(with_points)) == with_points);
}

TEST_CASE("matrix CSV is lossless") {
  std::mt19937_64 rng(4);
  const auto s = testing::random_sym(6, rng, 1e-3);
  const auto back = parse_symmetric_csv(matrix_to_csv(s));
  CHECK(testing::max_abs_diff(back, s) == 0.0);
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK_THROWS_AS(parse_matrix_csv("1,2\n3\n"), ParseError);
  CHECK_THROWS_AS(parse_symmetric_csv("1,2\n3,1\n"), ValidationError);
}

TEST_CASE("targets, scenarios and digests") {
  const Calendar cal{1.0, 20};
  CHECK(parse_target("5x2", cal) == std::pair<std::size_t, std::size_t>{5, 6});
  CHECK(parse_target("3X1", cal) == std::pair<std::size_t, std::size_t>{3, 3});
  CHECK_THROWS_AS(parse_target("5y2", cal), ParseError);
  const auto sc = parse_scenarios(R"([{"name": "a", "u": [0.001, 0]}])");
  REQUIRE(sc.size() == 1);
  CHECK(sc[0].u == std::vector<double>{0.001, 0.0});
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("experiment config and manifest round-trip") {
  const auto cfg = parse_experiment_config(read_text_file(testing::source_path("data/hedging_experiment.json")));
  CHECK(cfg.market.x0.size() == 5);
  CHECK(cfg.market.cov(1, 1) == 0.0225);
  CHECK(cfg.experiment.rebalances == 33);
  CHECK(cfg.experiment.methods.size() == 4);
  CHECK_FALSE(cfg.experiment.noise_per_path);

  RunManifest m;
  m.command = "calibrate";
  m.args = {"calibrate", "--data", "x.json"};
  m.inputs = {{"x.json", sha256_hex("x")}};
  m.seed = 42;
  m.version = tool_version();
  m.kernels = "scalar";
  m.outputs = {{"x.csv", sha256_hex("y")}};
  const auto back = parse_manifest(to_json(m).dump());
  CHECK(back.args == m.args);
  CHECK(back.inputs == m.inputs);
  CHECK(back.outputs == m.outputs);
  CHECK(*back.seed == 42);
  CHECK(back.kernels == "scalar");
}

TEST_CASE("CLI end to end") {
  const std::string sydney = testing::source_path("data/sydney.json");

  SUBCASE("calibrate writes X and duals") {
    const auto out = scratch("calibrate");
    REQUIRE(run("calibrate --data " + sydney + " --objective min-trace --out-dir " + out.string()) == 0);
    const auto x = parse_symmetric_csv(read_text_file(out / "x.csv"));
    CHECK(x.dim() == 20);
    const auto duals = load_json(out / "duals.json");
    CHECK(duals.dump().find("5Y into 2Y") != std::string::npos);
    CHECK(fs::exists(out / "manifest.json"));
  }

  SUBCASE("inconsistent quotes exit 2 with a certificate") {
    const auto out = scratch("inconsistent");
    CHECK(run("calibrate --data " + testing::source_path("tests/data/inconsistent.json") + " --out-dir " +
              out.string()) == 2);
    const auto cert = load_json(out / "certificate.json");
    CHECK(cert.contains("certificate"));
  }

  SUBCASE("usage errors exit 1") {
    const auto out = scratch("usage");
    CHECK(run("calibrate --out-dir " + out.string()) == 1);
    CHECK(run("calibrate --data " + testing::source_path("tests/data/duplicate.json") + " --out-dir " +
              out.string()) == 1);
    CHECK(run("frobnicate") == 1);
    CHECK(run("--help") == 0);
  }

  SUBCASE("bounds sweep and replay") {
    const auto out = scratch("bounds");
    REQUIRE(run("bounds --data " + sydney + " --sweep --format csv --out-dir " + out.string()) == 0);
    const std::string csv = read_text_file(out / "bounds.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 210);
    const auto replay = scratch("bounds_replay");
    CHECK(run("replay --manifest " + (out / "manifest.json").string() + " --out-dir " + replay.string()) == 0);
    CHECK(read_text_file(replay / "bounds.csv") == csv);
  }

  SUBCASE("gamma hedge from CSV inputs") {
    const auto out = scratch("gamma");
    write_text_file(out / "g.csv", "0,0.7\n0.7,0\n");
    write_text_file(out / "s.csv", "1,0\n0,1\n");
    write_text_file(out / "gm.csv", "1,1\n");
    REQUIRE(run("gamma-hedge --gamma " + (out / "g.csv").string() + " --sigma " + (out / "s.csv").string() +
                " --gammas " + (out / "gm.csv").string() + " --out-dir " + out.string()) == 0);
    const auto r = load_json(out / "gamma_hedge.json");
    CHECK(r["t"].get<double>() == doctest::Approx(0.7).epsilon(1e-6));
  }
}
