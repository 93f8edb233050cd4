#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "common.hpp"
#include "sicm/cli.hpp"

using namespace sicm;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Call {
  int code;
  std::string out, err;
};

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("sicm_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Call call(const fs::path& dir, const json& config, std::vector<std::string> extra) {
  fs::path cfg = dir / "config.json";
  std::ofstream(cfg) << config.dump();
  std::vector<std::string> args{"sicm"};
  args.push_back(extra.front());
  args.push_back("--config");
  args.push_back(cfg.string());
  args.insert(args.end(), extra.begin() + 1, extra.end());
  std::ostringstream out, err;
  int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

json uniform_model() { return {{"kind", "row-independent"}, {"params", {{"M", {{0.5, 0.5}, {0.5, 0.5}}}}}}; }
json qsd_model() { return {{"kind", "qsd"}, {"params", {{"P", {{1, 0, 0}, {0.2, 0.3, 0.5}, {0.4, 0.6, 0}}}}}}; }

}  // namespace

TEST_CASE("dv-rate on the uniform model") {
  auto dir = scratch("dv");
  auto c = call(dir, {{"model", uniform_model()}, {"params", {{"m", {0.75, 0.25}}}}},
                {"dv-rate", "--out", (dir / "out").string()});
  REQUIRE(c.code == 0);
  json doc = json::parse(slurp(dir / "out" / "dv-rate.json"));
  cli::check_result(doc);
  // independent pairs are optimal when G does not depend on the state: log 2 - H(m)
  double oracle = std::log(2.0) + 0.75 * std::log(0.75) + 0.25 * std::log(0.25);
  CHECK(doc["result"]["value"].get<double>() == doctest::Approx(oracle).epsilon(1e-10));
  CHECK(doc["result"]["value"].get<double>() == doctest::Approx(0.1308).epsilon(1e-3));
  CHECK(json::parse(c.out) == doc);
}

TEST_CASE("feasible on the 2-cycle") {
  auto dir = scratch("feas");
  auto c = call(dir, {{"params", {{"m", {0.3, 0.7}}, {"adjacency", {{0, 1}, {1, 0}}}}}},
                {"feasible", "--out", dir.string()});
  REQUIRE(c.code == 0);
  json doc = json::parse(slurp(dir / "feasible.json"));
  cli::check_result(doc);
  CHECK(doc["result"]["feasible"] == false);
  auto ok = call(dir, {{"params", {{"m", {0.5, 0.5}}, {"adjacency", {{0, 1}, {1, 0}}}}}},
                 {"feasible", "--out", dir.string()});
  CHECK(json::parse(ok.out)["result"]["feasible"] == true);
}

TEST_CASE("simulate is byte-reproducible") {
  auto dir = scratch("sim");
  json cfg = {{"model", qsd_model()}, {"params", {{"n", 5000}, {"seed", 3}}}};
  REQUIRE(call(dir, cfg, {"simulate", "--out", (dir / "a").string()}).code == 0);
  REQUIRE(call(dir, cfg, {"simulate", "--out", (dir / "b").string()}).code == 0);
  std::string a = slurp(dir / "a" / "simulate.path.csv");
  CHECK(!a.empty());
  CHECK(a == slurp(dir / "b" / "simulate.path.csv"));
  CHECK(a.rfind("step,t,m0,m1\n", 0) == 0);
  CHECK(slurp(dir / "a" / "simulate.json") == slurp(dir / "b" / "simulate.json"));
  REQUIRE(call(dir, cfg, {"simulate", "--out", (dir / "c").string(), "--seed", "4"}).code == 0);
  CHECK(a != slurp(dir / "c" / "simulate.path.csv"));
  json doc = json::parse(slurp(dir / "c" / "simulate.json"));
  cli::check_result(doc);
  CHECK(doc["params"]["seed"] == 4);
}

TEST_CASE("every command emits a valid result document") {
  auto dir = scratch("all");
  json u = uniform_model(), q = qsd_model();
  std::vector<std::pair<std::string, json>> runs{
      {"simulate", {{"model", q}, {"params", {{"n", 1000}}}}},
      {"fixed-point", {{"model", q}, {"params", json::object()}}},
      {"dv-rate", {{"model", q}, {"params", {{"m", {0.6, 0.4}}}}}},
      {"rate", {{"model", q}, {"params", {{"m", {0.6, 0.4}}, {"T", 1.0}, {"N", 4}}}}},
      {"feasible", {{"model", q}, {"params", {{"m", {0.6, 0.4}}}}}},
      {"construct",
       {{"model", u},
        {"params",
         {{"m", {0.75, 0.25}},
          {"T", 2.0},
          {"kernels", {{{0.7, 0.3}, {0.7, 0.3}}, {{0.8, 0.2}, {0.8, 0.2}}}},
          {"runs", 2},
          {"n", 30000}}}}},
      {"mc-prob", {{"model", u}, {"params", {{"target", {0.75, 0.25}}, {"radius", 0.1}, {"n", 20}, {"reps", 1000}}}}},
      {"check-assumptions", {{"model", q}}},
      {"timescale", {{"params", {{"n", 1000}, {"t", 2.0}}}}},
  };
  for (const auto& [cmd, cfg] : runs) {
    INFO(cmd);
    auto c = call(dir, cfg, {cmd, "--out", (dir / "out").string()});
    INFO(c.err);
    REQUIRE(c.code == 0);
    json doc = json::parse(slurp(dir / "out" / (cmd + ".json")));
    CHECK_NOTHROW(cli::check_result(doc));
    for (const auto& f : doc["files"]) CHECK(fs::exists(dir / "out" / f.get<std::string>()));
  }
  // nothing but results and sidecars, no temporaries
  for (const auto& e : fs::directory_iterator(dir / "out")) {
    CHECK(e.path().extension() != ".tmp");
    CHECK((e.path().extension() == ".json" || e.path().extension() == ".csv"));
  }
  json con = json::parse(slurp(dir / "out" / "construct.json"));
  CHECK(con["result"]["runs"]["count"] == 2);
  CHECK(con["result"]["schedule"]["l0"] == 2);
  json mc = json::parse(slurp(dir / "out" / "mc-prob.json"));
  CHECK(mc["result"]["reps"] == 1000);
}

TEST_CASE("exit codes") {
  auto dir = scratch("codes");
  json u = uniform_model();
  const std::string out = (dir / "out").string();
  CHECK(call(dir, {{"model", u}, {"params", {{"m", {0.75, 0.25}}}}, {"bogus", 1}}, {"dv-rate", "--out", out}).code == 2);
  CHECK(call(dir, {{"model", u}, {"params", {{"m", {0.75, 0.25}}, {"x", 1}}}}, {"dv-rate", "--out", out}).code == 2);
  CHECK(call(dir, {{"model", u}, {"params", {{"m", {0.75, 0.35}}}}}, {"dv-rate", "--out", out}).code == 2);
  CHECK(call(dir, {{"model", u}, {"params", {{"m", {0.75, 0.25}}}}}, {"dv-rate", "--out", out, "--N", "3"}).code == 2);
  CHECK(call(dir, {{"model", u}, {"params", {{"n", -5}}}}, {"simulate", "--out", out}).code == 2);
  CHECK(call(dir, {{"model", u}, {"params", {{"n", 10}}}, {"command", "rate"}}, {"simulate", "--out", out}).code == 2);
  CHECK(call(dir, {{"params", {{"m", {0.5, 0.5}}}}}, {"dv-rate", "--out", out}).code == 2);

  json q = qsd_model();
  CHECK(call(dir, {{"model", q}, {"params", {{"max_iter", 1}}}}, {"fixed-point", "--out", out}).code == 3);

  // only the swap kernel lives on the 2-cycle, so no control path leaves m
  Eigen::MatrixXi cyc(2, 2);
  cyc << 0, 1, 1, 0;
  Eigen::MatrixXd swap(2, 2);
  swap << 0, 1, 1, 0;
  auto two = make_model(swap, {Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2)}, AdjacencySpec::from_matrix(cyc));
  auto c = call(dir, {{"model", to_json(two)}, {"params", {{"m", {0.3, 0.7}}, {"T", 1.0}, {"N", 4}}}},
                {"construct", "--out", out});
  CHECK(c.code == 4);

  std::ostringstream o, e;
  CHECK(cli::run({"sicm"}, o, e) == 2);
  CHECK(cli::run({"sicm", "dv-rate"}, o, e) == 2);
  CHECK(cli::run({"sicm", "dv-rate", "--config", (dir / "missing.json").string()}, o, e) == 2);
  CHECK(cli::run({"sicm", "--help"}, o, e) == 0);
}

TEST_CASE("output directory from the environment") {
  auto dir = scratch("env");
  ::setenv("SICM_OUT_DIR", (dir / "envout").string().c_str(), 1);
  json cfg = {{"params", {{"n", 100}, {"t", 1.0}}}};
  auto c = call(dir, cfg, {"timescale"});
  ::unsetenv("SICM_OUT_DIR");
  REQUIRE(c.code == 0);
  CHECK(fs::exists(dir / "envout" / "timescale.json"));
  // the config key wins over the environment
  ::setenv("SICM_OUT_DIR", (dir / "envout").string().c_str(), 1);
  cfg["out"] = (dir / "cfgout").string();
  REQUIRE(call(dir, cfg, {"timescale"}).code == 0);
  ::unsetenv("SICM_OUT_DIR");
  CHECK(fs::exists(dir / "cfgout" / "timescale.json"));
}

TEST_CASE("check_result rejects incomplete documents") {
  CHECK_THROWS_AS(cli::check_result(json::object()), ValidationError);
  json doc = {{"command", "dv-rate"}, {"params", json::object()}, {"files", json::array()}, {"result", {{"value", 1}}}};
  CHECK_THROWS_AS(cli::check_result(doc), ValidationError);
  doc["result"]["kernel"] = json::array();
  doc["result"]["gamma"] = nullptr;
  CHECK_NOTHROW(cli::check_result(doc));
  doc["command"] = "nope";
  CHECK_THROWS_AS(cli::check_result(doc), ValidationError);
}
