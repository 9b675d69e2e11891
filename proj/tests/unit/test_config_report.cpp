#include <doctest.h>

#include <cmath>
#include <limits>

#include "linkm/commands.hpp"
#include "linkm/config.hpp"
#include "linkm/errors.hpp"
#include "linkm/report.hpp"

using namespace linkm;
using nlohmann::json;

namespace {

std::string schema_message(Config& cfg, const json& patch) {
  try {
    apply_config(cfg, patch);
  } catch (const SchemaError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("config overlay touches only the named keys") {
  Config cfg = default_config(Level::Quick);
  const json before = to_json(cfg);
  apply_config(cfg, json{{"m", {{"phi_grid", 512}, {"potential", {{"kernel", "squared"}}}}}, {"seed", 99}});
  const json after = to_json(cfg);
  CHECK(after["m"]["phi_grid"] == 512);
  CHECK(after["m"]["potential"]["kernel"] == "squared");
  CHECK(after["seed"] == 99);
  json expect = before;
  expect["m"]["phi_grid"] = 512;
  expect["m"]["potential"]["kernel"] = "squared";
  expect["seed"] = 99;
  CHECK(after == expect);
}

TEST_CASE("to_json and apply_config round trip") {
  for (Level l : {Level::Quick, Level::Full}) {
    const Config a = default_config(l);
    Config b = default_config(Level::Quick);
    apply_config(b, to_json(a));
    CHECK(to_json(b) == to_json(a));
  }
}

TEST_CASE("a level key rebases on that level's defaults") {
  Config cfg = default_config(Level::Quick);
  apply_config(cfg, json{{"level", "full"}, {"m", {{"pair_budget", 1000}}}});
  CHECK(cfg.level == Level::Full);
  CHECK(cfg.m.pair_budget == 1000);
  CHECK(cfg.suite.witness_pair_budget == default_config(Level::Full).suite.witness_pair_budget);
}

TEST_CASE("bad config keys and types name their path") {
  Config cfg = default_config(Level::Quick);
  CHECK(schema_message(cfg, json{{"m", {{"bogus", 1}}}}).find("/m/bogus") != std::string::npos);
  CHECK(schema_message(cfg, json{{"m", {{"phi_grid", "many"}}}}).find("/m/phi_grid") != std::string::npos);
  CHECK(schema_message(cfg, json{{"m", {{"pair_budget", -5}}}}).find("/m/pair_budget") != std::string::npos);
  CHECK(schema_message(cfg, json{{"level", "medium"}}).find("level") != std::string::npos);
  CHECK(schema_message(cfg, json::array()) != "");
  CHECK(to_json(cfg) == to_json(default_config(Level::Quick)));
}

TEST_CASE("budget and seed helpers") {
  Config cfg = default_config(Level::Quick);
  apply_budget(cfg, 1 << 12);
  CHECK(cfg.m.pair_budget == 4096);
  CHECK(cfg.m.volume_budget == 4096);
  apply_budget(cfg, 1 << 20);
  CHECK(cfg.m.volume_budget == (1u << 18));
  CHECK_THROWS(apply_budget(cfg, 10));
  apply_seed(cfg, 7);
  CHECK(cfg.m.seed == 7);
  CHECK(cfg.ergodic.seed == 7);
}

TEST_CASE("check relations") {
  CHECK_FALSE(make_check(1, "a", 1.0, "<", 2.0).failed());
  CHECK(make_check(1, "a", 2.0, "<", 2.0).failed());
  CHECK_FALSE(make_check(1, "a", 2.0, "<=", 2.0).failed());
  CHECK_FALSE(make_check(1, "a", 3.0, ">", 2.0).failed());
  CHECK(make_check(1, "a", 2.0, ">", 2.0).failed());
  CHECK_FALSE(make_check(1, "a", 2.0, ">=", 2.0).failed());
  CHECK(make_check(1, "a", std::nan(""), "<", 2.0).failed());
  CHECK(make_check(1, "a", std::numeric_limits<double>::infinity(), ">", 2.0).failed());
  CHECK_THROWS(make_check(1, "a", 1.0, "==", 1.0));
  CHECK(make_check(1, "a", 1.0, "<=", 3.0).margin() == doctest::Approx(2.0));
  CHECK(make_check(1, "a", 5.0, ">", 3.0).margin() == doctest::Approx(2.0));
  CHECK(info_check(1, "a", 1e9).status == CheckStatus::Info);
}

TEST_CASE("exit codes follow failures, then convergence") {
  Report r;
  CHECK(r.exit_code() == kExitPass);
  r.converged = false;
  CHECK(r.exit_code() == kExitNonConvergence);
  r.add(make_check(2, "x", 1.0, "<", 0.5));
  CHECK(r.exit_code() == kExitCheckFailure);
  CHECK(r.failures() == 1);
  CHECK(r.body()["summary"]["exit_code"] == kExitCheckFailure);
}

TEST_CASE("timed checks keep their numbers out of the body") {
  Report r;
  r.add(timed_check(12, "run seconds", 1.25, 600.0));
  r.add(timed_check(12, "slow seconds", 700.0, 600.0));
  const json doc = r.document();
  const std::string body = doc["body"].dump();
  CHECK(body.find("1.25") == std::string::npos);
  CHECK(body.find("700") == std::string::npos);
  CHECK(doc["timing"]["checks"]["run seconds"]["seconds"] == 1.25);
  CHECK(r.checks[1].failed());
  CHECK(r.exit_code() == kExitCheckFailure);
}

TEST_CASE("checkpoint csv keeps full precision") {
  CesaroEstimate c;
  c.checkpoints = {0.5, 1.0};
  c.values = {0.1, 1.0 / 3.0};
  const std::string s = checkpoints_csv(c);
  CHECK(s.rfind("T,value\n", 0) == 0);
  CHECK(s.find("0.5,0.10000000000000001\n") != std::string::npos);
  CHECK(s.find("1,0.33333333333333331\n") != std::string::npos);
}

TEST_CASE("lk report bodies are reproducible and correct") {
  const Config cfg = default_config(Level::Quick);
  const Report a = cmd_lk(link_input_preset("borromean"), cfg);
  const Report b = cmd_lk(link_input_preset("borromean"), cfg);
  CHECK(dump(a.body()) == dump(b.body()));
  CHECK(a.exit_code() == kExitPass);
  CHECK(a.results["linking_matrix"]["lk"] == json::array({{0, 0, 0}, {0, 0, 0}, {0, 0, 0}}));
  CHECK(a.body()["input"]["preset"] == "borromean");
  const Report h = cmd_lk(link_input_preset("hopf_plus_far_circle"), cfg);
  CHECK(std::abs(h.results["linking_matrix"]["lk"][0][1].get<int>()) == 1);
  CHECK_THROWS_AS(link_input_preset("trefoil"), ValidationError);
}
