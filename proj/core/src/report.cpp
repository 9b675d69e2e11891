#include "linkm/report.hpp"

#include <cmath>

#include "linkm/errors.hpp"

namespace linkm {

using nlohmann::json;

namespace {

bool holds(double measured, const std::string& rel, double tol) {
  if (!std::isfinite(measured)) return false;
  if (rel == "<") return measured < tol;
  if (rel == "<=") return measured <= tol;
  if (rel == ">") return measured > tol;
  if (rel == ">=") return measured >= tol;
  throw ValidationError("unknown check relation '" + rel + "'");
}

}  // namespace

double Check::margin() const {
  if (relation == "<" || relation == "<=") return tolerance - measured;
  return measured - tolerance;
}

Check make_check(int criterion, std::string name, double measured, std::string relation,
                 double tolerance, std::string detail) {
  Check c;
  c.criterion = criterion;
  c.name = std::move(name);
  c.measured = measured;
  c.tolerance = tolerance;
  c.status = holds(measured, relation, tolerance) ? CheckStatus::Pass : CheckStatus::Fail;
  c.relation = std::move(relation);
  c.detail = std::move(detail);
  return c;
}

Check info_check(int criterion, std::string name, double measured, std::string detail) {
  Check c;
  c.criterion = criterion;
  c.name = std::move(name);
  c.measured = measured;
  c.status = CheckStatus::Info;
  c.relation = "info";
  c.detail = std::move(detail);
  return c;
}

Check timed_check(int criterion, std::string name, double seconds, double limit) {
  Check c = make_check(criterion, std::move(name), seconds, "<", limit);
  c.timed = true;
  return c;
}

std::string to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Fail: return "fail";
    case CheckStatus::Info: return "info";
  }
  return "?";
}

json to_json(const Check& c) {
  json j{{"criterion", c.criterion}, {"name", c.name}, {"status", to_string(c.status)},
         {"relation", c.relation}};
  if (c.timed) {
    j["tolerance"] = c.tolerance;
    j["measured"] = "see timing";
  } else {
    j["measured"] = c.measured;
  }
  if (c.status != CheckStatus::Info && !c.timed) {
    j["tolerance"] = c.tolerance;
    j["margin"] = c.margin();
  }
  if (!c.detail.empty()) j["detail"] = c.detail;
  if (!c.data.is_null()) j["data"] = c.data;
  return j;
}

int Report::failures() const {
  int n = 0;
  for (const auto& c : checks) n += c.failed() ? 1 : 0;
  return n;
}

int Report::exit_code() const {
  if (failures() > 0) return kExitCheckFailure;
  if (!converged) return kExitNonConvergence;
  return kExitPass;
}

json Report::body() const {
  json j;
  j["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
  j["command"] = command;
  j["input"] = input;
  j["config"] = config;
  j["seeds"] = seeds;
  j["results"] = results;
  j["checks"] = json::array();
  for (const auto& c : checks) j["checks"].push_back(to_json(c));
  j["summary"] = {{"checks", checks.size()},
                  {"failed", failures()},
                  {"converged", converged},
                  {"exit_code", exit_code()}};
  return j;
}

json Report::document() const {
  json t = json::object();
  for (const auto& [k, v] : timing) t[k] = v;
  for (const auto& c : checks)
    if (c.timed) t["checks"][c.name] = {{"seconds", c.measured}, {"limit", c.tolerance}, {"margin", c.margin()}};
  return {{"body", body()}, {"timing", t}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace linkm
