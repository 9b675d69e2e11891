#pragma once

// JSON reports. The body is a pure function of the inputs, the config and the
// seed; wall-clock times live in a separate "timing" object.

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace linkm {

inline constexpr const char* kToolName = "linkm";
inline constexpr const char* kToolVersion = "0.3.0";

enum class CheckStatus { Pass, Fail, Info };

struct Check {
  int criterion = 0;  // acceptance criterion number, 0 for none
  std::string name;
  CheckStatus status = CheckStatus::Pass;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string relation = "<=";  // measured <relation> tolerance is the pass condition
  std::string detail;
  nlohmann::json data;  // extra numbers behind the measurement
  /// Wall-clock measurement: the body keeps only the status, the numbers go to timing.
  bool timed = false;

  bool failed() const { return status == CheckStatus::Fail; }
  /// tolerance - measured for upper bounds, measured - tolerance for lower bounds.
  double margin() const;
};

/// Evaluates `measured <relation> tolerance` (relation one of <, <=, >, >=).
Check make_check(int criterion, std::string name, double measured, std::string relation,
                 double tolerance, std::string detail = {});
/// Never fails; recorded for the margin only.
Check info_check(int criterion, std::string name, double measured, std::string detail = {});
Check timed_check(int criterion, std::string name, double seconds, double limit);

struct Report {
  std::string command;
  nlohmann::json input = nlohmann::json::object();
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json seeds = nlohmann::json::object();
  nlohmann::json results = nlohmann::json::object();
  std::vector<Check> checks;
  bool converged = true;
  std::map<std::string, double> timing;

  void add(Check c) { checks.push_back(std::move(c)); }
  int failures() const;
  /// 0 pass, 1 a check failed, 3 a result did not converge.
  int exit_code() const;

  nlohmann::json body() const;
  /// {"body": ..., "timing": ...}
  nlohmann::json document() const;
};

inline constexpr int kExitPass = 0;
inline constexpr int kExitCheckFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNonConvergence = 3;

nlohmann::json to_json(const Check& c);
std::string to_string(CheckStatus s);

/// Stable text form used for byte comparisons: 2-space indent, trailing newline.
std::string dump(const nlohmann::json& j);

}  // namespace linkm
