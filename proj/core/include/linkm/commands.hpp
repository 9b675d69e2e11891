#pragma once

// The report-producing commands behind the command-line tool, and the
// verification suite that runs every acceptance check.

#include <array>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "linkm/config.hpp"
#include "linkm/curves.hpp"
#include "linkm/fieldlines.hpp"
#include "linkm/report.hpp"

namespace linkm {

struct LinkInput {
  Link3 link;
  nlohmann::json echo;  // {"preset": name} or {"link_file": path}, plus the curves
};

LinkInput link_input_preset(const std::string& name);
LinkInput link_input_file(const std::string& path);

struct FieldInput {
  FieldSystem field;
  nlohmann::json echo;
  std::optional<Link3> central;  // pure-transit preset fields: the central curves
};

FieldInput field_input_file(const std::string& path);
/// Tubes of `radius` around a preset; pure transit when rotation is 0.
FieldInput field_input_preset(const std::string& name, double radius, double rotation);

/// LinkingMatrix by the Gauss integral and by crossing signs.
Report cmd_lk(const LinkInput& in, const Config& cfg);
/// Full TermBreakdown of M. Non-convergence maps to exit code 3.
Report cmd_m(const LinkInput& in, const Config& cfg);

struct TraceParams {
  double T = 10.0;
  std::array<int, 2> pair{0, 1};
  /// Start points at s = 0, (u, v) = (offset_u, offset_v) * radius of each tube.
  double offset_u = 0.3;
  double offset_v = 0.2;
};

/// Traces one trajectory per tube and estimates the asymptotic linking of the
/// chosen pair. `series` receives the checkpoint series when non-null.
Report cmd_trace(const FieldInput& in, const TraceParams& params, const Config& cfg,
                 CesaroEstimate* series = nullptr);
Report cmd_ergodic(const FieldInput& in, const Config& cfg);

/// Runs acceptance criteria 1 to 12 at cfg.level.
Report cmd_suite(const Config& cfg);

/// "T,value" rows, one per checkpoint, with round-trip precision.
std::string checkpoints_csv(const CesaroEstimate& c);

}  // namespace linkm
