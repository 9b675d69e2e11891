#pragma once

// Run configuration: numerical options for M and the field-line estimators,
// suite budgets, and every tolerance checked by the suite. Loaded from JSON as
// an overlay on the level defaults and echoed verbatim into reports.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "linkm/fieldlines.hpp"
#include "linkm/terms.hpp"

namespace linkm {

enum class Level { Quick, Full };

Level parse_level(const std::string& s);
std::string to_string(Level level);

struct Tolerances {
  double lk_integer = 1e-4;        // |gauss - crossing|
  double lk_seconds = 5.0;         // per pair
  double circulation_factor = 3.0; // x quadrature error
  double period = 1e-6;            // lifted phi_{j,i} increment vs lk
  double mean_zero = 1e-9;
  double gauge_average = 1e-8;
  double exact_zero = 1e-9;
  double sigmas = 3.0;             // statistical checks
  double asymptotic_rel = 0.02;
  int closed_form_required = 18;   // of 20
  double quick_seconds = 600.0;
  double full_seconds = 7200.0;
};

struct SuiteSettings {
  std::string witness = "eccentric_tori";          // mirror check, invariance families
  std::vector<std::string> separation_pair{"torus_2_2k:1", "eccentric_tori"};
  int family_members = 5;
  double isotopy_amplitude = 1.0;  // fraction of the min_separation / 4 cap
  std::uint64_t family_pair_budget = 1 << 16;
  std::uint64_t witness_pair_budget = 1 << 18;
  std::uint64_t zero_check_budget = 1 << 13;  // short-circuit disabled
  double tube_radius = 0.1;
  int ergodic_triples = 8;
  double linking_T = 10.0;
  double linking_rotation = 0.25;
  std::vector<int> worker_counts{1, 2};
  std::uint64_t closed_form_budget = 1 << 16;
};

struct Config {
  Level level = Level::Quick;
  MOptions m;
  LinkingOptions linking;
  ErgodicOptions ergodic;
  Tolerances tol;
  SuiteSettings suite;
};

Config default_config(Level level);

/// Overlays the keys present in j onto cfg. Unknown keys and wrong types
/// throw SchemaError naming the JSON path.
void apply_config(Config& cfg, const nlohmann::json& j);
Config load_config(const std::string& path, Level level);

/// Sets pair_budget = n and volume_budget = max(n / 4, 4096).
void apply_budget(Config& cfg, std::uint64_t n);
void apply_seed(Config& cfg, std::uint64_t seed);

nlohmann::json to_json(const Config& cfg);

}  // namespace linkm
