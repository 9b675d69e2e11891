#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "linkm/commands.hpp"
#include "linkm/config.hpp"
#include "linkm/errors.hpp"

using namespace linkm;

namespace {

struct Common {
  std::string preset;
  std::string link_file;
  std::string field_file;
  std::string config_file;
  std::string out;
  std::string level = "quick";
  std::optional<std::uint64_t> budget;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& o, bool budget) {
  cmd->add_option("--config", o.config_file, "JSON config overlay")->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "write the report here instead of stdout");
  cmd->add_option("--level", o.level, "quick or full defaults")->check(CLI::IsMember({"quick", "full"}));
  cmd->add_option("--seed", o.seed, "master seed");
  if (budget) cmd->add_option("--budget", o.budget, "pair-sample budget (volume budget is a quarter)");
}

Config resolve_config(const Common& o) {
  const Level level = parse_level(o.level);
  Config cfg = o.config_file.empty() ? default_config(level) : load_config(o.config_file, level);
  if (o.budget) apply_budget(cfg, *o.budget);
  if (o.seed) apply_seed(cfg, *o.seed);
  return cfg;
}

LinkInput resolve_link(const Common& o) {
  if (o.preset.empty() == o.link_file.empty()) throw CLI::ValidationError("exactly one of --preset and --link is required");
  return o.preset.empty() ? link_input_file(o.link_file) : link_input_preset(o.preset);
}

FieldInput resolve_field(const Common& o, double radius, double rotation) {
  if (o.preset.empty() == o.field_file.empty())
    throw CLI::ValidationError("exactly one of --preset and --field is required");
  return o.preset.empty() ? field_input_file(o.field_file) : field_input_preset(o.preset, radius, rotation);
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

int emit(const Report& r, const Common& o) {
  write_text(o.out, dump(r.document()));
  for (const auto& c : r.checks)
    if (c.failed())
      std::fprintf(stderr, "FAIL [%d] %s: measured %.6g, needs %s %.6g\n", c.criterion, c.name.c_str(), c.measured,
                   c.relation.c_str(), c.tolerance);
  if (!r.converged) std::fprintf(stderr, "warning: not converged within budget\n");
  return r.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Triple linking invariant M of 3-component links and of divergence-free fields"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  Common o;
  double radius = 0.1, rotation = 0.0;
  TraceParams tp;
  std::vector<int> pair{1, 2};
  std::string csv;
  std::optional<int> triples;

  auto* lk = app.add_subcommand("lk", "linking matrix by the Gauss integral and by crossing signs");
  auto* m = app.add_subcommand("m", "M with its term breakdown");
  for (auto* cmd : {lk, m}) {
    auto* p = cmd->add_option("--preset", o.preset, "built-in link");
    auto* l = cmd->add_option("--link", o.link_file, "linkm-curve-v1 file")->check(CLI::ExistingFile);
    p->excludes(l);
    add_common(cmd, o, cmd == m);
  }

  auto* suite = app.add_subcommand("suite", "run every acceptance check");
  add_common(suite, o, false);

  auto* tr = app.add_subcommand("trace", "trace field lines and their asymptotic linking");
  auto* erg = app.add_subcommand("ergodic", "M averaged over triples of closed field lines");
  for (auto* cmd : {tr, erg}) {
    auto* p = cmd->add_option("--preset", o.preset, "tubes around a built-in link");
    auto* f = cmd->add_option("--field", o.field_file, "linkm-field-v1 file")->check(CLI::ExistingFile);
    p->excludes(f);
    cmd->add_option("--tube-radius", radius, "tube radius for --preset")->check(CLI::PositiveNumber);
    add_common(cmd, o, cmd == erg);
  }
  tr->add_option("--rotation", rotation, "section turns per transit for --preset");
  tr->add_option("-T,--time", tp.T, "largest checkpoint time")->check(CLI::PositiveNumber);
  tr->add_option("--pair", pair, "two tube numbers (1-based)")->expected(2);
  tr->add_option("--csv", csv, "write the checkpoint series as T,value");
  erg->add_option("--triples", triples, "number of line triples")->check(CLI::Range(1, 1 << 20));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitUsage;
  }

  try {
    Config cfg = resolve_config(o);
    if (lk->parsed()) return emit(cmd_lk(resolve_link(o), cfg), o);
    if (m->parsed()) return emit(cmd_m(resolve_link(o), cfg), o);
    if (suite->parsed()) return emit(cmd_suite(cfg), o);
    if (tr->parsed()) {
      tp.pair = {pair[0] - 1, pair[1] - 1};
      CesaroEstimate series;
      const Report r = cmd_trace(resolve_field(o, radius, rotation), tp, cfg, &series);
      if (!csv.empty() && !series.values.empty()) write_text(csv, checkpoints_csv(series));
      return emit(r, o);
    }
    if (erg->parsed()) {
      if (triples) cfg.ergodic.n_triples = *triples;
      return emit(cmd_ergodic(resolve_field(o, radius, 0.0), cfg), o);
    }
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const SchemaError& e) {
    std::fprintf(stderr, "schema error: %s\n", e.what());
    return kExitUsage;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kExitUsage;
  } catch (const ConvergenceError& e) {
    std::fprintf(stderr, "did not converge: %s\n", e.what());
    return kExitNonConvergence;
  } catch (const TraceError& e) {
    std::fprintf(stderr, "trace failed: %s\n", e.what());
    return kExitNonConvergence;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitCheckFailure;
  }
  return kExitUsage;
}
