#include "linkm/config.hpp"

#include <algorithm>

#include "linkm/curves_io.hpp"
#include "linkm/errors.hpp"

namespace linkm {

using nlohmann::json;

Level parse_level(const std::string& s) {
  if (s == "quick") return Level::Quick;
  if (s == "full") return Level::Full;
  throw ValidationError("level must be quick or full, got '" + s + "'");
}

std::string to_string(Level level) { return level == Level::Quick ? "quick" : "full"; }

Config default_config(Level level) {
  Config c;
  c.level = level;
  c.m.target_rel_std_error = 0.0;
  if (level == Level::Quick) {
    c.m.pair_budget = 1 << 16;
    c.m.volume_budget = 1 << 15;
  } else {
    c.m.pair_budget = 1 << 18;
    c.m.volume_budget = 1 << 16;
    c.suite.family_pair_budget = 1 << 18;
    c.suite.witness_pair_budget = 1 << 20;
    c.suite.zero_check_budget = 1 << 15;
    c.suite.ergodic_triples = 32;
    c.suite.linking_T = 20.0;
    c.suite.worker_counts = {1, 2, 4};
    c.suite.closed_form_budget = 1 << 18;
  }
  c.ergodic.n_triples = c.suite.ergodic_triples;
  c.ergodic.seed = c.m.seed;
  return c;
}

void apply_budget(Config& cfg, std::uint64_t n) {
  if (n < 64) throw ValidationError("budget must be at least 64");
  cfg.m.pair_budget = n;
  cfg.m.volume_budget = std::max<std::uint64_t>(n / 4, 4096);
}

void apply_seed(Config& cfg, std::uint64_t seed) {
  cfg.m.seed = seed;
  cfg.ergodic.seed = seed;
}

namespace {

const char* kernel_name(KernelKind k) { return k == KernelKind::Cubed ? "cubed" : "squared"; }
const char* measure_name(GaugeMeasure m) { return m == GaugeMeasure::Arclength ? "arclength" : "parameter"; }

template <class T>
T get(const json& j, const char* key, const std::string& path) {
  const std::string p = path + "/" + key;
  const auto it = j.find(key);
  if (it == j.end()) throw SchemaError(p + ": missing");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw SchemaError(p + ": wrong type");
  }
}

// Rejects keys of `patch` that `base` does not have and scalar/object mismatches.
void check_shape(const json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw SchemaError((path.empty() ? "/" : path) + ": expected an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string p = path + "/" + it.key();
    const auto b = base.find(it.key());
    if (b == base.end()) throw SchemaError(p + ": unknown key");
    if (b->is_object()) {
      check_shape(*b, *it, p);
    } else if (b->is_number()) {
      if (!it->is_number()) throw SchemaError(p + ": expected a number");
      if (b->is_number_integer() && !it->is_number_integer()) throw SchemaError(p + ": expected an integer");
      if (b->is_number_unsigned() && it->is_number_integer() && it->get<long long>() < 0)
        throw SchemaError(p + ": expected a non-negative integer");
    } else if (b->is_boolean() && !it->is_boolean()) {
      throw SchemaError(p + ": expected true or false");
    } else if (b->is_string() && !it->is_string()) {
      throw SchemaError(p + ": expected a string");
    } else if (b->is_array() && !it->is_array()) {
      throw SchemaError(p + ": expected an array");
    }
  }
}

void from_json(const json& j, Config& c) {
  c.level = parse_level(get<std::string>(j, "level", ""));
  apply_seed(c, get<std::uint64_t>(j, "seed", ""));

  const json& m = j["m"];
  const std::string mp = "/m";
  c.m.short_circuit = get<bool>(m, "short_circuit", mp);
  c.m.b_factor = get<double>(m, "b_factor", mp);
  const auto fp = get<std::string>(m, "f_prefactor", mp);
  if (fp != "triple" && fp != "none") throw SchemaError(mp + "/f_prefactor: expected \"triple\" or \"none\"");
  c.m.f_triple_prefactor = fp == "triple";
  const auto gm = get<std::string>(m, "gauge_measure", mp);
  if (gm != "arclength" && gm != "parameter")
    throw SchemaError(mp + "/gauge_measure: expected \"arclength\" or \"parameter\"");
  c.m.gauge_measure = gm == "arclength" ? GaugeMeasure::Arclength : GaugeMeasure::Parameter;
  c.m.phi_grid = get<std::size_t>(m, "phi_grid", mp);
  c.m.curve_nodes = get<int>(m, "curve_nodes", mp);
  c.m.self_nodes = get<int>(m, "self_nodes", mp);
  c.m.linking_tol = get<double>(m, "linking_tol", mp);
  c.m.volume_budget = get<std::uint64_t>(m, "volume_budget", mp);
  c.m.pair_budget = get<std::uint64_t>(m, "pair_budget", mp);
  c.m.target_rel_std_error = get<double>(m, "target_rel_std_error", mp);
  c.m.block_size = get<std::uint32_t>(m, "block_size", mp);
  c.m.diagonal_terms = get<bool>(m, "diagonal_terms", mp);

  const json& po = m["potential"];
  const std::string pp = mp + "/potential";
  const auto kn = get<std::string>(po, "kernel", pp);
  if (kn != "cubed" && kn != "squared") throw SchemaError(pp + "/kernel: expected \"cubed\" or \"squared\"");
  c.m.potential.kernel = kn == "cubed" ? KernelKind::Cubed : KernelKind::Squared;
  c.m.potential.nodes = get<int>(po, "nodes", pp);
  c.m.potential.min_nodes = get<int>(po, "min_nodes", pp);
  c.m.potential.near_factor = get<double>(po, "near_factor", pp);
  c.m.potential.near_floor = get<double>(po, "near_floor", pp);
  c.m.potential.max_depth = get<int>(po, "max_depth", pp);
  c.m.potential.panel_order = get<int>(po, "panel_order", pp);

  const json& sa = m["sampler"];
  const std::string sp = mp + "/sampler";
  c.m.sampler.sigma_tube = get<double>(sa, "sigma_tube", sp);
  c.m.sampler.tube_weight = get<double>(sa, "tube_weight", sp);
  c.m.sampler.broad_scale = get<double>(sa, "broad_scale", sp);
  c.m.sampler.close_weight = get<double>(sa, "close_weight", sp);
  c.m.sampler.close_sigma = get<double>(sa, "close_sigma", sp);
  c.m.sampler.split_radius = get<double>(sa, "split_radius", sp);
  c.m.sampler.pair_batch = get<std::uint32_t>(sa, "pair_batch", sp);
  c.m.sampler.close_points = get<std::uint32_t>(sa, "close_points", sp);
  c.m.sampler.validate();

  const json& fl = j["fieldlines"];
  const std::string fp2 = "/fieldlines";
  c.linking.checkpoints = get<int>(fl, "checkpoints", fp2);
  c.linking.points_per_transit = get<int>(fl, "points_per_transit", fp2);
  c.linking.trace.tol = get<double>(fl, "trace_tol", fp2);
  c.linking.trace.closure_rel = get<double>(fl, "closure_rel", fp2);
  c.linking.trace.boundary_slack = get<double>(fl, "boundary_slack", fp2);
  c.ergodic.line.max_transits = get<int>(fl, "max_transits", fp2);
  c.ergodic.line.tol = get<double>(fl, "line_tol", fp2);
  c.ergodic.line.closure_rel = c.linking.trace.closure_rel;
  c.ergodic.line.fit_tol = get<double>(fl, "fit_tol", fp2);
  c.ergodic.line.max_order = get<int>(fl, "max_fit_order", fp2);
  c.ergodic.n_triples = get<int>(fl, "n_triples", fp2);
  c.ergodic.period_weighted = get<bool>(fl, "period_weighted", fp2);
  c.ergodic.max_skip_fraction = get<double>(fl, "max_skip_fraction", fp2);

  const json& t = j["tolerances"];
  const std::string tp = "/tolerances";
  c.tol.lk_integer = get<double>(t, "lk_integer", tp);
  c.tol.lk_seconds = get<double>(t, "lk_seconds", tp);
  c.tol.circulation_factor = get<double>(t, "circulation_factor", tp);
  c.tol.period = get<double>(t, "period", tp);
  c.tol.mean_zero = get<double>(t, "mean_zero", tp);
  c.tol.gauge_average = get<double>(t, "gauge_average", tp);
  c.tol.exact_zero = get<double>(t, "exact_zero", tp);
  c.tol.sigmas = get<double>(t, "sigmas", tp);
  c.tol.asymptotic_rel = get<double>(t, "asymptotic_rel", tp);
  c.tol.closed_form_required = get<int>(t, "closed_form_required", tp);
  c.tol.quick_seconds = get<double>(t, "quick_seconds", tp);
  c.tol.full_seconds = get<double>(t, "full_seconds", tp);

  const json& s = j["suite"];
  const std::string ssp = "/suite";
  c.suite.witness = get<std::string>(s, "witness", ssp);
  c.suite.separation_pair = get<std::vector<std::string>>(s, "separation_pair", ssp);
  if (c.suite.separation_pair.size() != 2) throw SchemaError(ssp + "/separation_pair: expected two preset names");
  c.suite.family_members = get<int>(s, "family_members", ssp);
  c.suite.isotopy_amplitude = get<double>(s, "isotopy_amplitude", ssp);
  c.suite.family_pair_budget = get<std::uint64_t>(s, "family_pair_budget", ssp);
  c.suite.witness_pair_budget = get<std::uint64_t>(s, "witness_pair_budget", ssp);
  c.suite.zero_check_budget = get<std::uint64_t>(s, "zero_check_budget", ssp);
  c.suite.tube_radius = get<double>(s, "tube_radius", ssp);
  c.suite.ergodic_triples = get<int>(s, "ergodic_triples", ssp);
  c.suite.linking_T = get<double>(s, "linking_T", ssp);
  c.suite.linking_rotation = get<double>(s, "linking_rotation", ssp);
  c.suite.worker_counts = get<std::vector<int>>(s, "worker_counts", ssp);
  c.suite.closed_form_budget = get<std::uint64_t>(s, "closed_form_budget", ssp);
}

}  // namespace

json to_json(const Config& c) {
  json j;
  j["level"] = to_string(c.level);
  j["seed"] = c.m.seed;
  j["m"] = {
      {"short_circuit", c.m.short_circuit},
      {"b_factor", c.m.b_factor},
      {"f_prefactor", c.m.f_triple_prefactor ? "triple" : "none"},
      {"gauge_measure", measure_name(c.m.gauge_measure)},
      {"phi_grid", c.m.phi_grid},
      {"curve_nodes", c.m.curve_nodes},
      {"self_nodes", c.m.self_nodes},
      {"linking_tol", c.m.linking_tol},
      {"volume_budget", c.m.volume_budget},
      {"pair_budget", c.m.pair_budget},
      {"target_rel_std_error", c.m.target_rel_std_error},
      {"block_size", c.m.block_size},
      {"diagonal_terms", c.m.diagonal_terms},
      {"potential",
       {{"kernel", kernel_name(c.m.potential.kernel)},
        {"nodes", c.m.potential.nodes},
        {"min_nodes", c.m.potential.min_nodes},
        {"near_factor", c.m.potential.near_factor},
        {"near_floor", c.m.potential.near_floor},
        {"max_depth", c.m.potential.max_depth},
        {"panel_order", c.m.potential.panel_order}}},
      {"sampler",
       {{"sigma_tube", c.m.sampler.sigma_tube},
        {"tube_weight", c.m.sampler.tube_weight},
        {"broad_scale", c.m.sampler.broad_scale},
        {"close_weight", c.m.sampler.close_weight},
        {"close_sigma", c.m.sampler.close_sigma},
        {"split_radius", c.m.sampler.split_radius},
        {"pair_batch", c.m.sampler.pair_batch},
        {"close_points", c.m.sampler.close_points}}}};
  j["fieldlines"] = {{"checkpoints", c.linking.checkpoints},
                     {"points_per_transit", c.linking.points_per_transit},
                     {"trace_tol", c.linking.trace.tol},
                     {"closure_rel", c.linking.trace.closure_rel},
                     {"boundary_slack", c.linking.trace.boundary_slack},
                     {"max_transits", c.ergodic.line.max_transits},
                     {"line_tol", c.ergodic.line.tol},
                     {"fit_tol", c.ergodic.line.fit_tol},
                     {"max_fit_order", c.ergodic.line.max_order},
                     {"n_triples", c.ergodic.n_triples},
                     {"period_weighted", c.ergodic.period_weighted},
                     {"max_skip_fraction", c.ergodic.max_skip_fraction}};
  j["tolerances"] = {{"lk_integer", c.tol.lk_integer},
                     {"lk_seconds", c.tol.lk_seconds},
                     {"circulation_factor", c.tol.circulation_factor},
                     {"period", c.tol.period},
                     {"mean_zero", c.tol.mean_zero},
                     {"gauge_average", c.tol.gauge_average},
                     {"exact_zero", c.tol.exact_zero},
                     {"sigmas", c.tol.sigmas},
                     {"asymptotic_rel", c.tol.asymptotic_rel},
                     {"closed_form_required", c.tol.closed_form_required},
                     {"quick_seconds", c.tol.quick_seconds},
                     {"full_seconds", c.tol.full_seconds}};
  j["suite"] = {{"witness", c.suite.witness},
                {"separation_pair", c.suite.separation_pair},
                {"family_members", c.suite.family_members},
                {"isotopy_amplitude", c.suite.isotopy_amplitude},
                {"family_pair_budget", c.suite.family_pair_budget},
                {"witness_pair_budget", c.suite.witness_pair_budget},
                {"zero_check_budget", c.suite.zero_check_budget},
                {"tube_radius", c.suite.tube_radius},
                {"ergodic_triples", c.suite.ergodic_triples},
                {"linking_T", c.suite.linking_T},
                {"linking_rotation", c.suite.linking_rotation},
                {"worker_counts", c.suite.worker_counts},
                {"closed_form_budget", c.suite.closed_form_budget}};
  return j;
}

void apply_config(Config& cfg, const json& j) {
  json base = to_json(cfg);
  check_shape(base, j, "");
  // A level in the file selects that level's defaults before the other keys apply.
  if (j.contains("level")) {
    const std::string name = j["level"].get<std::string>();
    if (name != "quick" && name != "full") throw SchemaError("/level: expected \"quick\" or \"full\"");
    const Level lv = parse_level(name);
    if (lv != cfg.level) {
      Config fresh = default_config(lv);
      apply_seed(fresh, cfg.m.seed);
      base = to_json(fresh);
    }
  }
  base.merge_patch(j);
  Config out;
  from_json(base, out);
  cfg = out;
}

Config load_config(const std::string& path, Level level) {
  Config cfg = default_config(level);
  apply_config(cfg, parse_json_text(read_text_file(path), path));
  return cfg;
}

}  // namespace linkm
