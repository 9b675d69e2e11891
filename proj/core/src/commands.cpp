#include "linkm/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "linkm/curves_io.hpp"
#include "linkm/errors.hpp"
#include "linkm/linking.hpp"
#include "linkm/terms.hpp"

namespace linkm {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

const char* kPairNames[3] = {"12", "23", "31"};

Report new_report(const std::string& command, const json& input, const Config& cfg) {
  Report r;
  r.command = command;
  r.input = input;
  r.config = to_json(cfg);
  r.seeds = {{"seed", cfg.m.seed}};
  return r;
}

}  // namespace

LinkInput link_input_preset(const std::string& name) {
  const Preset p = parse_preset(name);
  Link3 link = make_preset(p);
  json echo = {{"preset", to_string(p)}, {"link", to_json(link)}};
  return {std::move(link), std::move(echo)};
}

LinkInput link_input_file(const std::string& path) {
  Link3 link = read_link_file(path);
  json echo = {{"link_file", path}, {"link", to_json(link)}};
  return {std::move(link), std::move(echo)};
}

FieldInput field_input_file(const std::string& path) {
  FieldSystem f = read_field_file(path);
  json echo = {{"field_file", path}, {"field", to_json(f)}};
  return {std::move(f), std::move(echo), std::nullopt};
}

FieldInput field_input_preset(const std::string& name, double radius, double rotation) {
  const Preset p = parse_preset(name);
  Link3 link = make_preset(p);
  FieldSystem f = rotation == 0.0 ? transit_field(link, radius) : twisted_field(link, radius, rotation);
  json echo = {{"preset", to_string(p)}, {"tube_radius", radius}, {"rotation", rotation}, {"field", to_json(f)}};
  std::optional<Link3> central;
  if (rotation == 0.0) central = link;
  return {std::move(f), std::move(echo), std::move(central)};
}

Report cmd_lk(const LinkInput& in, const Config& cfg) {
  Report r = new_report("lk", in.echo, cfg);
  const CurveSet curves = in.link.curves();
  json gauss = json::array(), err = json::array(), cross = json::array();
  std::array<std::array<double, 3>, 3> g{}, e{};
  std::array<std::array<int, 3>, 3> c{};
  for (int k = 0; k < 3; ++k) {
    const int i = k, j = (k + 1) % 3;
    const auto t0 = Clock::now();
    const Estimate est = gauss_linking(*curves[static_cast<std::size_t>(i)], *curves[static_cast<std::size_t>(j)],
                                       cfg.m.linking_tol);
    const int cs = crossing_sign_linking(*curves[static_cast<std::size_t>(i)], *curves[static_cast<std::size_t>(j)]);
    const double secs = seconds_since(t0);
    const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
    g[ui][uj] = g[uj][ui] = est.value;
    e[ui][uj] = e[uj][ui] = est.std_error;
    c[ui][uj] = c[uj][ui] = cs;
    r.converged = r.converged && est.converged;
    const std::string name = std::string("lk") + kPairNames[k];
    r.timing[name] = secs;
    r.add(make_check(1, name + " |gauss - crossing|", std::abs(est.value - cs), "<", cfg.tol.lk_integer));
    r.add(timed_check(1, name + " seconds", secs, cfg.tol.lk_seconds));
  }
  for (std::size_t i = 0; i < 3; ++i) {
    gauss.push_back(g[i]);
    err.push_back(e[i]);
    cross.push_back(c[i]);
  }
  r.results["linking_matrix"] = {{"lk", cross}, {"gauss", gauss}, {"gauss_error", err}, {"crossing", cross}};
  return r;
}

Report cmd_m(const LinkInput& in, const Config& cfg) {
  Report r = new_report("m", in.echo, cfg);
  const TermBreakdown tb = assemble_M(in.link, cfg.m);
  r.results["M"] = {{"value", tb.M.value}, {"std_error", tb.M.std_error}};
  r.results["terms"] = to_json(tb);
  for (const auto& [k, v] : tb.wall_seconds) r.timing["terms." + k] = v;
  r.converged = tb.converged;
  for (int k = 0; k < 3; ++k) {
    const auto i = static_cast<std::size_t>(k), j = static_cast<std::size_t>((k + 1) % 3);
    r.add(make_check(1, std::string("lk") + kPairNames[k] + " integer residual",
                     std::abs(tb.lk_raw[i][j] - tb.lk[i][j]), "<", cfg.tol.lk_integer));
  }
  for (std::size_t i = 0; i < 3; ++i)
    r.add(info_check(6, "c" + std::to_string(i + 1) + std::to_string(i + 1) + " + d" + std::to_string(i + 1) +
                            std::to_string(i + 1),
                     tb.cd_diagonal[i].value, "not part of M"));
  if (tb.M.bias_warning) r.add(info_check(0, "singular exclusions", static_cast<double>(tb.M.n_excluded_singular),
                                          "more than 0.1% of samples excluded"));
  return r;
}

Report cmd_trace(const FieldInput& in, const TraceParams& params, const Config& cfg, CesaroEstimate* series) {
  Report r = new_report("trace", in.echo, cfg);
  r.input["T"] = params.T;
  r.input["pair"] = {params.pair[0] + 1, params.pair[1] + 1};
  r.input["offset"] = {params.offset_u, params.offset_v};
  const FieldSystem& f = in.field;
  const int a = params.pair[0], b = params.pair[1];
  if (f.size() >= 2 && (a == b || a < 0 || b < 0 || a >= f.size() || b >= f.size()))
    throw ValidationError("trace: pair must name two distinct tubes of the field");
  std::vector<Vec3> starts;
  const auto t0 = Clock::now();
  for (int t = 0; t < f.size(); ++t) {
    const double a = f.tube(t).radius;
    const Vec3 x0 = f.position({t, 0.0, params.offset_u * a, params.offset_v * a});
    starts.push_back(x0);
    const TraceResult tr = trace(f, x0, params.T, cfg.linking.trace);
    json tj = {{"tube", t + 1},
               {"start", {x0.x, x0.y, x0.z}},
               {"closed", tr.closed},
               {"period", tr.period},
               {"transits", tr.transits},
               {"closure_error", tr.closure_error},
               {"section_returns", tr.returns.size()},
               {"max_stream_drift", tr.max_stream_drift}};
    r.results["trajectories"].push_back(std::move(tj));
    r.add(info_check(0, "tube " + std::to_string(t + 1) + " stream drift", tr.max_stream_drift));
  }
  r.timing["trace"] = seconds_since(t0);
  if (f.size() < 2) return r;
  const auto t1 = Clock::now();
  const CesaroEstimate ce = asymptotic_linking(f, starts[static_cast<std::size_t>(a)],
                                               starts[static_cast<std::size_t>(b)], params.T, cfg.linking);
  r.timing["asymptotic_linking"] = seconds_since(t1);
  r.results["asymptotic_linking"] = to_json(ce);
  const double last = ce.values.back();
  const double nearest = std::round(last);
  r.results["asymptotic_linking"]["nearest_integer"] = nearest;
  if (nearest != 0.0)
    r.add(info_check(10, "relative distance to nearest integer", std::abs(last - nearest) / std::abs(nearest)));
  else
    r.add(info_check(10, "distance to zero", std::abs(last)));
  if (series) *series = ce;
  return r;
}

Report cmd_ergodic(const FieldInput& in, const Config& cfg) {
  Report r = new_report("ergodic", in.echo, cfg);
  ErgodicOptions eo = cfg.ergodic;
  eo.m = cfg.m;
  eo.seed = cfg.m.seed;
  const auto t0 = Clock::now();
  const ErgodicResult er = ergodic_M(in.field, eo);
  r.timing["ergodic"] = seconds_since(t0);
  r.results["ergodic"] = to_json(er);
  r.converged = er.M.converged;
  r.add(info_check(10, "skipped triples", static_cast<double>(er.skipped)));
  if (in.central) {
    const auto t1 = Clock::now();
    const TermBreakdown tb = assemble_M(*in.central, cfg.m);
    r.timing["central"] = seconds_since(t1);
    r.results["central_M"] = to_json(tb.M);
    r.converged = r.converged && tb.converged;
    const double se = std::hypot(er.M.std_error, tb.M.std_error);
    const double d = std::abs(er.M.value - tb.M.value);
    Check c = make_check(10, "|ergodic M - central M|", d, "<=", cfg.tol.sigmas * se,
                         "tolerance is sigmas x combined stderr");
    c.data = {{"combined_std_error", se}};
    r.add(std::move(c));
  }
  return r;
}

std::string checkpoints_csv(const CesaroEstimate& c) {
  std::string out = "T,value\n";
  char buf[64];
  for (std::size_t k = 0; k < c.checkpoints.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", c.checkpoints[k], c.values[k]);
    out += buf;
  }
  return out;
}

}  // namespace linkm
