#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>

#include "linkm/commands.hpp"
#include "linkm/errors.hpp"
#include "linkm/gauge.hpp"
#include "linkm/linking.hpp"
#include "linkm/parallel.hpp"
#include "linkm/proposal.hpp"
#include "linkm/quadrature.hpp"
#include "linkm/rng.hpp"
#include "linkm/terms.hpp"

namespace linkm {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

constexpr double kEps = std::numeric_limits<double>::epsilon();

std::uint64_t derive_seed(std::uint64_t seed, const std::string& label, std::uint64_t k = 0) {
  return splitmix64(seed ^ (stream_id(label) + 0x9e3779b97f4a7c15ULL * (k + 1)));
}

double combined(const Estimate& a, const Estimate& b) { return std::hypot(a.std_error, b.std_error); }

Config with_budget(const Config& cfg, std::uint64_t budget) {
  Config c = cfg;
  apply_budget(c, budget);
  return c;
}

MOptions seeded(const MOptions& m, std::uint64_t seed) {
  MOptions o = m;
  o.seed = seed;
  return o;
}

json estimate_json(const Estimate& e) { return {{"value", e.value}, {"std_error", e.std_error}}; }

void absorb(Report& into, Report&& from, const std::string& prefix) {
  for (auto& c : from.checks) {
    c.name = prefix + ": " + c.name;
    into.add(std::move(c));
  }
  for (const auto& [k, v] : from.timing) into.timing[prefix + "." + k] = v;
  into.converged = into.converged && from.converged;
}

// ---- criteria 1 to 4: deterministic curve quantities on every preset ----

void integer_linking(const Config& cfg, Report& r) {
  for (const auto& p : all_presets()) {
    const std::string name = to_string(p);
    Report lr = cmd_lk(link_input_preset(name), cfg);
    r.results["C1"][name] = lr.results["linking_matrix"];
    absorb(r, std::move(lr), name);
  }
}

void circulation(const Config& cfg, Report& r) {
  for (const auto& p : all_presets()) {
    const std::string name = to_string(p);
    const Link3 link = make_preset(p);
    const CurveSet curves = link.curves();
    const LinkingMatrix lm = linking_matrix(link, cfg.m.linking_tol);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        if (i == j || lm(i, j) == 0) continue;
        const MultivaluedPotential mv = build_multivalued(curves, i, j, cfg.m.phi_grid, cfg.m.potential);
        const auto& g = mv.derivative;
        const double n = static_cast<double>(g.size());
        double half = 0.0, l1 = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) {
          if (k % 2 == 0) half += g[k];
          l1 += std::abs(g[k]);
        }
        half *= kTwoPi / (0.5 * n);
        l1 *= kTwoPi / n;
        const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
        const double gauss = lm.raw[ui][uj];
        // Grid-halving difference of each route plus a rounding floor on the sums.
        const double quad_error = std::abs(mv.period_increment - half) + lm.error[ui][uj] +
                                  64.0 * kEps * (l1 + std::max(1.0, std::abs(gauss)));
        Check c = make_check(2, name + ": circulation A" + std::to_string(j + 1) + " on L" + std::to_string(i + 1),
                             std::abs(mv.period_increment - gauss), "<=",
                             cfg.tol.circulation_factor * quad_error,
                             "tolerance is circulation_factor x quadrature error");
        c.data = {{"circulation", mv.period_increment}, {"gauss", gauss}, {"quadrature_error", quad_error}};
        r.add(std::move(c));
      }
  }
}

void periodicity_and_gauges(const Config& cfg, Report& r) {
  const std::array<double, 5> probes{0.0, 0.37, 1.9, 3.3, 5.71};
  for (const auto& p : all_presets()) {
    const std::string name = to_string(p);
    const Link3 link = make_preset(p);
    const CurveSet curves = link.curves();
    const LinkingMatrix lm = linking_matrix(link, cfg.m.linking_tol);
    for (int i = 0; i < 3; ++i) {
      const int i1 = (i + 1) % 3, i2 = (i + 2) % 3;
      const MultivaluedPotential u = build_multivalued(curves, i, i1, cfg.m.phi_grid, cfg.m.potential);
      const MultivaluedPotential v = build_multivalued(curves, i, i2, cfg.m.phi_grid, cfg.m.potential);
      for (const auto* mv : {&u, &v}) {
        double worst = 0.0;
        for (double t : probes) worst = std::max(worst, std::abs((*mv)(t + kTwoPi) - (*mv)(t) - lm(i, mv->j)));
        r.add(make_check(3, name + ": period of phi" + std::to_string(mv->j + 1) + "," + std::to_string(i + 1),
                         worst, "<", cfg.tol.period));
      }

      const std::string phi_name = name + ": phi" + std::to_string(i + 1);
      const ScalarPotentialTable mz = combine_phi(curves, lm, i, u, v, GaugeKind::MeanZero, cfg.m.gauge_measure);
      const std::size_t n = mz.grid();
      const auto w = measure_weights(*curves[static_cast<std::size_t>(i)], n, cfg.m.gauge_measure);
      double mean = 0.0;
      for (std::size_t k = 0; k < n; ++k) mean += w[k] * mz.phi.values()[k];
      r.add(make_check(3, phi_name + " mean in the zero-mean gauge", std::abs(mean), "<", cfg.tol.mean_zero));

      // Average of the marked-point gauges over all marked points, on the grid and off it.
      std::vector<double> avg(n, 0.0);
      std::array<double, probes.size()> avg_probe{};
      for (std::size_t m = 0; m < n; ++m) {
        const double t0 = kTwoPi * static_cast<double>(m) / static_cast<double>(n);
        const ScalarPotentialTable pt =
            combine_phi(curves, lm, i, u, v, GaugeKind::MarkedPoint, cfg.m.gauge_measure, t0);
        for (std::size_t k = 0; k < n; ++k) avg[k] += w[m] * pt.phi.values()[k];
        for (std::size_t q = 0; q < probes.size(); ++q) avg_probe[q] += w[m] * pt(probes[q] + 0.013);
      }
      double worst = 0.0;
      for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(avg[k] - mz.phi.values()[k]));
      for (std::size_t q = 0; q < probes.size(); ++q)
        worst = std::max(worst, std::abs(avg_probe[q] - mz(probes[q] + 0.013)));
      r.add(make_check(4, phi_name + " marked-point average vs zero-mean gauge", worst, "<",
                       cfg.tol.gauge_average));
    }
  }
}

// ---- criteria 5 to 9: M ----

void exact_zeros(const Config& cfg, Report& r) {
  for (const char* name : {"unlink_separated", "borromean"}) {
    const Link3 link = make_preset(name);
    const TermBreakdown on = assemble_M(link, cfg.m);
    r.add(make_check(5, std::string(name) + ": |M| + stderr with short-circuit", std::abs(on.M.value) + on.M.std_error,
                     "<=", 0.0, "exact zero"));

    Config off = with_budget(cfg, cfg.suite.zero_check_budget);
    off.m.short_circuit = false;
    const TermBreakdown tb = assemble_M(link, off.m);
    Check c = make_check(5, std::string(name) + ": |M| without short-circuit", std::abs(tb.M.value), "<",
                         cfg.tol.exact_zero);
    c.data = {{"M", estimate_json(tb.M)}};
    r.add(std::move(c));
    r.results["C5"][name] = {{"short_circuit", estimate_json(on.M)}, {"numerical", estimate_json(tb.M)}};
    r.converged = r.converged && tb.converged;
  }
}

void diagonal_identity(const Config& cfg, Report& r) {
  for (const std::string& name : {std::string("hopf_plus_far_circle"), cfg.suite.witness}) {
    const bool primary = name == "hopf_plus_far_circle";
    TermEvaluator ev(make_preset(name), cfg.m);
    for (int i = 0; i < 3; ++i) {
      const Term c = ev.term_c(i), d = ev.term_d(i);
      const Estimate sum = sum_independent({c.value, d.value});
      const std::string label = name + ": c" + std::to_string(i + 1) + std::to_string(i + 1) + " + d" +
                                std::to_string(i + 1) + std::to_string(i + 1);
      Check ch = primary ? make_check(6, label, std::abs(sum.value), "<=", cfg.tol.sigmas * sum.std_error,
                                      "tolerance is sigmas x combined stderr")
                         : info_check(6, label, sum.value, "diagonal terms are not summed into M");
      ch.data = {{"c", estimate_json(c.value)},
                 {"d", estimate_json(d.value)},
                 {"c_integral", estimate_json(c.integral)},
                 {"d_integral", estimate_json(d.integral)}};
      r.add(std::move(ch));
    }
  }
}

struct MCache {
  std::map<std::string, TermBreakdown> runs;
};

const TermBreakdown& witness_run(const Config& cfg, MCache& cache, const std::string& key, const Link3& link,
                                 std::uint64_t seed) {
  auto it = cache.runs.find(key);
  if (it == cache.runs.end()) {
    const Config wc = with_budget(cfg, cfg.suite.witness_pair_budget);
    it = cache.runs.emplace(key, assemble_M(link, seeded(wc.m, seed))).first;
  }
  return it->second;
}

void mirror(const Config& cfg, Report& r, MCache& cache) {
  const std::string& name = cfg.suite.witness;
  const Link3 link = make_preset(name);
  const TermBreakdown& a = witness_run(cfg, cache, name, link, cfg.m.seed);
  const TermBreakdown& b =
      witness_run(cfg, cache, name + "/mirror", transform(link, RigidMotion::mirror_z()), derive_seed(cfg.m.seed, "mirror"));
  r.converged = r.converged && a.converged && b.converged;
  r.add(make_check(7, name + ": |M| / stderr", std::abs(a.M.value) / a.M.std_error, ">", cfg.tol.sigmas,
                   "witness must be distinguishable from 0"));
  const double se = combined(a.M, b.M);
  Check c = make_check(7, name + ": |M + M(mirror)|", std::abs(a.M.value + b.M.value), "<=", cfg.tol.sigmas * se,
                       "tolerance is sigmas x combined stderr");
  c.data = {{"M", estimate_json(a.M)}, {"M_mirror", estimate_json(b.M)}};
  r.add(std::move(c));
  r.results["C7"] = {{"witness", name}, {"M", estimate_json(a.M)}, {"M_mirror", estimate_json(b.M)}};
}

RigidMotion random_motion(CounterRng& rng, double scale) {
  // Uniform rotation from a normalized Gaussian quaternion.
  double q[4];
  double s = 0.0;
  for (double& x : q) {
    x = rng.normal();
    s += x * x;
  }
  s = std::sqrt(s);
  const double w = q[0] / s, x = q[1] / s, y = q[2] / s, z = q[3] / s;
  Mat3 R{{1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
          2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
          2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}};
  return {R, {2.0 * rng.normal(), 2.0 * rng.normal(), 2.0 * rng.normal()}, scale};
}

void family_check(const Config& cfg, Report& r, const std::string& family, const std::vector<Estimate>& ms,
                  const std::vector<bool>& converged) {
  double worst = 0.0;
  json values = json::array();
  for (std::size_t a = 0; a < ms.size(); ++a) {
    values.push_back(estimate_json(ms[a]));
    r.converged = r.converged && converged[a];
    for (std::size_t b = a + 1; b < ms.size(); ++b)
      worst = std::max(worst, std::abs(ms[a].value - ms[b].value) / combined(ms[a], ms[b]));
  }
  Check c = make_check(8, cfg.suite.witness + ": " + family + " family max |dM| / combined stderr", worst, "<=",
                       cfg.tol.sigmas);
  c.data = {{"members", values}};
  r.add(std::move(c));
  r.results["C8"][family] = values;
}

void invariance(const Config& cfg, Report& r) {
  const Config fc = with_budget(cfg, cfg.suite.family_pair_budget);
  const Link3 link = make_preset(cfg.suite.witness);
  const int n = cfg.suite.family_members;
  auto run = [&](const std::string& family, int k, const auto& target, std::vector<Estimate>& ms,
                 std::vector<bool>& conv) {
    const TermBreakdown tb = assemble_M(target, seeded(fc.m, derive_seed(cfg.m.seed, family, static_cast<std::uint64_t>(k))));
    ms.push_back(tb.M);
    conv.push_back(tb.converged);
  };

  {
    std::vector<Estimate> ms;
    std::vector<bool> conv;
    const auto fam = isotopy_family(link, derive_seed(cfg.m.seed, "isotopy"),
                                    cfg.suite.isotopy_amplitude * 0.25 * link.min_separation(), n);
    for (int k = 0; k < n; ++k) run("isotopy", k, fam[static_cast<std::size_t>(k)], ms, conv);
    family_check(cfg, r, "isotopy", ms, conv);
  }
  {
    std::vector<Estimate> ms;
    std::vector<bool> conv;
    const CurveSet base = link.curves();
    for (int k = 0; k < n; ++k) {
      CurveSet cs;
      for (std::size_t c = 0; c < 3; ++c) {
        CounterRng rng(cfg.m.seed, stream_id("reparametrization"), static_cast<std::uint64_t>(3 * k) + c);
        const double shift = kTwoPi * rng.uniform();
        std::vector<double> a(2), b(2);
        for (int m = 0; m < 2; ++m) {
          a[static_cast<std::size_t>(m)] = 0.3 * (rng.uniform() - 0.5);
          b[static_cast<std::size_t>(m)] = 0.3 * (rng.uniform() - 0.5);
        }
        cs[c] = reparametrize(base[c], shift, SpeedProfile(a, b));
      }
      run("reparametrization", k, cs, ms, conv);
    }
    family_check(cfg, r, "reparametrization", ms, conv);
  }
  {
    std::vector<Estimate> ms;
    std::vector<bool> conv;
    for (int k = 0; k < n; ++k) {
      CounterRng rng(cfg.m.seed, stream_id("rigid"), static_cast<std::uint64_t>(k));
      run("rigid", k, transform(link, random_motion(rng, 1.0)), ms, conv);
    }
    family_check(cfg, r, "rigid", ms, conv);
  }
  {
    std::vector<Estimate> ms;
    std::vector<bool> conv;
    for (int k = 0; k < n; ++k) {
      const double scale = std::pow(2.0, -1.0 + 2.0 * k / std::max(1, n - 1));
      run("scale", k, transform(link, RigidMotion{Mat3::identity(), {}, scale}), ms, conv);
    }
    family_check(cfg, r, "scale", ms, conv);
  }
}

void separation(const Config& cfg, Report& r, MCache& cache) {
  const auto& pair = cfg.suite.separation_pair;
  std::array<const TermBreakdown*, 2> tb{};
  for (std::size_t k = 0; k < 2; ++k) {
    const std::string& name = pair[k];
    const std::uint64_t seed = name == cfg.suite.witness ? cfg.m.seed : derive_seed(cfg.m.seed, "separation", k);
    tb[k] = &witness_run(cfg, cache, name, make_preset(name), seed);
    r.converged = r.converged && tb[k]->converged;
  }
  int differ = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      differ += tb[0]->lk[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] !=
                tb[1]->lk[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  const std::string label = pair[0] + " vs " + pair[1];
  r.add(make_check(9, label + ": differing lk entries", differ, "<=", 0.0));
  const double z = std::abs(tb[0]->M.value - tb[1]->M.value) / combined(tb[0]->M, tb[1]->M);
  Check c = make_check(9, label + ": |dM| / combined stderr", z, ">", cfg.tol.sigmas);
  if (c.failed() && cfg.level == Level::Quick) {
    c.status = CheckStatus::Info;
    c.detail = "not separated at the quick budget; the full level decides";
  }
  c.data = {{"M", {estimate_json(tb[0]->M), estimate_json(tb[1]->M)}}};
  r.add(std::move(c));
  r.results["C9"] = {{pair[0], estimate_json(tb[0]->M)}, {pair[1], estimate_json(tb[1]->M)}};
}

// ---- criterion 10: field lines ----

void ergodic(const Config& cfg, Report& r) {
  Config ec = cfg;
  ec.ergodic.n_triples = cfg.suite.ergodic_triples;
  r.add(make_check(10, "ergodic triples", ec.ergodic.n_triples, "<=", 32.0));
  {
    Report er = cmd_ergodic(field_input_preset("hopf_plus_far_circle", cfg.suite.tube_radius, 0.0), ec);
    r.results["C10"]["ergodic"] = {{"ergodic", er.results["ergodic"]["M"]}, {"central", er.results["central_M"]}};
    absorb(r, std::move(er), "hopf_plus_far_circle transit tubes");
  }
  {
    const Link3 hopf = make_preset("hopf_plus_far_circle");
    const int lk = linking_matrix(hopf, cfg.m.linking_tol)(0, 1);
    FieldInput in{twisted_field(hopf, cfg.suite.tube_radius, cfg.suite.linking_rotation), json::object(), std::nullopt};
    TraceParams tp;
    tp.T = cfg.suite.linking_T;
    CesaroEstimate ce;
    Report tr = cmd_trace(in, tp, cfg, &ce);
    const double last = ce.values.back();
    Check c = make_check(10, "hopf_plus_far_circle twisted tubes: asymptotic linking relative error",
                         std::abs(last - lk) / std::abs(lk), "<=", cfg.tol.asymptotic_rel,
                         "at the largest checkpoint");
    c.data = {{"values", ce.values}, {"checkpoints", ce.checkpoints}, {"limit", ce.limit}, {"lk", lk}};
    r.add(std::move(c));
    r.results["C10"]["asymptotic_linking"] = to_json(ce);
    for (const auto& [k, v] : tr.timing) r.timing["twisted." + k] = v;
  }
  if (cfg.level == Level::Full) {
    // Thin transit tubes around the witness, where M is not zero.
    const Link3 link = make_preset(cfg.suite.witness);
    const double radius = std::min(cfg.suite.tube_radius, 0.1 * link.min_separation());
    FieldInput in{transit_field(link, radius), json::object(), link};
    Report er = cmd_ergodic(in, ec);
    r.results["C10"]["witness_ergodic"] = {{"ergodic", er.results["ergodic"]["M"]},
                                           {"central", er.results["central_M"]},
                                           {"tube_radius", radius}};
    absorb(r, std::move(er), cfg.suite.witness + " transit tubes");
  }
}

// ---- criterion 11: the Monte Carlo engine itself ----

class ProfileProposal final : public Proposal {
 public:
  explicit ProfileProposal(double sigma) : profile_{sigma} {}
  Vec3 sample(CounterRng& rng) const override { return profile_.sample_offset(rng); }
  double density(const Vec3& x) const override { return profile_.density(norm2(x)); }

 private:
  RadialProfile profile_;
};

struct ClosedForm {
  std::string name;
  double exact;
  Estimate estimate;
};

McOptions battery_options(const std::string& name, std::uint64_t budget, std::uint64_t seed) {
  McOptions o;
  o.budget = budget;
  o.min_samples = budget;
  o.seed = derive_seed(seed, name);
  o.stream = name;
  return o;
}

std::vector<ClosedForm> closed_form_battery(std::uint64_t budget, std::uint64_t seed) {
  std::vector<ClosedForm> out;
  auto cube = [&](const std::string& name, int dim, double exact, std::function<double(const double*)> f) {
    const auto est = mc_run(
        1,
        [&](CounterRng& rng, std::span<double> o) {
          double x[8];
          for (int d = 0; d < dim; ++d) x[d] = rng.uniform();
          o[0] = f(x);
          return true;
        },
        battery_options(name, budget, seed));
    out.push_back({name, exact, est.component(0)});
  };
  cube("x^2 on [0,1]", 1, 1.0 / 3.0, [](const double* x) { return x[0] * x[0]; });
  cube("sin(pi x) sin(pi y) on [0,1]^2", 2, 4.0 / (kPi * kPi),
       [](const double* x) { return std::sin(kPi * x[0]) * std::sin(kPi * x[1]); });
  cube("exp(x+y+z) on [0,1]^3", 3, std::pow(std::exp(1.0) - 1.0, 3),
       [](const double* x) { return std::exp(x[0] + x[1] + x[2]); });
  cube("|x|^2 on [0,1]^5", 5, 5.0 / 3.0, [](const double* x) {
    double s = 0.0;
    for (int d = 0; d < 5; ++d) s += x[d] * x[d];
    return s;
  });
  cube("x^(-1/4) on [0,1]", 1, 4.0 / 3.0, [](const double* x) { return std::pow(x[0], -0.25); });
  cube("cos(2 pi x) on [0,1]", 1, 0.0, [](const double* x) { return std::cos(kTwoPi * x[0]); });
  cube("1/(1+xy) on [0,1]^2", 2, kPi * kPi / 12.0, [](const double* x) { return 1.0 / (1.0 + x[0] * x[1]); });
  cube("log x on [0,1]", 1, -1.0, [](const double* x) { return std::log(x[0]); });
  cube("|x-y| on [0,1]^2", 2, 1.0 / 3.0, [](const double* x) { return std::abs(x[0] - x[1]); });
  {
    const auto est = mc_run(
        1,
        [](CounterRng& rng, std::span<double> o) {
          o[0] = std::abs(rng.normal());
          return true;
        },
        battery_options("E|Z|", budget, seed));
    out.push_back({"E|Z|", std::sqrt(2.0 / kPi), est.component(0)});
  }

  const ProfileProposal prop(1.0);
  auto volume = [&](const std::string& name, double exact, std::function<double(const Vec3&)> f) {
    out.push_back({name, exact, mc_volume(f, prop, battery_options(name, budget, seed))});
  };
  const double pi32 = std::pow(kPi, 1.5);
  volume("exp(-r^2) on R^3", pi32, [](const Vec3& x) { return std::exp(-norm2(x)); });
  volume("(1+r^2)^-3 on R^3", kPi * kPi / 4.0, [](const Vec3& x) { return std::pow(1.0 + norm2(x), -3); });
  volume("exp(-r) on R^3", 8.0 * kPi, [](const Vec3& x) { return std::exp(-norm(x)); });
  {
    // The production proposal must integrate to one.
    const Link3 link = make_preset("hopf_plus_far_circle");
    const CurveSet cs = link.curves();
    std::array<std::unique_ptr<CurveSource>, 3> src;
    for (std::size_t i = 0; i < 3; ++i) src[i] = std::make_unique<CurveSource>(cs[i]);
    const LinkProposal lp({src[0].get(), src[1].get(), src[2].get()}, SamplerSpec{}, link.min_separation());
    const Vec3 c = lp.center();
    const std::string name = "exp(-|x-c|^2) under the link proposal";
    out.push_back({name, pi32,
                   mc_volume([&](const Vec3& x) { return std::exp(-norm2(x - c)); }, lp,
                             battery_options(name, budget, seed))});
  }

  PairSampler ps{&prop, RadialProfile{0.5}, 0.5};
  auto pair = [&](const std::string& name, double exact, std::function<double(double)> g) {
    out.push_back({name, exact,
                   mc_pair_volume([&](const Vec3& x, const Vec3& y) {
                     return std::exp(-norm2(x) - norm2(y)) * g(norm(x - y));
                   }, ps, battery_options(name, budget, seed))});
  };
  const double pi3 = kPi * kPi * kPi;
  pair("exp(-|x|^2-|y|^2) / |x-y|^2", pi3, [](double d) { return 1.0 / (d * d); });
  pair("exp(-|x|^2-|y|^2) / |x-y|", pi3 * std::sqrt(2.0 / kPi), [](double d) { return 1.0 / d; });
  pair("exp(-|x|^2-|y|^2) |x-y|^2", 3.0 * pi3, [](double d) { return d * d; });

  // a0 = curl curl(f e_z), a1 = curl(f e_z) with f = exp(-r^2): the cross term is
  // int grad_2 f . grad_2 f, both self terms vanish.
  {
    const FieldFn fields = [&](const Vec3& x, std::span<Vec3> a, double& density) {
      const double f = std::exp(-norm2(x));
      a[0] = f * Vec3{4 * x.x * x.z, 4 * x.y * x.z, 4 - 4 * x.x * x.x - 4 * x.y * x.y};
      a[1] = f * Vec3{-2 * x.y, 2 * x.x, 0.0};
      density = prop.density(x);
      return true;
    };
    HelicityOptions ho;
    ho.batch_points = 256;
    ho.close_points = 64;
    ho.split_radius = 0.3;
    const std::uint64_t batches = std::max<std::uint64_t>(budget / 256, 64);
    const auto v = mc_helicity_pair(2, fields, prop, ho, battery_options("helicity", batches, seed));
    out.push_back({"helicity of poloidal field", 0.0, v.component(0)});
    out.push_back({"poloidal-toroidal cross helicity", pi32 / std::sqrt(2.0), v.component(1)});
    out.push_back({"helicity of toroidal field", 0.0, v.component(2)});
  }
  return out;
}

void engine_honesty(const Config& cfg, Report& r) {
  const auto battery = closed_form_battery(cfg.suite.closed_form_budget, cfg.m.seed);
  int inside = 0;
  json rows = json::array();
  for (const auto& cf : battery) {
    const double z = std::abs(cf.estimate.value - cf.exact) / cf.estimate.std_error;
    inside += z <= cfg.tol.sigmas;
    Check c = info_check(11, "closed form: " + cf.name, z, "|estimate - exact| / stderr");
    c.data = {{"exact", cf.exact}, {"estimate", estimate_json(cf.estimate)}};
    r.add(std::move(c));
    rows.push_back({{"name", cf.name}, {"exact", cf.exact}, {"estimate", estimate_json(cf.estimate)}, {"z", z}});
  }
  r.results["C11"]["closed_form"] = rows;
  r.add(make_check(11, "closed-form integrals within sigmas x stderr", inside, ">=", cfg.tol.closed_form_required,
                   "of " + std::to_string(battery.size())));

  // Every report kind, rebuilt under each worker count.
  Config small = with_budget(cfg, 1 << 13);
  small.ergodic.n_triples = 2;
  small.linking.checkpoints = 4;
  auto bodies = [&]() {
    std::vector<std::string> out;
    out.push_back(dump(cmd_lk(link_input_preset("hopf_plus_far_circle"), small).body()));
    out.push_back(dump(cmd_m(link_input_preset(cfg.suite.witness), small).body()));
    TraceParams tp;
    tp.T = 2.0;
    out.push_back(dump(cmd_trace(field_input_preset("hopf_plus_far_circle", 0.1, 0.25), tp, small).body()));
    out.push_back(dump(cmd_ergodic(field_input_preset("hopf_plus_far_circle", 0.1, 0.0), small).body()));
    json bj = json::array();
    for (const auto& cf : closed_form_battery(1 << 12, cfg.m.seed)) bj.push_back(estimate_json(cf.estimate));
    out.push_back(dump(bj));
    return out;
  };
  std::vector<std::vector<std::string>> runs;
  json counts = json::array();
  for (int w : cfg.suite.worker_counts) {
    set_worker_count(w);
    runs.push_back(bodies());
    counts.push_back(w);
  }
  set_worker_count(0);
  int mismatches = 0;
  for (std::size_t k = 1; k < runs.size(); ++k)
    for (std::size_t b = 0; b < runs[0].size(); ++b) mismatches += runs[k][b] != runs[0][b];
  Check c = make_check(11, "report bodies differing across worker counts", mismatches, "<=", 0.0);
  c.data = {{"worker_counts", counts}, {"reports", runs.empty() ? 0 : runs[0].size()}};
  r.add(std::move(c));
  r.add(make_check(11, "worker-count settings compared", static_cast<double>(runs.size()), ">=", 2.0));
}

}  // namespace

Report cmd_suite(const Config& cfg) {
  Report r;
  r.command = "suite";
  r.input = {{"level", to_string(cfg.level)}};
  r.config = to_json(cfg);
  r.seeds = {{"seed", cfg.m.seed}};
  const auto start = Clock::now();
  MCache cache;
  auto stage = [&](const std::string& key, const std::function<void()>& fn) {
    const auto t0 = Clock::now();
    fn();
    r.timing[key] = seconds_since(t0);
  };
  stage("C1", [&] { integer_linking(cfg, r); });
  stage("C2", [&] { circulation(cfg, r); });
  stage("C3-4", [&] { periodicity_and_gauges(cfg, r); });
  stage("C5", [&] { exact_zeros(cfg, r); });
  stage("C6", [&] { diagonal_identity(cfg, r); });
  stage("C7", [&] { mirror(cfg, r, cache); });
  stage("C8", [&] { invariance(cfg, r); });
  stage("C9", [&] { separation(cfg, r, cache); });
  stage("C10", [&] { ergodic(cfg, r); });
  stage("C11", [&] { engine_honesty(cfg, r); });
  const double total = seconds_since(start);
  r.add(timed_check(12, to_string(cfg.level) + " suite seconds", total,
                    cfg.level == Level::Quick ? cfg.tol.quick_seconds : cfg.tol.full_seconds));
  r.timing["total"] = total;
  return r;
}

}  // namespace linkm
