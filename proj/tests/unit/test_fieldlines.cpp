#include <doctest.h>

#include <cmath>

#include "linkm/errors.hpp"
#include "linkm/fieldlines.hpp"
#include "linkm/linking.hpp"

using namespace linkm;

namespace {

const Link3& hopf() {
  static const Link3 L = make_preset("hopf_plus_far_circle");
  return L;
}

FieldSystem sheared() {
  std::vector<TubeSpec> tubes;
  for (const auto& c : hopf().components()) {
    TubeSpec t;
    t.center = c;
    t.radius = 0.15;
    t.transit = {0.4, -0.2};
    t.stream.radial = {-3.0, 1.5};
    t.stream.shear = {{1, 0, 2.0}, {1, 2, -40.0}};
    tubes.push_back(std::move(t));
  }
  return FieldSystem(std::move(tubes));
}

double length(const Curve3& c) {
  const int n = 4096;
  double s = 0;
  for (int k = 0; k < n; ++k) s += norm(c.eval(kTwoPi * k / n).tangent);
  return s * kTwoPi / n;
}

}  // namespace

TEST_CASE("field is divergence free inside and tangent to the tube wall") {
  const FieldSystem f = sheared();
  const double h = 1e-5;
  for (const TubePoint& p : {TubePoint{0, 0.3, 0.05, -0.02}, TubePoint{1, 4.0, -0.1, 0.07}}) {
    const Vec3 x = f.position(p);
    double div = 0.0;
    for (int a = 0; a < 3; ++a) {
      Vec3 e{};
      (a == 0 ? e.x : a == 1 ? e.y : e.z) = h;
      const Vec3 d = (1.0 / (2 * h)) * (f.field(x + e) - f.field(x - e));
      div += a == 0 ? d.x : a == 1 ? d.y : d.z;
    }
    CHECK(std::abs(div) < 1e-5 * norm(f.field(x)));
    const auto loc = f.locate(x);
    REQUIRE(loc);
    CHECK(loc->tube == p.tube);
    CHECK(norm(f.position(*loc) - x) < 1e-10);
  }
  for (double th : {0.0, 1.0, 2.5, 4.0}) {
    const double a = 0.15;
    const auto g = f.stream_gradient(0, a * std::cos(th), a * std::sin(th));
    // Tangential stream derivative vanishes, so the radial velocity does too.
    const double dpsi_dtheta = -a * std::sin(th) * g[0] + a * std::cos(th) * g[1];
    CHECK(std::abs(dpsi_dtheta) < 1e-10);
  }
  CHECK(norm(f.field(Vec3{0, 0, 30})) == 0.0);
}

TEST_CASE("flux matches a direct disk quadrature") {
  const FieldSystem f = sheared();
  const int nr = 400, nt = 64;
  double s = 0;
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nt; ++j) {
      const double r = 0.15 * (i + 0.5) / nr, t = kTwoPi * j / nt;
      s += f.transit_density(0, r * std::cos(t), r * std::sin(t)) * r;
    }
  s *= (0.15 / nr) * (kTwoPi / nt);
  CHECK(s == doctest::Approx(f.flux(0)).epsilon(1e-5));
  CHECK(f.flux(0) == doctest::Approx(1.0));
}

TEST_CASE("invalid tube systems are rejected") {
  CHECK_THROWS_AS(transit_field(hopf(), 0.6), ValidationError);
  TubeSpec t;
  t.center = hopf()[0];
  t.radius = 0.1;
  t.transit = {-2.0};
  CHECK_THROWS_AS(FieldSystem({t}), ValidationError);
  CHECK_THROWS_AS(FieldSystem({}), ValidationError);
}

TEST_CASE("uniform transit along the center closes after one transit") {
  const FieldSystem f = transit_field(hopf(), 0.1);
  const Vec3 x0 = f.position({0, 0.0, 0.0, 0.0});
  TraceOptions o;
  o.stop_on_close = true;
  const TraceResult tr = trace(f, x0, 10.0, o);
  REQUIRE(tr.closed);
  CHECK(tr.transits == 1);
  const double g0 = 1.0 / (kPi * 0.01);
  CHECK(tr.period == doctest::Approx(length(hopf()[0]) / g0).epsilon(1e-8));
  CHECK(tr.closure_error < 1e-8);
}

TEST_CASE("a quarter turn per transit closes after four transits") {
  const FieldSystem f = twisted_field(hopf(), 0.1, 0.25);
  const Vec3 x0 = f.position({1, 0.0, 0.04, 0.01});
  TraceOptions o;
  o.stop_on_close = true;
  const TraceResult tr = trace(f, x0, 50.0, o);
  REQUIRE(tr.closed);
  CHECK(tr.transits == 4);
  CHECK(tr.max_stream_drift < 1e-9);
  CHECK_THROWS_AS(trace(f, Vec3{0, 0, 50}, 1.0), ValidationError);
}

TEST_CASE("polygon linking is exact") {
  const std::vector<Vec3> sq{{-1, -1, 0}, {1, -1, 0}, {1, 1, 0}, {-1, 1, 0}};
  const std::vector<Vec3> through{{0, 0, -1}, {0, 0, 1}, {3, 0, 1}, {3, 0, -1}};
  const std::vector<Vec3> apart{{5, 0, -1}, {5, 0, 1}, {7, 0, 1}, {7, 0, -1}};
  CHECK(std::abs(std::abs(polygon_linking(sq, through)) - 1.0) < 1e-14);
  CHECK(std::abs(polygon_linking(sq, apart)) < 1e-14);
  std::vector<Vec3> back(through.rbegin(), through.rend());
  CHECK(polygon_linking(sq, back) == doctest::Approx(-polygon_linking(sq, through)));
}

TEST_CASE("asymptotic linking of the clasped tubes approaches lk") {
  const FieldSystem f = twisted_field(hopf(), 0.1, 0.25);
  const Vec3 x0 = f.position({0, 0.0, 0.03, 0.02}), y0 = f.position({1, 0.0, 0.03, 0.02});
  LinkingOptions o;
  o.checkpoints = 3;
  o.points_per_transit = 32;
  const CesaroEstimate c = asymptotic_linking(f, x0, y0, 4.0, o);
  REQUIRE(c.values.size() == 3);
  const int lk = linking_matrix(hopf())(0, 1);
  CHECK(std::abs(c.values.back() - lk) < 0.05);
  CHECK(c.checkpoints.back() == doctest::Approx(4.0));
  CHECK_THROWS_AS(asymptotic_linking(f, x0, f.position({0, 1.0, 0.0, 0.0}), 1.0, o), ValidationError);

  const auto far = asymptotic_linking(f, x0, f.position({2, 0.0, 0.03, 0.0}), 4.0, o);
  CHECK(std::abs(far.values.back()) < 0.05);
}

TEST_CASE("closed lines of a uniform field are parallel copies of the center") {
  const FieldSystem f = transit_field(hopf(), 0.1);
  const auto line = closed_line(f, 0, 0.05, 0.0);
  REQUIRE(line);
  CHECK(line->transits == 1);
  CHECK(line->fit_error < 1e-6);
  const auto p = line->curve.eval(0.0).position;
  CHECK(norm(p - f.position({0, 0.0, 0.05, 0.0})) < 1e-6);
}

TEST_CASE("lines that never close are skipped, and too many skips are an error") {
  const FieldSystem f = twisted_field(hopf(), 0.1, 0.1 * std::sqrt(2.0));
  ClosedLineOptions lo;
  lo.max_transits = 4;
  CHECK_FALSE(closed_line(f, 0, 0.05, 0.0, lo));
  ErgodicOptions eo;
  eo.n_triples = 2;
  eo.line = lo;
  CHECK_THROWS_AS(ergodic_M(f, eo), ConvergenceError);
}

TEST_CASE("section sampling follows the transit density") {
  TubeSpec t;
  t.center = hopf()[0];
  t.radius = 0.1;
  t.transit = {3.0};  // g grows like 1 + 3 (rho/a)^2
  const FieldSystem f({t});
  double m2 = 0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    CounterRng rng(1, 2, static_cast<std::uint64_t>(k));
    const auto uv = sample_section(f, 0, rng);
    CHECK(uv[0] * uv[0] + uv[1] * uv[1] <= 0.01 + 1e-15);
    m2 += (uv[0] * uv[0] + uv[1] * uv[1]) / 0.01;
  }
  // E[(rho/a)^2] = (1/2 + 3/3) / (1 + 3/2) = 0.6
  CHECK(m2 / n == doctest::Approx(0.6).epsilon(0.02));
}

TEST_CASE("field documents round trip") {
  const FieldSystem f = sheared();
  const FieldSystem g = field_from_json(to_json(f));
  const Vec3 x = f.position({0, 1.0, 0.02, 0.03});
  CHECK(norm(g.field(x) - f.field(x)) < 1e-12 * norm(f.field(x)));
  auto j = to_json(f);
  j["tubes"][1]["stream"]["shear"][0]["u"] = -1;
  try {
    field_from_json(j);
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("/tubes/1/stream/shear/0/u") != std::string::npos);
  }
  j = to_json(f);
  j["schema"] = "linkm-curve-v1";
  CHECK_THROWS_AS(field_from_json(j), SchemaError);
}

TEST_CASE("rational rotation p/q closes after q transits") {
  const FieldSystem f = twisted_field(hopf(), 0.1, 0.4);
  TraceOptions o;
  o.stop_on_close = true;
  const TraceResult tr = trace(f, f.position({0, 0.0, 0.05, -0.02}), 50.0, o);
  REQUIRE(tr.closed);
  CHECK(tr.transits == 5);
}

TEST_CASE("stream function is conserved along a sheared trace") {
  const FieldSystem f = sheared();
  const TraceResult tr = trace(f, f.position({0, 0.0, 0.06, 0.03}), 3.0);
  CHECK(tr.coords.size() > 100);
  const double psi0 = f.stream(0, tr.coords.front().u, tr.coords.front().v);
  double drift = 0;
  for (const auto& c : tr.coords) drift = std::max(drift, std::abs(f.stream(0, c.u, c.v) - psi0));
  CHECK(drift < 1e-8);
}

TEST_CASE("asymptotic linking is invariant under the flow") {
  const FieldSystem f = twisted_field(hopf(), 0.1, 0.25);
  const Vec3 x0 = f.position({0, 0.0, 0.03, 0.02}), y0 = f.position({1, 0.0, -0.04, 0.01});
  LinkingOptions o;
  o.checkpoints = 3;
  o.points_per_transit = 32;
  const CesaroEstimate base = asymptotic_linking(f, x0, y0, 4.0, o);
  for (double s : {0.037, 0.21}) {
    const TraceResult tr = trace(f, x0, s);
    const CesaroEstimate moved = asymptotic_linking(f, tr.points.back(), y0, 4.0, o);
    const double spread = std::max({base.spread, moved.spread, 1e-3});
    CHECK(std::abs(moved.values.back() - base.values.back()) <= 2 * spread);
  }
}
