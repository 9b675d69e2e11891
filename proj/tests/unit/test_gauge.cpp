#include <doctest.h>

#include <cmath>

#include <boost/math/special_functions/ellint_1.hpp>
#include <boost/math/special_functions/ellint_2.hpp>

#include "linkm/errors.hpp"
#include "linkm/gauge.hpp"

using namespace linkm;

namespace {

Vec3 unit_loop_field(const Vec3& x) {
  const double rho = std::hypot(x.x, x.y), z = x.z;
  const double q = (1 + rho) * (1 + rho) + z * z;
  const double k = std::sqrt(4 * rho / q);
  const double K = boost::math::ellint_1(k), E = boost::math::ellint_2(k);
  const double d = (1 - rho) * (1 - rho) + z * z;
  const double bz = (K + (1 - rho * rho - z * z) / d * E) / (2 * kPi * std::sqrt(q));
  if (rho < 1e-14) return {0, 0, bz};
  const double br = z / rho * (-K + (1 + rho * rho + z * z) / d * E) / (2 * kPi * std::sqrt(q));
  return {br * x.x / rho, br * x.y / rho, bz};
}

}  // namespace

TEST_CASE("multivalued potential along a hopf clasp matches the loop field") {
  const Link3 L = make_preset("hopf_plus_far_circle");
  const Curve3& c0 = L[0];
  // L1 is a unit circle about the origin; orient the oracle with it.
  const double orient = cross(c0.eval(0).position, c0.eval(0).tangent).z > 0 ? 1.0 : -1.0;
  REQUIRE(std::abs(norm(c0.eval(0.3).position) - 1.0) < 1e-12);
  REQUIRE(std::abs(c0.eval(0.3).position.z) < 1e-12);

  const auto mv = build_multivalued(L.curves(), 1, 0, 1024);
  // Composite Simpson on the same integrand built from the oracle field.
  auto integrand = [&](double s) {
    const auto p = L[1].eval(s);
    return orient * dot(p.tangent, unit_loop_field(p.position));
  };
  for (double t : {0.5, 2.0, 4.5}) {
    const int n = 4000;
    double sum = integrand(0) + integrand(t);
    for (int k = 1; k < n; ++k) sum += (k % 2 ? 4 : 2) * integrand(t * k / n);
    CHECK(mv(t) == doctest::Approx(sum * t / (3 * n)).epsilon(1e-9));
  }
  CHECK(std::abs(mv.period_increment - linking_matrix(L)(1, 0)) < 1e-10);
  CHECK(mv.refinement_delta < 1e-8);
}

TEST_CASE("lifted potentials gain lk per period") {
  const Link3 L = make_preset("torus_2_2k:2");
  const auto lk = linking_matrix(L);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      const auto mv = build_multivalued(L.curves(), i, j, 512);
      for (double t : {0.0, 1.0, 3.0}) CHECK(std::abs(mv(t + kTwoPi) - mv(t) - lk(i, j)) < 1e-9);
      const auto vals = mv.values();
      CHECK(vals[0] == 0.0);
    }
}

TEST_CASE("gauges") {
  const Link3 L = make_preset("eccentric_tori");
  const CurveSet cs = L.curves();
  const auto lk = linking_matrix(L);
  const std::size_t n = 256;
  for (int i = 0; i < 3; ++i) {
    const auto u = build_multivalued(cs, i, (i + 1) % 3, n);
    const auto v = build_multivalued(cs, i, (i + 2) % 3, n);
    for (GaugeMeasure m : {GaugeMeasure::Arclength, GaugeMeasure::Parameter}) {
      const auto w = measure_weights(*cs[static_cast<std::size_t>(i)], n, m);
      double total = 0;
      for (double x : w) total += x;
      CHECK(total == doctest::Approx(1.0).epsilon(1e-14));

      const auto mz = combine_phi(cs, lk, i, u, v, GaugeKind::MeanZero, m);
      double mean = 0;
      for (std::size_t k = 0; k < n; ++k) mean += w[k] * mz.phi.values()[k];
      CHECK(std::abs(mean) < 1e-13);

      const auto pt = combine_phi(cs, lk, i, u, v, GaugeKind::MarkedPoint, m, 1.25);
      CHECK(std::abs(pt(1.25)) < 1e-12);
      // Gauges differ by a constant.
      CHECK(pt(0.1) - mz(0.1) == doctest::Approx(pt(4.0) - mz(4.0)).epsilon(1e-12));

      auto at = [&](double t0) {
        return combine_phi(cs, lk, i, u, v, GaugeKind::MarkedPoint, m, t0)(2.2);
      };
      CHECK(std::abs(average_over_marked_points(at, n, w) - mz(2.2)) < 1e-12);
    }
  }
}

TEST_CASE("phi vanishes identically when its weights do") {
  const Link3 L = make_preset("borromean");
  const auto t = build_phi(L.curves(), linking_matrix(L), 0, GaugeKind::MeanZero, 128);
  CHECK(t.identically_zero());
  for (double x : t.phi.values()) CHECK(x == 0.0);
}

TEST_CASE("invalid grids are rejected") {
  const Link3 L = make_preset("borromean");
  CHECK_THROWS_AS(build_multivalued(L.curves(), 0, 1, 100), ValidationError);
  CHECK_THROWS_AS(build_multivalued(L.curves(), 1, 1, 128), ValidationError);
}
