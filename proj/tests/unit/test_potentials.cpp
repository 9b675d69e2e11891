#include <doctest.h>

#include <cmath>

#include <boost/math/special_functions/ellint_1.hpp>
#include <boost/math/special_functions/ellint_2.hpp>

#include "linkm/curves.hpp"
#include "linkm/errors.hpp"
#include "linkm/potentials.hpp"

using namespace linkm;

namespace {

// Field of a circular loop of radius a in the xy-plane, unit strength,
// counterclockwise seen from +z: the classical elliptic-integral form.
Vec3 loop_field(double a, const Vec3& x) {
  const double rho = std::hypot(x.x, x.y), z = x.z;
  const double q = (a + rho) * (a + rho) + z * z;
  const double k = std::sqrt(4 * a * rho / q);
  const double K = boost::math::ellint_1(k), E = boost::math::ellint_2(k);
  const double d = (a - rho) * (a - rho) + z * z;
  const double bz = (K + (a * a - rho * rho - z * z) / d * E) / (2 * kPi * std::sqrt(q));
  if (rho < 1e-14) return {0, 0, bz};
  const double br = z / rho * (-K + (a * a + rho * rho + z * z) / d * E) / (2 * kPi * std::sqrt(q));
  return {br * x.x / rho, br * x.y / rho, bz};
}

const CurveHandle kLoop =
    std::make_shared<Curve3>(Curve3::circle({0, 0, 0}, {1, 0, 0}, {0, 1, 0}, 1.3));

}  // namespace

TEST_CASE("far-field potential of a loop") {
  for (const Vec3& x : {Vec3{0, 0, 0}, Vec3{0, 0, 0.7}, Vec3{0.4, -0.2, 0.5}, Vec3{3, 1, -2}}) {
    CAPTURE(x.x);
    const Vec3 ref = loop_field(1.3, x);
    const auto pv = curve_potential(*kLoop, x, 512);
    CHECK(norm(pv.value - ref) < 1e-12 * (1 + norm(ref)));
  }
  CHECK(norm(curve_potential(*kLoop, {0, 0, 0}, 64).value - Vec3{0, 0, 0.5 / 1.3}) < 1e-14);
}

TEST_CASE("adaptive source is accurate close to the curve") {
  const CurveSource src(kLoop);
  for (double d : {0.3, 1e-2, 1e-3, 1e-5}) {
    for (const Vec3& dir : {Vec3{1, 0, 0}, Vec3{0, 0, 1}, normalized(Vec3{-1, 0, 1})}) {
      const Vec3 x = Vec3{1.3, 0, 0} + d * dir;
      CAPTURE(d);
      const Vec3 ref = loop_field(1.3, x);
      CHECK(norm(src.potential(x) - ref) < 1e-9 * norm(ref));
    }
  }
  CHECK_THROWS_AS(src.potential({1.3, 0, 0}), SingularPointError);
}

TEST_CASE("kernel and pair kernel") {
  const Vec3 s{0, 0, 0}, t{0, 0, 1}, x{1, 0, 0};
  const Vec3 a = kernel_A(s, t, x);
  CHECK(norm(a - Vec3{0, 1.0 / (4 * kPi), 0}) < 1e-16);
  const Vec3 a2 = kernel_A(s, t, 2.0 * x);
  CHECK(norm(a2) == doctest::Approx(norm(a) / 4));
  const Vec3 b2 = kernel_A(s, t, 2.0 * x, KernelKind::Squared);
  CHECK(norm(b2) == doctest::Approx(norm(a) / 2));
  CHECK_THROWS_AS(kernel_A(s, t, s), SingularPointError);
}

TEST_CASE("potential is divergence free and its curl vanishes off the curve") {
  const CurveSource src(kLoop);
  const Vec3 x{0.4, 0.3, 0.6};
  const double h = 1e-4;
  auto d = [&](int axis, int comp) {
    Vec3 e{};
    (axis == 0 ? e.x : axis == 1 ? e.y : e.z) = h;
    const Vec3 p = src.potential(x + e), m = src.potential(x - e);
    const Vec3 df = (1.0 / (2 * h)) * (p - m);
    return comp == 0 ? df.x : comp == 1 ? df.y : df.z;
  };
  CHECK(std::abs(d(0, 0) + d(1, 1) + d(2, 2)) < 1e-7);
  CHECK(std::abs(d(1, 2) - d(2, 1)) < 1e-7);
  CHECK(std::abs(d(2, 0) - d(0, 2)) < 1e-7);
  CHECK(std::abs(d(0, 1) - d(1, 0)) < 1e-7);
}

TEST_CASE("alpha field: fast route, double integral, antisymmetry") {
  const Link3 L = make_preset("eccentric_tori");
  const CurveSource s0(std::make_shared<Curve3>(L[0])), s1(std::make_shared<Curve3>(L[1]));
  for (const Vec3& x : {Vec3{0.2, 0.1, 0.3}, Vec3{-1.5, 0.7, 0.2}, Vec3{4, -3, 2}}) {
    const Vec3 fast = alpha_field(s0, s1, x);
    const Vec3 slow = alpha_field_double_integral(L[0], L[1], x, 512);
    CHECK(norm(fast - slow) < 1e-10 * (1 + norm(fast)));
    CHECK(norm(fast + alpha_field(s1, s0, x)) <= 1e-12 * norm(fast));
  }
}

TEST_CASE("potentials are equivariant under proper rigid motions") {
  const Link3 L = make_preset("chain_3");
  RigidMotion m;
  m.rotation = Mat3::rotation(normalized(Vec3{1, 2, -0.5}), 0.9);
  m.translation = {0.3, -2, 1};
  const Curve3 moved = transform(L[1], m);
  for (const Vec3& x : {Vec3{0.1, 0.2, 0.3}, Vec3{2, -1, 0.5}}) {
    const Vec3 a = curve_potential(L[1], x).value;
    const Vec3 b = curve_potential(moved, m.apply(x)).value;
    CHECK(norm(m.rotation * a - b) < 1e-10 * (1 + norm(a)));
  }
}
