#include <doctest.h>

#include <cmath>

#include "linkm/curves.hpp"
#include "linkm/curves_io.hpp"
#include "linkm/errors.hpp"

using namespace linkm;

TEST_CASE("circle evaluation and derivatives") {
  const Curve3 c = Curve3::circle({1, 2, 3}, {1, 0, 0}, {0, 1, 0}, 2.0);
  const auto p = c.eval(kPi / 2);
  CHECK(norm(p.position - Vec3{1, 4, 3}) < 1e-14);
  CHECK(norm(p.tangent - Vec3{-2, 0, 0}) < 1e-14);
  const auto jet = c.jet(0.3);
  CHECK(norm(jet[2] + (jet[0] - Vec3{1, 2, 3})) < 1e-13);  // x'' = -(x - c)
  CHECK(c.speed_bound() >= 2.0);
}

TEST_CASE("fourier fit reproduces trigonometric curves") {
  auto f = [](double t) { return Vec3{std::cos(t) + 0.2 * std::cos(3 * t), std::sin(2 * t), 0.5 * std::sin(t)}; };
  const Curve3 c = Curve3::fit(f, 4, 64);
  for (double t : {0.1, 1.7, 4.2}) CHECK(norm(c.eval(t).position - f(t)) < 1e-13);
}

TEST_CASE("wrap_angle") {
  CHECK(std::abs(wrap_angle(-0.5) - (kTwoPi - 0.5)) < 1e-15);
  CHECK(wrap_angle(kTwoPi) == doctest::Approx(0.0));
  CHECK(std::abs(wrap_angle(3 * kTwoPi + 1.0) - 1.0) < 1e-13);
}

TEST_CASE("degenerate and intersecting input is rejected") {
  CHECK_THROWS_AS(Curve3({}, {Vec3{}}, {Vec3{}}).validate(), ValidationError);
  const Curve3 a = Curve3::circle({0, 0, 0}, {1, 0, 0}, {0, 1, 0}, 1.0);
  const Curve3 b = Curve3::circle({1, 0, 0}, {1, 0, 0}, {0, 1, 0}, 1.0);  // meets a in the plane
  const Curve3 far = Curve3::circle({0, 0, 10}, {1, 0, 0}, {0, 1, 0}, 1.0);
  CHECK_THROWS_AS(Link3({a, b, far}), ValidationError);
}

TEST_CASE("min_separation is a lower bound") {
  const Curve3 a = Curve3::circle({0, 0, 0}, {1, 0, 0}, {0, 1, 0}, 1.0);
  const Curve3 b = Curve3::circle({0, 0, 3}, {1, 0, 0}, {0, 1, 0}, 1.0);
  const double d = min_separation(a, b, 512);
  CHECK(d <= 3.0);
  CHECK(d > 2.9);
}

TEST_CASE("rigid motions, reversal and reparametrization keep the image") {
  const Link3 L = make_preset("chain_3");
  const RigidMotion m{Mat3::rotation({1, 2, 3}, 0.7), {0.5, -1, 2}, 1.5};
  const Link3 T = transform(L, m);
  for (double t : {0.0, 2.0, 5.0})
    CHECK(norm(T[0].eval(t).position - m.apply(L[0].eval(t).position)) < 1e-12);
  CHECK(T.min_separation() == doctest::Approx(1.5 * L.min_separation()).epsilon(1e-3));

  const Curve3 r = reversed(L[1]);
  CHECK(norm(r.eval(0.4).position - L[1].eval(-0.4).position) < 1e-13);

  CHECK_THROWS_AS(RigidMotion({Mat3::diagonal(1, 1, 2), {}, 1.0}).validate(), ValidationError);

  const CurveHandle base = std::make_shared<Curve3>(L[0]);
  const SpeedProfile w({0.2}, {-0.1});
  CHECK(w.phase(kTwoPi) == doctest::Approx(kTwoPi));
  const CurveHandle rp = reparametrize(base, 0.3, w);
  const double s = 1.1;
  CHECK(norm(rp->eval(s).position - base->eval(0.3 + w.phase(s)).position) < 1e-13);
  CHECK(norm(rp->eval(s).tangent - w.value(s) * base->eval(0.3 + w.phase(s)).tangent) < 1e-12);
  CHECK_THROWS_AS(reparametrize(base, 0.0, SpeedProfile({1.2}, {})), ValidationError);
}

TEST_CASE("isotopy family respects its amplitude cap") {
  const Link3 L = make_preset("hopf_plus_far_circle");
  const double cap = 0.25 * L.min_separation();
  const auto fam = isotopy_family(L, 9, cap, 5);
  REQUIRE(fam.size() == 5);
  for (const auto& m : fam)
    for (int i = 0; i < 3; ++i)
      for (double t = 0; t < kTwoPi; t += 0.05) CHECK(norm(m[i].eval(t).position - L[i].eval(t).position) <= cap * (1 + 1e-12));
  CHECK_THROWS_AS(isotopy_family(L, 9, 1.01 * cap, 5), ValidationError);
  const auto again = isotopy_family(L, 9, cap, 5);
  CHECK(norm(again[3][2].eval(1.0).position - fam[3][2].eval(1.0).position) == 0.0);
}

TEST_CASE("preset names") {
  CHECK(to_string(parse_preset("torus_2_2k(3)")) == "torus_2_2k:3");
  CHECK(to_string(parse_preset("torus_2_2k")) == "torus_2_2k:1");
  CHECK_THROWS_AS(parse_preset("trefoil"), ValidationError);
  for (const auto& p : all_presets()) CHECK_NOTHROW(make_preset(p));
}

TEST_CASE("curve files round trip and report the offending path") {
  const Link3 L = make_preset("borromean");
  const Link3 back = link_from_json(to_json(L));
  for (int i = 0; i < 3; ++i) CHECK(norm(back[i].eval(0.9).position - L[i].eval(0.9).position) == 0.0);

  auto j = to_json(L);
  j["components"][1]["cos"][0] = "x";
  try {
    link_from_json(j);
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("/components/1/cos") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_json_text("{\n \"schema\": ,\n}", "mem"), SchemaError);
  j = to_json(L);
  j["schema"] = "other";
  CHECK_THROWS_AS(link_from_json(j), SchemaError);
}
