#include <doctest.h>

#include <cmath>

#include "linkm/curves.hpp"
#include "linkm/linking.hpp"

using namespace linkm;

namespace {

// Signed crossings of b through the flat disk spanned by a planar circle a,
// oriented by a's direction of travel. Independent of the Gauss integral.
int disk_crossings(const Curve3& a, const PeriodicCurve& b, int n = 20000) {
  const Vec3 c = a.constant();
  const Vec3 x0 = a.eval(0).position - c;
  const Vec3 normal = normalized(cross(x0, a.eval(0).tangent));
  const double r2 = norm2(x0);
  int sum = 0;
  Vec3 prev = b.eval(0).position;
  for (int k = 1; k <= n; ++k) {
    const Vec3 cur = b.eval(kTwoPi * k / n).position;
    const double h0 = dot(prev - c, normal), h1 = dot(cur - c, normal);
    if ((h0 < 0) != (h1 < 0)) {
      const Vec3 hit = prev + (h0 / (h0 - h1)) * (cur - prev);
      if (norm2(hit - c) < r2) sum += h1 > h0 ? 1 : -1;
    }
    prev = cur;
  }
  return sum;
}

}  // namespace

TEST_CASE("gauss and crossing routes agree with flat-disk counts") {
  struct Case {
    const char* preset;
    int disk;    // component bounding a flat disk
    int other;
  };
  for (const Case& c : {Case{"hopf_plus_far_circle", 0, 1}, Case{"hopf_plus_far_circle", 0, 2},
                        Case{"chain_3", 1, 0}, Case{"chain_3", 1, 2}, Case{"torus_2_2k:1", 2, 0},
                        Case{"torus_2_2k:2", 2, 0}, Case{"torus_2_2k:2", 2, 1}, Case{"eccentric_tori", 2, 0},
                        Case{"eccentric_tori", 2, 1}}) {
    CAPTURE(c.preset);
    CAPTURE(c.other);
    const Link3 L = make_preset(c.preset);
    const int oracle = disk_crossings(L[c.disk], L[c.other]);
    const Estimate g = gauss_linking(L[c.disk], L[c.other]);
    CHECK(std::abs(g.value - oracle) < 1e-8);
    CHECK(crossing_sign_linking(L[c.disk], L[c.other]) == oracle);
  }
}

TEST_CASE("linking matrices of the presets") {
  auto lk = [](const char* name) { return linking_matrix(make_preset(name)); };
  const auto hopf = lk("hopf_plus_far_circle");
  CHECK(std::abs(hopf(0, 1)) == 1);
  CHECK(hopf(1, 2) == 0);
  CHECK(hopf(2, 0) == 0);
  const auto b = lk("borromean");
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(b(i, j) == 0);
  CHECK(b.max_residual() < 1e-10);
  for (int k = 1; k <= 3; ++k) {
    const auto t = linking_matrix(make_preset(Preset{PresetKind::Torus2_2k, k}));
    CHECK(std::abs(t(0, 1)) == k);
    CHECK(std::abs(t(1, 2)) == k);
    CHECK(std::abs(t(2, 0)) == k);
  }
  const auto e = lk("eccentric_tori");
  const auto t1 = lk("torus_2_2k:1");
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(e(i, j) == t1(i, j));
}

TEST_CASE("linking number symmetries") {
  const Link3 L = make_preset("chain_3");
  const int l12 = crossing_sign_linking(L[0], L[1]);
  CHECK(crossing_sign_linking(L[1], L[0]) == l12);
  CHECK(crossing_sign_linking(reversed(L[0]), L[1]) == -l12);
  const Link3 M = transform(L, RigidMotion::mirror_z());
  CHECK(crossing_sign_linking(M[0], M[1]) == -l12);
  CHECK(gauss_linking(M[0], M[1]).value == doctest::Approx(-l12).epsilon(1e-9));
  // Independent of the projection direction.
  CHECK(crossing_sign_linking(L[0], L[1], 4096, {0.1, -0.9, 0.3}) == l12);
}

TEST_CASE("gauss linking reports its refinement error") {
  const Link3 L = make_preset("torus_2_2k:2");
  const Estimate g = gauss_linking(L[0], L[1], 1e-12);
  CHECK(g.converged);
  CHECK(g.std_error < 1e-12);
  const Estimate coarse = gauss_linking(L[0], L[1], 1e-12, 64);
  CHECK_FALSE(coarse.converged);
}
