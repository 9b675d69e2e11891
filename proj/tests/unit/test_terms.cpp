#include <doctest.h>

#include <cmath>

#include "linkm/terms.hpp"

using namespace linkm;

namespace {

MOptions cheap(std::uint64_t seed = 1) {
  MOptions o;
  o.seed = seed;
  o.pair_budget = 1 << 12;
  o.volume_budget = 1 << 12;
  o.target_rel_std_error = 0.0;
  o.phi_grid = 512;
  o.curve_nodes = 64;
  o.self_nodes = 64;
  return o;
}

}  // namespace

TEST_CASE("vanishing pairwise linking gives an exact zero") {
  for (const char* name : {"borromean", "unlink_separated"}) {
    CAPTURE(name);
    const TermBreakdown tb = assemble_M(make_preset(name), cheap());
    CHECK(tb.M.value == 0.0);
    CHECK(tb.M.std_error == 0.0);
    CHECK(tb.M.n_samples == 0);
    CHECK(tb.W.skipped);
    for (const auto& t : tb.b) CHECK(t.skipped);
    for (const auto& t : tb.f) CHECK(t.skipped);
    CHECK(tb.e.skipped);
  }
}

TEST_CASE("one linked pair also gives an exact zero") {
  const TermBreakdown tb = assemble_M(make_preset("hopf_plus_far_circle"), cheap());
  CHECK(tb.M.value == 0.0);
  CHECK(tb.M.std_error == 0.0);
  for (int i = 0; i < 3; ++i) CHECK(tb.cd_diagonal[static_cast<std::size_t>(i)].value == 0.0);
}

TEST_CASE("without the short-circuit the zeros are numerical") {
  MOptions o = cheap();
  o.short_circuit = false;
  const TermBreakdown tb = assemble_M(make_preset("borromean"), o);
  CHECK_FALSE(tb.W.skipped);
  CHECK(std::abs(tb.M.value) < 1e-9);
}

TEST_CASE("fixed seed reproduces every number") {
  const Link3 L = make_preset("torus_2_2k:1");
  const auto a = to_json(assemble_M(L, cheap(5)));
  const auto b = to_json(assemble_M(L, cheap(5)));
  CHECK(a.dump() == b.dump());
  const auto c = to_json(assemble_M(L, cheap(6)));
  CHECK(a["M"]["value"] != c["M"]["value"]);
}

TEST_CASE("b weight enters linearly") {
  const Link3 L = make_preset("torus_2_2k:1");
  MOptions one = cheap(3), two = cheap(3);
  one.b_factor = 1.0;
  two.b_factor = 2.0;
  TermEvaluator e1(L, one), e2(L, two);
  for (int k : {0, 4, 8}) {
    const Term t1 = e1.term_b(k), t2 = e2.term_b(k);
    CHECK(t1.integral.value == t2.integral.value);
    CHECK(t2.value.value == doctest::Approx(2.0 * t1.value.value).epsilon(1e-14));
  }
}

TEST_CASE("term labels and prefactors on a symmetric link") {
  const Link3 L = make_preset("torus_2_2k:1");
  TermEvaluator ev(L, cheap());
  const auto& lk = ev.linking();
  const double l12 = lk(0, 1), l23 = lk(1, 2), l31 = lk(2, 0);
  const Term b0 = ev.term_b(0);
  CHECK(b0.prefactor == doctest::Approx(-2.0 * l23 * l23 * l31));
  CHECK(kBLabels.size() == 9);
  CHECK(ev.term_f(0).prefactor == doctest::Approx(-2.0 * l12 * l23 * l31));
  CHECK(ev.term_e().prefactor == doctest::Approx(-2.0 * l12 * l23 * l31));
}

TEST_CASE("deterministic curve terms are stable under refinement") {
  const Link3 L = make_preset("eccentric_tori");
  MOptions a = cheap(), b = cheap();
  a.curve_nodes = 64;
  b.curve_nodes = 128;
  TermEvaluator ea(L, a), eb(L, b);
  for (int k = 3; k < 6; ++k) {
    const Term ca = ea.term_c(k), cb = eb.term_c(k);
    CHECK(ca.value.value == doctest::Approx(cb.value.value).epsilon(1e-6));
    CHECK(ca.value.std_error < 1e-5 + 1e-4 * std::abs(ca.value.value));
  }
}

TEST_CASE("mirror image flips the sign of M") {
  const Link3 L = make_preset("eccentric_tori");
  MOptions o = cheap(8);
  o.pair_budget = 1 << 14;
  o.volume_budget = 1 << 13;
  const TermBreakdown a = assemble_M(L, o);
  o.seed = 9;
  const TermBreakdown b = assemble_M(transform(L, RigidMotion::mirror_z()), o);
  CHECK(std::abs(a.M.value + b.M.value) < 4 * std::hypot(a.M.std_error, b.M.std_error));
  CHECK(a.M.std_error > 0.0);
}
