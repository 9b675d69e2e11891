#include <doctest.h>

#include <cmath>

#include <boost/math/special_functions/bessel.hpp>

#include "linkm/parallel.hpp"
#include "linkm/quadrature.hpp"

using namespace linkm;

TEST_CASE("periodic trapezoid converges spectrally") {
  const Estimate e = periodic_integral([](double t) { return std::exp(std::cos(t)); }, 1e-14);
  CHECK(e.value == doctest::Approx(kTwoPi * boost::math::cyl_bessel_i(0, 1.0)).epsilon(1e-14));
  CHECK(e.converged);
  CHECK(e.n_samples <= 128);
}

TEST_CASE("gauss-legendre integrates polynomials exactly") {
  const auto gl = gauss_legendre(6);
  for (int p = 0; p <= 11; ++p) {
    double s = 0;
    for (std::size_t k = 0; k < gl.x.size(); ++k) s += gl.w[k] * std::pow(gl.x[k], p);
    CHECK(s == doctest::Approx(p % 2 ? 0.0 : 2.0 / (p + 1)).epsilon(1e-13));
  }
}

TEST_CASE("radial profile is a normalized density") {
  const RadialProfile prof{0.7};
  // int 4 pi r^2 density dr by substitution r = s tan(u).
  double s = 0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    const double u = (k + 0.5) * (kPi / 2) / n;
    const double r = 0.7 * std::tan(u), dr = 0.7 / (std::cos(u) * std::cos(u));
    s += 4 * kPi * r * r * prof.density(r * r) * dr * (kPi / 2) / n;
  }
  CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("monte carlo results do not depend on the worker count") {
  McOptions o;
  o.budget = 1 << 14;
  o.seed = 42;
  o.block_size = 256;
  const SampleFn fn = [](CounterRng& rng, std::span<double> out) {
    const double u = rng.uniform(), v = rng.uniform();
    out[0] = u * v;
    out[1] = std::sin(u);
    return v > 1e-3;  // a few excluded samples
  };
  set_worker_count(1);
  const auto a = mc_run(2, fn, o);
  set_worker_count(3);
  const auto b = mc_run(2, fn, o);
  set_worker_count(0);
  CHECK(a.mean == b.mean);
  CHECK(a.covariance == b.covariance);
  CHECK(a.n_excluded_singular == b.n_excluded_singular);
  CHECK(a.n_excluded_singular > 0);
  CHECK(a.n_samples == o.budget);
}

TEST_CASE("relative target stops early") {
  McOptions o;
  o.budget = 1 << 20;
  o.min_samples = 1 << 10;
  o.target_relative = 1e-2;
  const auto r = mc_run(
      1,
      [](CounterRng& rng, std::span<double> out) {
        out[0] = 1.0 + rng.uniform();
        return true;
      },
      o);
  CHECK(r.converged);
  CHECK(r.n_samples < o.budget);
  CHECK(r.component(0).std_error <= 1e-2 * 1.5);
}

TEST_CASE("estimates combine") {
  const Estimate s = sum_independent({Estimate{1.0, 0.3, 10, 0, true, false, 0},
                                      Estimate{2.0, 0.4, 10, 0, true, false, 0}});
  CHECK(s.value == 3.0);
  CHECK(s.std_error == doctest::Approx(0.5));
  const VectorEstimate v{{1.0, 2.0}, {0.04, 0.01, 0.01, 0.09}, 100, 0, true, 0};
  const std::array<double, 2> w{1.0, -1.0};
  const Estimate l = v.linear(w);
  CHECK(l.value == -1.0);
  CHECK(l.std_error == doctest::Approx(std::sqrt(0.04 + 0.09 - 0.02)));
}

namespace {

class Gaussian final : public Proposal {
 public:
  Vec3 sample(CounterRng& rng) const override { return {rng.normal(), rng.normal(), rng.normal()}; }
  double density(const Vec3& x) const override { return std::exp(-0.5 * norm2(x)) / std::pow(kTwoPi, 1.5); }
};

}  // namespace

TEST_CASE("importance-sampled volume and pair integrals") {
  const Gaussian g;
  McOptions o;
  o.budget = 1 << 15;
  o.seed = 11;
  const Estimate v = mc_volume([](const Vec3& x) { return norm2(x) * std::exp(-norm2(x)); }, g, o);
  CHECK(std::abs(v.value - 1.5 * std::pow(kPi, 1.5)) < 4 * v.std_error);

  // E|X - Y|^2 = 6 for independent standard normals.
  PairSampler ps{&g, RadialProfile{0.3}, 0.3};
  const Estimate p = mc_pair_volume(
      [&](const Vec3& x, const Vec3& y) { return norm2(x - y) * g.density(x) * g.density(y); }, ps, o);
  CHECK(std::abs(p.value - 6.0) < 4 * p.std_error);
  CHECK(p.std_error < 0.1);
}
