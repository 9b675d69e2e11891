#include <doctest.h>

#include <cmath>
#include <set>

#include "linkm/rng.hpp"

using namespace linkm;

// Known-answer vectors published with the Random123 reference implementation.
TEST_CASE("philox4x32-10 known answers") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("counter rng is a pure function of its coordinates") {
  CounterRng a(7, stream_id("x"), 12), b(7, stream_id("x"), 12), c(7, stream_id("x"), 13);
  for (int k = 0; k < 10; ++k) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
  CHECK(CounterRng(7, stream_id("x"), 12).uniform() != c.uniform());
}

TEST_CASE("uniform and normal moments") {
  const int n = 200000;
  double s1 = 0, s2 = 0, z1 = 0, z2 = 0;
  for (int i = 0; i < n; ++i) {
    CounterRng r(3, stream_id("moments"), static_cast<std::uint64_t>(i));
    const double u = r.uniform(), z = r.normal();
    s1 += u;
    s2 += u * u;
    z1 += z;
    z2 += z * z;
  }
  CHECK(std::abs(s1 / n - 0.5) < 5 * std::sqrt(1.0 / 12 / n));
  CHECK(std::abs(s2 / n - 1.0 / 3) < 5 * std::sqrt(4.0 / 45 / n));
  CHECK(std::abs(z1 / n) < 5 / std::sqrt(n));
  CHECK(std::abs(z2 / n - 1.0) < 5 * std::sqrt(2.0 / n));
}

TEST_CASE("unit vectors are unit and isotropic") {
  Vec3 mean{};
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const Vec3 v = CounterRng(5, 1, static_cast<std::uint64_t>(i)).unit_vector();
    CHECK(std::abs(norm(v) - 1.0) < 1e-14);
    mean += v;
  }
  CHECK(norm(mean) / n < 5 * std::sqrt(1.0 / n));
}

TEST_CASE("stream ids separate labels") {
  CHECK(stream_id("volume") != stream_id("pair"));
  CHECK(stream_id("") == 0xcbf29ce484222325ULL);
}
