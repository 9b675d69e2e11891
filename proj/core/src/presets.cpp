#include <cctype>
#include <cmath>
#include <stdexcept>

#include "linkm/curves.hpp"
#include "linkm/errors.hpp"

namespace linkm {

namespace {

constexpr Vec3 kX{1, 0, 0};
constexpr Vec3 kY{0, 1, 0};
constexpr Vec3 kZ{0, 0, 1};

// Unit circle in the xy-plane, a unit circle in the xz-plane through its
// center (Hopf clasp), and a third circle far above both.
Link3 hopf_plus_far_circle() {
  return Link3({Curve3::circle({0, 0, 0}, kX, kY, 1.0), Curve3::circle({1, 0, 0}, kX, kZ, 1.0),
                Curve3::circle({0.5, 0.0, 12.0}, kX, kY, 1.0)});
}

// Three mutually perpendicular 2:1 ellipses.
Link3 borromean() {
  return Link3({Curve3({}, {2.0 * kX}, {1.0 * kY}), Curve3({}, {2.0 * kY}, {1.0 * kZ}),
                Curve3({}, {2.0 * kZ}, {1.0 * kX})});
}

Link3 unlink_separated() {
  const double d = 12.0;
  return Link3({Curve3::circle({0, 0, 0}, kX, kY, 1.0), Curve3::circle({d, 0, 0}, kX, kY, 1.0),
                Curve3::circle({0.5 * d, 0.5 * std::sqrt(3.0) * d, 0}, kX, kY, 1.0)});
}

// Two (1,k) curves on a torus (major 2, minor 0.6), half a meridian apart,
// plus the core circle of the torus. Every pair links k times.
Link3 torus_2_2k(int k) {
  if (k < 1 || k > 8) throw ValidationError("torus_2_2k: k must be in 1..8");
  constexpr double R = 2.0;
  constexpr double r = 0.6;
  auto strand = [&](double sign) {
    // (R + s r cos kt)(cos t, sin t, 0) + s r sin(kt) z
    const int order = k + 1;
    std::vector<Vec3> a(static_cast<std::size_t>(order)), b(static_cast<std::size_t>(order));
    a[0] += Vec3{R, 0, 0};
    b[0] += Vec3{0, R, 0};
    const double h = 0.5 * sign * r;
    // cos(kt) cos t = (cos((k+1)t) + cos((k-1)t))/2, cos(kt) sin t = (sin((k+1)t) - sin((k-1)t))/2
    a[static_cast<std::size_t>(k)] += Vec3{h, 0, 0};
    b[static_cast<std::size_t>(k)] += Vec3{0, h, 0};
    Vec3 c0{};
    if (k - 1 >= 1) {
      a[static_cast<std::size_t>(k - 2)] += Vec3{h, 0, 0};
      b[static_cast<std::size_t>(k - 2)] += Vec3{0, -h, 0};
    } else {
      c0 += Vec3{h, 0, 0};
    }
    b[static_cast<std::size_t>(k - 1)] += Vec3{0, 0, sign * r};
    return Curve3(c0, std::move(a), std::move(b));
  };
  return Link3({strand(1.0), strand(-1.0), Curve3::circle({0, 0, 0}, kX, kY, R)});
}

// L1 - L2 - L3 chain: L2 is the unit circle in the xy-plane, L1 and L3 clasp
// it from opposite sides; L3's plane is tilted by 60 degrees about the x-axis
// so the configuration has no mirror symmetry.
Link3 chain_3() {
  const double tilt = kPi / 3.0;
  const Vec3 w{0.0, std::sin(tilt), std::cos(tilt)};
  return Link3({Curve3::circle({-1.2, 0, 0}, kX, kZ, 1.0), Curve3::circle({0, 0, 0}, kX, kY, 1.0),
                Curve3::circle({1.2, 0, 0}, kX, w, 1.0)});
}

// Every pair links once, like torus_2_2k:1, but M differs from it. L1 winds
// twice around a thin tube and L2 once around a thick one; both tubes follow
// an off-center core, while L3 is the round circle of radius 2.
Link3 eccentric_tori() {
  auto strand = [](double r, int m, double phase) {
    return Curve3::fit(
        [=](double t) {
          const double a = m * t + phase;
          const double rho = 2.0 * (1.0 + 0.3 * std::cos(t)) + r * std::cos(a);
          return Vec3{rho * std::cos(t), rho * std::sin(t), r * std::sin(a)};
        },
        2 * m + 4, 256);
  };
  return Link3({strand(0.35, 2, 0.0), strand(0.8, 1, 1.0), Curve3::circle({0, 0, 0}, kX, kY, 2.0)});
}

}  // namespace

Preset parse_preset(const std::string& name) {
  std::string base = name;
  int k = 1;
  const auto sep = name.find_first_of(":(");
  if (sep != std::string::npos) {
    base = name.substr(0, sep);
    std::string arg = name.substr(sep + 1);
    if (!arg.empty() && arg.back() == ')') arg.pop_back();
    try {
      std::size_t used = 0;
      k = std::stoi(arg, &used);
      if (used != arg.size()) throw std::invalid_argument(arg);
    } catch (const std::exception&) {
      throw ValidationError("unknown preset '" + name + "': bad integer argument");
    }
  }
  if (base == "hopf_plus_far_circle") return {PresetKind::HopfPlusFarCircle, 1};
  if (base == "borromean") return {PresetKind::Borromean, 1};
  if (base == "unlink_separated") return {PresetKind::UnlinkSeparated, 1};
  if (base == "torus_2_2k") return {PresetKind::Torus2_2k, k};
  if (base == "chain_3") return {PresetKind::Chain3, 1};
  if (base == "eccentric_tori") return {PresetKind::EccentricTori, 1};
  throw ValidationError("unknown preset '" + name + "'");
}

std::string to_string(const Preset& p) {
  switch (p.kind) {
    case PresetKind::HopfPlusFarCircle: return "hopf_plus_far_circle";
    case PresetKind::Borromean: return "borromean";
    case PresetKind::UnlinkSeparated: return "unlink_separated";
    case PresetKind::Torus2_2k: return "torus_2_2k:" + std::to_string(p.k);
    case PresetKind::Chain3: return "chain_3";
    case PresetKind::EccentricTori: return "eccentric_tori";
  }
  return "?";
}

std::vector<Preset> all_presets() {
  return {{PresetKind::HopfPlusFarCircle, 1}, {PresetKind::Borromean, 1},
          {PresetKind::UnlinkSeparated, 1},   {PresetKind::Torus2_2k, 1},
          {PresetKind::Torus2_2k, 2},         {PresetKind::Chain3, 1},
          {PresetKind::EccentricTori, 1}};
}

Link3 make_preset(const Preset& p) {
  switch (p.kind) {
    case PresetKind::HopfPlusFarCircle: return hopf_plus_far_circle();
    case PresetKind::Borromean: return borromean();
    case PresetKind::UnlinkSeparated: return unlink_separated();
    case PresetKind::Torus2_2k: return torus_2_2k(p.k);
    case PresetKind::Chain3: return chain_3();
    case PresetKind::EccentricTori: return eccentric_tori();
  }
  throw ValidationError("unknown preset");
}

}  // namespace linkm
