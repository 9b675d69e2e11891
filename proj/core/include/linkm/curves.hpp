#pragma once

// Closed parametrized space curves (period 2*pi) and ordered 3-component links.

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "linkm/vec.hpp"

namespace linkm {

struct CurvePoint {
  Vec3 position;
  Vec3 tangent;
};

/// Anything that can be evaluated on the parameter circle [0, 2*pi).
class PeriodicCurve {
 public:
  virtual ~PeriodicCurve() = default;
  virtual CurvePoint eval(double t) const = 0;
  /// Upper bound on |x'(t)| over the circle.
  virtual double speed_bound() const = 0;
};

using CurveHandle = std::shared_ptr<const PeriodicCurve>;
using CurveSet = std::array<CurveHandle, 3>;

/// Reduce t into [0, 2*pi).
double wrap_angle(double t);

/// Truncated Fourier series x(t) = c + sum_k a_k cos(kt) + b_k sin(kt), k = 1..N.
class Curve3 final : public PeriodicCurve {
 public:
  Curve3() = default;
  Curve3(Vec3 constant, std::vector<Vec3> cos_coeffs, std::vector<Vec3> sin_coeffs);

  /// center + radius * (u cos t + v sin t).
  static Curve3 circle(const Vec3& center, const Vec3& u, const Vec3& v, double radius);

  /// Least-squares (DFT) fit of order `order` to a periodic sampler.
  static Curve3 fit(const std::function<Vec3(double)>& f, int order, int samples);

  int order() const { return static_cast<int>(cos_.size()); }
  const Vec3& constant() const { return constant_; }
  const std::vector<Vec3>& cos_coeffs() const { return cos_; }
  const std::vector<Vec3>& sin_coeffs() const { return sin_; }

  CurvePoint eval(double t) const override;
  /// Position and derivatives 1..3 at t.
  std::array<Vec3, 4> jet(double t) const;
  double speed_bound() const override;

  /// Throws ValidationError if the tangent (nearly) vanishes on a dense grid.
  void validate(int grid = 4096) const;

 private:
  Vec3 constant_;
  std::vector<Vec3> cos_;
  std::vector<Vec3> sin_;
};

/// Certified lower bound on the distance between two curves: the minimum over a
/// `grid` x `grid` parameter lattice minus a Lipschitz margin.
double min_separation(const PeriodicCurve& a, const PeriodicCurve& b, int grid = 4096);
double min_separation(const CurveSet& curves, int grid = 4096);

/// Ordered triple of pairwise disjoint Fourier curves.
class Link3 {
 public:
  explicit Link3(std::array<Curve3, 3> components);

  const Curve3& operator[](int i) const { return components_[static_cast<std::size_t>(i)]; }
  const std::array<Curve3, 3>& components() const { return components_; }
  double min_separation() const { return min_separation_; }
  CurveSet curves() const;

 private:
  std::array<Curve3, 3> components_;
  double min_separation_ = 0.0;
};

/// Similarity x -> scale * R x + t with R orthogonal (det = +-1).
struct RigidMotion {
  Mat3 rotation;
  Vec3 translation;
  double scale = 1.0;

  void validate() const;
  Vec3 apply(const Vec3& x) const { return scale * (rotation * x) + translation; }

  static RigidMotion identity() { return {}; }
  static RigidMotion mirror_z() { return {Mat3::diagonal(1, 1, -1), {}, 1.0}; }
};

Curve3 transform(const Curve3& curve, const RigidMotion& m);
Link3 transform(const Link3& link, const RigidMotion& m);

/// Same image traversed backwards: t -> x(-t).
Curve3 reversed(const Curve3& curve);
Link3 reverse_component(const Link3& link, int i);

/// Positive periodic weight w(s) = 1 + sum_k a_k cos(ks) + b_k sin(ks); mean(w) = 1.
class SpeedProfile {
 public:
  SpeedProfile() = default;
  SpeedProfile(std::vector<double> cos_terms, std::vector<double> sin_terms);

  double value(double s) const;
  /// Phase theta(s) = int_0^s w, so theta(s + 2*pi) = theta(s) + 2*pi.
  double phase(double s) const;
  double max_value() const;
  double min_value() const;

 private:
  std::vector<double> a_;
  std::vector<double> b_;
};

/// Same image as `base`, parameter s -> base(shift + theta(s)).
class ReparametrizedCurve final : public PeriodicCurve {
 public:
  ReparametrizedCurve(CurveHandle base, double shift, SpeedProfile profile);
  CurvePoint eval(double s) const override;
  double speed_bound() const override;

 private:
  CurveHandle base_;
  double shift_;
  SpeedProfile profile_;
};

/// Throws ValidationError when the profile is not bounded away from zero.
CurveHandle reparametrize(CurveHandle curve, double shift, const SpeedProfile& profile);

/// Seeded smooth perturbations of `link`, sup-norm <= amplitude per component.
/// Throws ValidationError when amplitude exceeds min_separation / 4.
std::vector<Link3> isotopy_family(const Link3& link, std::uint64_t seed, double amplitude,
                                  int members = 5);

enum class PresetKind {
  HopfPlusFarCircle,
  Borromean,
  UnlinkSeparated,
  Torus2_2k,
  Chain3,
  EccentricTori
};

struct Preset {
  PresetKind kind = PresetKind::HopfPlusFarCircle;
  int k = 1;  // torus_2_2k only
};

/// Accepts "borromean", "torus_2_2k", "torus_2_2k:3" and "torus_2_2k(3)".
Preset parse_preset(const std::string& name);
std::string to_string(const Preset& p);
std::vector<Preset> all_presets();
Link3 make_preset(const Preset& p);
inline Link3 make_preset(const std::string& name) { return make_preset(parse_preset(name)); }

}  // namespace linkm
