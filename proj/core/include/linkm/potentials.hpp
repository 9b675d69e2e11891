#pragma once

// Biot-Savart kernels of closed curves and the curve-integrated vector fields
// A_i, A_i^phi built from them.

#include <vector>

#include "linkm/curves.hpp"
#include "linkm/periodic.hpp"
#include "linkm/quadrature.hpp"

namespace linkm {

/// Denominator of the point kernel: |x - x_i|^3 (default) or the literal |x - x_i|^2.
enum class KernelKind { Cubed, Squared };

/// Distances below this are never evaluated.
inline constexpr double kHardFloor = 1e-13;

/// (1/4pi) tangent x (x - source) / |x - source|^3. Throws SingularPointError
/// below kHardFloor.
Vec3 kernel_A(const Vec3& source, const Vec3& tangent, const Vec3& x,
              KernelKind kind = KernelKind::Cubed);

/// kernel_A(x_i; x) x kernel_A(x_j; x).
Vec3 alpha_pair(const CurvePoint& xi, const CurvePoint& xj, const Vec3& x,
                KernelKind kind = KernelKind::Cubed);

struct PotentialValue {
  Vec3 value;
  double refinement_delta = 0.0;  // |rule(order) - rule(order / 2)|
  bool near_singular = false;     // x closer than near_floor; use CurveSource instead
};

/// Plain trapezoid rule for A(x) = int A(x(t); x) dt with `order` nodes.
/// near_floor is absolute.
PotentialValue curve_potential(const PeriodicCurve& curve, const Vec3& x, int order = 512,
                               KernelKind kind = KernelKind::Cubed, double near_floor = 0.0);

/// int phi(t) A(x(t); x) dt on the `order`-node grid. phi must be sampled on a
/// grid whose size is a multiple of order.
Vec3 phi_weighted_potential(const PeriodicCurve& curve, const PeriodicSamples& phi,
                            const Vec3& x, int order = 512, KernelKind kind = KernelKind::Cubed);

/// Oracle route for alpha_field: the double curve integral of alpha_pair.
Vec3 alpha_field_double_integral(const PeriodicCurve& ci, const PeriodicCurve& cj, const Vec3& x,
                                 int order = 256, KernelKind kind = KernelKind::Cubed);

struct PotentialOptions {
  int nodes = 2048;         // finest trapezoid grid
  int min_nodes = 64;       // coarsest trapezoid grid
  double near_factor = 5.0; // trapezoid only at distance >= near_factor * speed * spacing
  double near_floor = 1e-3; // relative to the curve diameter
  int max_depth = 20;       // panel bisections before a sample is declared singular
  int panel_order = 8;
  KernelKind kernel = KernelKind::Cubed;
};

struct FieldValue {
  Vec3 A;
  Vec3 A_phi;
  double tube_density = 0.0;
  bool near = false;
  bool singular = false;
};

/// One source curve with cached node tables. Far from the curve the trapezoid
/// rule runs on the coarsest grid that is spectrally accurate at that
/// distance; near it, Gauss-Legendre panels are bisected toward the closest
/// point. A, the phi-weighted A^phi, and a tube sampling density share the
/// same nodes.
class CurveSource {
 public:
  CurveSource(CurveHandle curve, PotentialOptions opts = {});

  /// Attaches phi for A^phi.
  void set_weight(PeriodicSamples phi);
  bool has_weight() const { return !phi_.empty(); }
  const PeriodicSamples& weight() const { return phi_; }

  const PeriodicCurve& curve() const { return *curve_; }
  const CurveHandle& handle() const { return curve_; }
  const PotentialOptions& options() const { return opts_; }
  double diameter() const { return diameter_; }
  double speed_bound() const { return speed_; }
  Vec3 centroid() const { return centroid_; }
  double radius_about(const Vec3& c) const;

  /// tube_density is (1/2pi) int profile.density(|x - x(t)|^2) dt when a
  /// profile is given.
  FieldValue evaluate(const Vec3& x, const RadialProfile* tube = nullptr) const;

  /// A(x); throws SingularPointError when x is on the curve.
  Vec3 potential(const Vec3& x) const;

 private:
  void accumulate_trapezoid(const Vec3& x, int stride, const RadialProfile* tube,
                            FieldValue& out) const;
  bool accumulate_panels(const Vec3& x, const RadialProfile* tube, FieldValue& out) const;

  CurveHandle curve_;
  PotentialOptions opts_;
  int n_ = 0;
  std::vector<double> px_, py_, pz_, tx_, ty_, tz_;
  std::vector<double> phi_nodes_;
  PeriodicSamples phi_;
  GaussLegendre gl_;
  struct PanelNode {
    Vec3 position;
    Vec3 tangent;
    double weight = 0.0;
    double phi = 0.0;
  };
  std::vector<PanelNode> base_nodes_;  // Gauss-Legendre nodes of the unrefined panels
  std::vector<Vec3> base_mid_;
  double speed_ = 0.0;
  double diameter_ = 0.0;
  Vec3 centroid_;
};

/// Fast route: A_i(x) x A_j(x). The two sources must be different curves.
Vec3 alpha_field(const CurveSource& si, const CurveSource& sj, const Vec3& x);

}  // namespace linkm
