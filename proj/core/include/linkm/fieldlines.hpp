#pragma once

// Divergence-free fields supported in up to three thin solid tori, field-line
// tracing with first-return closure detection, asymptotic pairwise linking of
// trajectories, and the triple-averaged estimate of M over closed lines.
//
// Tube coordinates: x = c(s) + u N(s) + v Bn(s), where c is the center curve,
// T its unit tangent, N the normalized projection of a fixed reference vector
// orthogonal to T, and Bn = T x N. With h = det[dx/ds, N, Bn] the field has
// contravariant components
//   B^s = g(u, v) / h,  B^u = psi_v(u, v) / h,  B^v = -psi_u(u, v) / h,
// so h B^q does not depend on s and div B = 0 exactly.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "linkm/curves.hpp"
#include "linkm/quadrature.hpp"
#include "linkm/terms.hpp"

namespace linkm {

/// psi(u, v) = sum_k radial[k] rho^(2k+2) + (a^2 - rho^2) sum_m c_m u^p_m v^q_m.
/// The second sum vanishes on the boundary, so the field stays tangent to it.
struct StreamFunction {
  struct Monomial {
    int pu = 0;
    int pv = 0;
    double c = 0.0;
  };
  std::vector<double> radial;
  std::vector<Monomial> shear;
};

struct TubeSpec {
  Curve3 center;
  double radius = 0.1;
  std::optional<Vec3> reference;  // frame reference vector; chosen automatically if absent
  double flux = 1.0;
  /// g(u, v) proportional to 1 + sum_k transit[k] (rho / a)^(2k+2), scaled to the flux.
  std::vector<double> transit;
  StreamFunction stream;
};

/// Point in tube coordinates.
struct TubePoint {
  int tube = 0;
  double s = 0.0;  // unwrapped along a trajectory
  double u = 0.0;
  double v = 0.0;
};

struct TubeFrame {
  Vec3 position;  // c(s)
  Vec3 tangent;   // T
  Vec3 normal;    // N
  Vec3 binormal;  // Bn
  Vec3 dc;        // c'(s)
  Vec3 dnormal;   // N'(s)
  Vec3 dbinormal; // Bn'(s)
};

class FieldSystem {
 public:
  /// Throws ValidationError for more than 3 tubes, a tube thicker than its
  /// curvature radius allows, overlapping tubes, or a non-positive transit.
  explicit FieldSystem(std::vector<TubeSpec> tubes);

  int size() const { return static_cast<int>(tubes_.size()); }
  const TubeSpec& tube(int i) const { return tubes_[static_cast<std::size_t>(i)]; }
  const Vec3& reference(int i) const { return refs_[static_cast<std::size_t>(i)]; }

  TubeFrame frame(int tube, double s) const;
  Vec3 position(const TubePoint& p) const;
  /// Jacobian h = det[dx/ds, N, Bn].
  double jacobian(const TubePoint& p) const;

  double transit_density(int tube, double u, double v) const;  // g
  double stream(int tube, double u, double v) const;           // psi
  std::array<double, 2> stream_gradient(int tube, double u, double v) const;

  /// (ds/dt, du/dt, dv/dt).
  std::array<double, 3> velocity(const TubePoint& p) const;
  Vec3 field(const TubePoint& p) const;

  /// Tube coordinates of x (s in [0, 2 pi)), or nothing when x is outside every tube.
  std::optional<TubePoint> locate(const Vec3& x) const;
  /// Cartesian field; zero outside the tubes.
  Vec3 field(const Vec3& x) const;

  /// Closed form: int over the disk of g = flux.
  double flux(int tube) const { return tube_flux_[static_cast<std::size_t>(tube)]; }

 private:
  std::vector<TubeSpec> tubes_;
  std::vector<Vec3> refs_;
  std::vector<double> g0_;
  std::vector<double> tube_flux_;
};

/// Pure transit (psi = 0, uniform g) tubes of radius `radius` around the components of `link`.
FieldSystem transit_field(const Link3& link, double radius, double flux = 1.0);
/// Uniform transit plus rigid rotation of the cross-section by `rotation` turns per transit.
FieldSystem twisted_field(const Link3& link, double radius, double rotation, double flux = 1.0);

struct TraceOptions {
  double tol = 1e-11;            // per-step absolute and relative tolerance
  double dt_out = 0.0;           // output grid; 0: 1/64 of the first transit time estimate
  double closure_rel = 1e-7;     // closure tolerance in tube diameters
  bool stop_on_close = false;
  double boundary_slack = 1e-6;  // relative overshoot of the tube radius tolerated
};

struct TraceResult {
  int tube = 0;
  std::vector<double> times;
  std::vector<Vec3> points;
  std::vector<TubePoint> coords;
  std::vector<double> returns;  // times of crossings of the section through x0
  bool closed = false;
  double period = 0.0;          // t0 when closed
  int transits = 0;             // transits until closure
  double closure_error = 0.0;   // |g^t0(x0) - x0| when closed
  double max_stream_drift = 0.0;
};

/// Integrates dx/dt = B(x) from x0 for time T. Throws ValidationError when x0 is
/// outside every tube and TraceError when the trajectory leaves its tube.
TraceResult trace(const FieldSystem& field, const Vec3& x0, double T, const TraceOptions& opts = {});

struct CesaroEstimate {
  std::vector<double> checkpoints;  // T_1 < ... < T_k
  std::vector<double> values;       // Gauss integral / (transits_a * transits_b)
  std::vector<double> raw;          // Gauss integral / T^2
  double limit = 0.0;               // Richardson in 1/T over the last 4 checkpoints
  double spread = 0.0;              // max deviation among the last 3 checkpoints
  double lower = 0.0;               // min / max over the checkpoints
  double upper = 0.0;
};

struct LinkingOptions {
  int checkpoints = 8;           // T_max / 2^(k-1) ... T_max
  int points_per_transit = 64;
  TraceOptions trace;
};

/// Closed polygon Gauss linking sum; exact for polygons.
double polygon_linking(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

/// Throws ValidationError when x0 and y0 lie in the same tube.
CesaroEstimate asymptotic_linking(const FieldSystem& field, const Vec3& x0, const Vec3& y0,
                                  double T_max, const LinkingOptions& opts = {});

struct ClosedLine {
  Curve3 curve;
  double period = 0.0;
  int transits = 0;
  double closure_error = 0.0;
  double fit_error = 0.0;  // max distance at off-grid points, bounds the Hausdorff distance
};

struct ClosedLineOptions {
  int max_transits = 64;
  double tol = 1e-13;
  double closure_rel = 1e-7;
  double fit_tol = 1e-6;
  int max_order = 512;
};

/// The line through (u0, v0) on the section s = 0 of `tube`, fitted by a Fourier
/// curve; nothing when it does not close within max_transits.
std::optional<ClosedLine> closed_line(const FieldSystem& field, int tube, double u0, double v0,
                                      const ClosedLineOptions& opts = {});

/// Point on the disk with density proportional to the transit density g.
std::array<double, 2> sample_section(const FieldSystem& field, int tube, CounterRng& rng);

struct ErgodicOptions {
  int n_triples = 32;
  std::uint64_t seed = 1;
  MOptions m;  // seed is overridden per triple
  ClosedLineOptions line;
  bool period_weighted = false;
  double max_skip_fraction = 0.05;
};

struct ErgodicResult {
  Estimate M;
  int used = 0;
  int skipped = 0;
  std::vector<double> values;  // per used triple
  std::vector<double> std_errors;
  std::vector<double> weights;
};

/// Mean of assemble_M over ordered triples of closed lines, one line per tube,
/// sampled flux-uniformly. Throws ConvergenceError when more than
/// max_skip_fraction of the triples have a line that does not close.
ErgodicResult ergodic_M(const FieldSystem& field, const ErgodicOptions& opts = {});

// linkm-field-v1 documents:
//   {"schema": "linkm-field-v1",
//    "tubes": [{"center": <curve>, "radius": a, "flux": F, "reference": [x, y, z],
//               "transit": [t1, ...],
//               "stream": {"radial": [w1, ...], "shear": [{"u": p, "v": q, "c": c}, ...]}}]}
inline constexpr const char* kFieldSchema = "linkm-field-v1";

nlohmann::json to_json(const FieldSystem& field);
FieldSystem field_from_json(const nlohmann::json& j);
FieldSystem read_field_file(const std::string& path);

nlohmann::json to_json(const CesaroEstimate& c);
nlohmann::json to_json(const ErgodicResult& r);

}  // namespace linkm
