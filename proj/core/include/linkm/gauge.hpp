#pragma once

// Multivalued potentials phi_{j,i} along L_i and the single-valued scalar
// potentials phi_i built from them.

#include <functional>
#include <span>

#include <nlohmann/json.hpp>

#include "linkm/linking.hpp"
#include "linkm/periodic.hpp"
#include "linkm/potentials.hpp"

namespace linkm {

enum class GaugeKind { MarkedPoint, MeanZero };
/// Measure for parameter means and marked-point averages.
enum class GaugeMeasure { Arclength, Parameter };

/// phi_{j,i}(t) = int_0^t x_i'(s) . A_j(x_i(s)) ds on L_i (0-based i, j),
/// stored as slope * t + a periodic part that vanishes at t = 0.
struct MultivaluedPotential {
  int i = 0;
  int j = 0;
  double period_increment = 0.0;  // circulation of A_j along L_i
  PeriodicSamples periodic;
  std::vector<double> derivative;  // x_i' . A_j(x_i) at the grid nodes
  double refinement_delta = 0.0;  // max node change against the half-size grid
  double spectral_tail = 0.0;

  std::size_t grid() const { return periodic.size(); }
  double slope() const { return period_increment / kTwoPi; }
  /// Lifted value at any real t.
  double operator()(double t) const;
  /// Lifted values at the grid nodes t_k = 2 pi k / grid.
  std::vector<double> values() const;
};

MultivaluedPotential build_multivalued(const CurveSet& curves, int i, int j, std::size_t grid = 2048,
                                       const PotentialOptions& opts = {});

struct ScalarPotentialTable {
  int i = 0;
  GaugeKind gauge = GaugeKind::MeanZero;
  GaugeMeasure measure = GaugeMeasure::Arclength;
  double marked_point = 0.0;
  std::array<int, 2> weights{};  // lk(i+2, i) on phi_{i+1,i}, lk(i, i+1) on phi_{i+2,i}
  PeriodicSamples phi;

  std::size_t grid() const { return phi.size(); }
  bool identically_zero() const { return weights[0] == 0 && weights[1] == 0; }
  double operator()(double t) const { return phi(t); }
};

/// Normalized quadrature weights of the gauge measure on the uniform grid.
std::vector<double> measure_weights(const PeriodicCurve& curve, std::size_t grid,
                                    GaugeMeasure measure);

/// phi_i = lk(i+2,i) phi_{i+1,i} - lk(i,i+1) phi_{i+2,i}, with the linear parts
/// dropped (they cancel exactly for integer weights), then gauge-fixed.
/// u and v are phi_{i+1,i} and phi_{i+2,i}.
ScalarPotentialTable combine_phi(const CurveSet& curves, const LinkingMatrix& lk, int i,
                                 const MultivaluedPotential& u, const MultivaluedPotential& v,
                                 GaugeKind gauge, GaugeMeasure measure = GaugeMeasure::Arclength,
                                 double marked_point = 0.0);

/// Builds both multivalued potentials and combines them. Throws
/// ConvergenceError if an lk estimate is more than 1e-3 from its integer.
ScalarPotentialTable build_phi(const CurveSet& curves, const LinkingMatrix& lk, int i,
                               GaugeKind gauge, std::size_t grid = 2048,
                               GaugeMeasure measure = GaugeMeasure::Arclength,
                               double marked_point = 0.0, const PotentialOptions& opts = {});

/// Weighted average of f over marked points t0 = 2 pi k / grid; uniform when
/// weights is empty.
double average_over_marked_points(const std::function<double(double)>& f, std::size_t grid,
                                  std::span<const double> weights = {});

nlohmann::json to_json(const ScalarPotentialTable& table);

}  // namespace linkm
