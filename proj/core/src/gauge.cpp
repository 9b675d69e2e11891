#include "linkm/gauge.hpp"

#include <algorithm>
#include <cmath>

#include "linkm/errors.hpp"
#include "linkm/parallel.hpp"

namespace linkm {

namespace {

std::vector<double> circulation_density(const PeriodicCurve& ci, const CurveSource& sj,
                                        std::size_t grid) {
  std::vector<double> g(grid);
  const std::size_t chunk = 64;
  parallel_for((grid + chunk - 1) / chunk, [&](std::size_t c) {
    for (std::size_t k = c * chunk; k < std::min(grid, (c + 1) * chunk); ++k) {
      const auto p = ci.eval(kTwoPi * static_cast<double>(k) / static_cast<double>(grid));
      g[k] = dot(p.tangent, sj.potential(p.position));
    }
  });
  return g;
}

void check_integer(const LinkingMatrix& lk, int a, int b) {
  const double raw = lk.raw[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
  if (std::abs(raw - std::round(raw)) > 1e-3)
    throw ConvergenceError("build_phi: linking estimate " + std::to_string(raw) +
                           " is not an integer; upstream quadrature did not converge");
}

}  // namespace

double MultivaluedPotential::operator()(double t) const {
  return slope() * t + periodic(wrap_angle(t));
}

std::vector<double> MultivaluedPotential::values() const {
  std::vector<double> v = periodic.values();
  for (std::size_t k = 0; k < v.size(); ++k)
    v[k] += slope() * kTwoPi * static_cast<double>(k) / static_cast<double>(v.size());
  return v;
}

MultivaluedPotential build_multivalued(const CurveSet& curves, int i, int j, std::size_t grid,
                                       const PotentialOptions& opts) {
  if (i == j || i < 0 || i > 2 || j < 0 || j > 2)
    throw ValidationError("build_multivalued: need distinct component indices in 0..2");
  if (grid < 16 || (grid & (grid - 1)) != 0)
    throw ValidationError("build_multivalued: grid must be a power of 2 >= 16");
  const CurveSource sj(curves[static_cast<std::size_t>(j)], opts);
  const auto g = circulation_density(*curves[static_cast<std::size_t>(i)], sj, grid);
  const Antiderivative fine = spectral_antiderivative(g);

  std::vector<double> half(grid / 2);
  for (std::size_t k = 0; k < half.size(); ++k) half[k] = g[2 * k];
  const Antiderivative coarse = spectral_antiderivative(half);

  MultivaluedPotential m;
  m.i = i;
  m.j = j;
  m.period_increment = kTwoPi * fine.slope;
  m.periodic = PeriodicSamples(fine.periodic);
  for (std::size_t k = 0; k < half.size(); ++k) {
    const double t = kTwoPi * static_cast<double>(k) / static_cast<double>(half.size());
    const double a = fine.slope * t + fine.periodic[2 * k];
    const double b = coarse.slope * t + coarse.periodic[k];
    m.refinement_delta = std::max(m.refinement_delta, std::abs(a - b));
  }
  m.spectral_tail = spectral_tail(g);
  m.derivative = g;
  return m;
}

std::vector<double> measure_weights(const PeriodicCurve& curve, std::size_t grid,
                                    GaugeMeasure measure) {
  std::vector<double> w(grid, 1.0 / static_cast<double>(grid));
  if (measure == GaugeMeasure::Parameter) return w;
  double total = 0.0;
  for (std::size_t k = 0; k < grid; ++k) {
    w[k] = norm(curve.eval(kTwoPi * static_cast<double>(k) / static_cast<double>(grid)).tangent);
    total += w[k];
  }
  for (auto& v : w) v /= total;
  return w;
}

ScalarPotentialTable combine_phi(const CurveSet& curves, const LinkingMatrix& lk, int i,
                                 const MultivaluedPotential& u, const MultivaluedPotential& v,
                                 GaugeKind gauge, GaugeMeasure measure, double marked_point) {
  const int i1 = (i + 1) % 3, i2 = (i + 2) % 3;
  if (u.i != i || u.j != i1 || v.i != i || v.j != i2)
    throw ValidationError("combine_phi: expected phi_{i+1,i} and phi_{i+2,i}");
  if (u.grid() != v.grid()) throw ValidationError("combine_phi: grid mismatch");
  check_integer(lk, i, i1);
  check_integer(lk, i, i2);

  ScalarPotentialTable t;
  t.i = i;
  t.gauge = gauge;
  t.measure = measure;
  t.marked_point = marked_point;
  t.weights = {lk(i2, i), lk(i, i1)};
  const std::size_t n = u.grid();
  std::vector<double> phi(n, 0.0);
  if (!t.identically_zero()) {
    for (std::size_t k = 0; k < n; ++k)
      phi[k] = t.weights[0] * u.periodic.values()[k] - t.weights[1] * v.periodic.values()[k];
    double shift = 0.0;
    if (gauge == GaugeKind::MarkedPoint) {
      shift = PeriodicSamples(phi)(wrap_angle(marked_point));
    } else {
      const auto w = measure_weights(*curves[static_cast<std::size_t>(i)], n, measure);
      for (std::size_t k = 0; k < n; ++k) shift += w[k] * phi[k];
    }
    for (auto& p : phi) p -= shift;
  }
  t.phi = PeriodicSamples(std::move(phi));
  return t;
}

ScalarPotentialTable build_phi(const CurveSet& curves, const LinkingMatrix& lk, int i,
                               GaugeKind gauge, std::size_t grid, GaugeMeasure measure,
                               double marked_point, const PotentialOptions& opts) {
  const int i1 = (i + 1) % 3, i2 = (i + 2) % 3;
  check_integer(lk, i, i1);
  check_integer(lk, i, i2);
  if (lk(i2, i) == 0 && lk(i, i1) == 0) {
    ScalarPotentialTable t;
    t.i = i;
    t.gauge = gauge;
    t.measure = measure;
    t.marked_point = marked_point;
    t.phi = PeriodicSamples(std::vector<double>(grid, 0.0));
    return t;
  }
  const auto u = build_multivalued(curves, i, i1, grid, opts);
  const auto v = build_multivalued(curves, i, i2, grid, opts);
  return combine_phi(curves, lk, i, u, v, gauge, measure, marked_point);
}

double average_over_marked_points(const std::function<double(double)>& f, std::size_t grid,
                                  std::span<const double> weights) {
  if (grid == 0) throw std::invalid_argument("average_over_marked_points: empty grid");
  if (!weights.empty() && weights.size() != grid)
    throw ValidationError("average_over_marked_points: weight grid mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < grid; ++k) {
    const double w = weights.empty() ? 1.0 / static_cast<double>(grid) : weights[k];
    acc += w * f(kTwoPi * static_cast<double>(k) / static_cast<double>(grid));
  }
  return acc;
}

nlohmann::json to_json(const ScalarPotentialTable& table) {
  nlohmann::json j;
  j["component"] = table.i + 1;
  j["gauge"] = table.gauge == GaugeKind::MeanZero ? "mean_zero" : "marked_point";
  j["measure"] = table.measure == GaugeMeasure::Arclength ? "arclength" : "parameter";
  if (table.gauge == GaugeKind::MarkedPoint) j["marked_point"] = table.marked_point;
  j["weights"] = table.weights;
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t k = 0; k < table.grid(); ++k)
    nodes.push_back(kTwoPi * static_cast<double>(k) / static_cast<double>(table.grid()));
  j["nodes"] = std::move(nodes);
  j["values"] = table.phi.values();
  return j;
}

}  // namespace linkm
