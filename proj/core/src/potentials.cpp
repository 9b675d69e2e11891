#include "linkm/potentials.hpp"

#include <algorithm>
#include <cmath>

#include "linkm/errors.hpp"

namespace linkm {

namespace {

constexpr double kInvFourPi = 1.0 / kFourPi;

inline double kernel_scale(double r2, KernelKind kind) {
  return kind == KernelKind::Cubed ? 1.0 / (r2 * std::sqrt(r2)) : 1.0 / r2;
}

// Accepted when the panel stays this many panel lengths away from x (in
// parameter units); 16-point Gauss-Legendre is then accurate to ~1e-16.
constexpr double kPanelClearance = 0.75;
constexpr int kBasePanels = 16;

}  // namespace

Vec3 kernel_A(const Vec3& source, const Vec3& tangent, const Vec3& x, KernelKind kind) {
  const Vec3 r = x - source;
  const double r2 = norm2(r);
  if (r2 < kHardFloor * kHardFloor) throw SingularPointError("kernel_A: x coincides with source");
  return cross(tangent, r) * (kernel_scale(r2, kind) * kInvFourPi);
}

Vec3 alpha_pair(const CurvePoint& xi, const CurvePoint& xj, const Vec3& x, KernelKind kind) {
  return cross(kernel_A(xi.position, xi.tangent, x, kind),
               kernel_A(xj.position, xj.tangent, x, kind));
}

PotentialValue curve_potential(const PeriodicCurve& curve, const Vec3& x, int order,
                               KernelKind kind, double near_floor) {
  if (order < 4 || order % 2 != 0) throw std::invalid_argument("curve_potential: even order >= 4");
  PotentialValue out;
  Vec3 even, odd;
  double dmin2 = INFINITY;
  for (int k = 0; k < order; ++k) {
    const auto p = curve.eval(kTwoPi * k / order);
    const Vec3 r = x - p.position;
    const double r2 = norm2(r);
    dmin2 = std::min(dmin2, r2);
    if (r2 < kHardFloor * kHardFloor) throw SingularPointError("curve_potential: x on the curve");
    const Vec3 K = cross(p.tangent, r) * kernel_scale(r2, kind);
    (k % 2 == 0 ? even : odd) += K;
  }
  const double h = kTwoPi / order;
  out.value = (even + odd) * (h * kInvFourPi);
  const Vec3 coarse = even * (2.0 * h * kInvFourPi);
  out.refinement_delta = norm(out.value - coarse);
  out.near_singular = std::sqrt(dmin2) < near_floor;
  return out;
}

Vec3 phi_weighted_potential(const PeriodicCurve& curve, const PeriodicSamples& phi, const Vec3& x,
                            int order, KernelKind kind) {
  if (order <= 0 || phi.size() % static_cast<std::size_t>(order) != 0)
    throw ValidationError("phi_weighted_potential: phi grid does not match the quadrature grid");
  const auto w = phi.on_grid(static_cast<std::size_t>(order));
  Vec3 acc;
  for (int k = 0; k < order; ++k) {
    if (w[static_cast<std::size_t>(k)] == 0.0) continue;
    const auto p = curve.eval(kTwoPi * k / order);
    acc += w[static_cast<std::size_t>(k)] * kernel_A(p.position, p.tangent, x, kind);
  }
  return acc * (kTwoPi / order);
}

Vec3 alpha_field_double_integral(const PeriodicCurve& ci, const PeriodicCurve& cj, const Vec3& x,
                                 int order, KernelKind kind) {
  if (&ci == &cj) throw ValidationError("alpha_field: i and j must be different curves");
  std::vector<CurvePoint> pj(static_cast<std::size_t>(order));
  for (int k = 0; k < order; ++k) pj[static_cast<std::size_t>(k)] = cj.eval(kTwoPi * k / order);
  Vec3 acc;
  for (int a = 0; a < order; ++a) {
    const auto p = ci.eval(kTwoPi * a / order);
    Vec3 row;
    for (const auto& q : pj) row += alpha_pair(p, q, x, kind);
    acc += row;
  }
  const double h = kTwoPi / order;
  return acc * (h * h);
}

CurveSource::CurveSource(CurveHandle curve, PotentialOptions opts)
    : curve_(std::move(curve)), opts_(opts) {
  if (!curve_) throw std::invalid_argument("CurveSource: null curve");
  n_ = opts_.nodes;
  if (n_ < 8 || (n_ & (n_ - 1)) != 0) throw ValidationError("CurveSource: nodes must be a power of 2");
  opts_.min_nodes = std::clamp(opts_.min_nodes, 8, n_);
  opts_.max_depth = std::clamp(opts_.max_depth, 0, 60);
  const auto n = static_cast<std::size_t>(n_);
  px_.resize(n), py_.resize(n), pz_.resize(n), tx_.resize(n), ty_.resize(n), tz_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto p = curve_->eval(kTwoPi * static_cast<double>(k) / n_);
    px_[k] = p.position.x, py_[k] = p.position.y, pz_[k] = p.position.z;
    tx_[k] = p.tangent.x, ty_[k] = p.tangent.y, tz_[k] = p.tangent.z;
    centroid_ += p.position;
  }
  centroid_ = centroid_ / n_;
  speed_ = curve_->speed_bound();
  const std::size_t stride = std::max<std::size_t>(1, n / 128);
  for (std::size_t a = 0; a < n; a += stride)
    for (std::size_t b = a + stride; b < n; b += stride) {
      const double d2 = (px_[a] - px_[b]) * (px_[a] - px_[b]) + (py_[a] - py_[b]) * (py_[a] - py_[b]) +
                        (pz_[a] - pz_[b]) * (pz_[a] - pz_[b]);
      diameter_ = std::max(diameter_, d2);
    }
  diameter_ = std::sqrt(diameter_);
  gl_ = gauss_legendre(opts_.panel_order);
  const std::size_t order = gl_.x.size();
  base_nodes_.resize(kBasePanels * order);
  base_mid_.resize(kBasePanels);
  for (int j = 0; j < kBasePanels; ++j) {
    const double a = kTwoPi * j / kBasePanels, half = 0.5 * kTwoPi / kBasePanels;
    base_mid_[static_cast<std::size_t>(j)] = curve_->eval(a + half).position;
    for (std::size_t g = 0; g < order; ++g) {
      const auto p = curve_->eval(a + half + half * gl_.x[g]);
      base_nodes_[static_cast<std::size_t>(j) * order + g] = {p.position, p.tangent, half * gl_.w[g], 0.0};
    }
  }
}

void CurveSource::set_weight(PeriodicSamples phi) {
  phi_ = std::move(phi);
  if (phi_.empty()) {
    phi_nodes_.clear();
    for (auto& b : base_nodes_) b.phi = 0.0;
    return;
  }
  phi_nodes_ = phi_.on_grid(static_cast<std::size_t>(n_));
  const std::size_t order = gl_.x.size();
  for (int j = 0; j < kBasePanels; ++j) {
    const double a = kTwoPi * j / kBasePanels, half = 0.5 * kTwoPi / kBasePanels;
    for (std::size_t g = 0; g < order; ++g)
      base_nodes_[static_cast<std::size_t>(j) * order + g].phi = phi_(wrap_angle(a + half + half * gl_.x[g]));
  }
}

double CurveSource::radius_about(const Vec3& c) const {
  double r2 = 0.0;
  for (std::size_t k = 0; k < px_.size(); ++k)
    r2 = std::max(r2, norm2(Vec3{px_[k], py_[k], pz_[k]} - c));
  return std::sqrt(r2);
}

void CurveSource::accumulate_trapezoid(const Vec3& x, int stride, const RadialProfile* tube,
                                       FieldValue& out) const {
  const bool cubed = opts_.kernel == KernelKind::Cubed;
  const bool weighted = has_weight();
  double ax = 0, ay = 0, az = 0, bx = 0, by = 0, bz = 0, dens = 0;
  for (int k = 0; k < n_; k += stride) {
    const auto i = static_cast<std::size_t>(k);
    const double rx = x.x - px_[i], ry = x.y - py_[i], rz = x.z - pz_[i];
    const double r2 = rx * rx + ry * ry + rz * rz;
    const double s = cubed ? 1.0 / (r2 * std::sqrt(r2)) : 1.0 / r2;
    const double kx = (ty_[i] * rz - tz_[i] * ry) * s;
    const double ky = (tz_[i] * rx - tx_[i] * rz) * s;
    const double kz = (tx_[i] * ry - ty_[i] * rx) * s;
    ax += kx, ay += ky, az += kz;
    if (weighted) {
      const double w = phi_nodes_[i];
      bx += w * kx, by += w * ky, bz += w * kz;
    }
    if (tube) dens += tube->density(r2);
  }
  const int m = n_ / stride;
  const double h = 1.0 / (2.0 * m);  // (2pi / m) / (4pi)
  out.A = Vec3{ax, ay, az} * h;
  out.A_phi = Vec3{bx, by, bz} * h;
  out.tube_density = dens / m;
}

bool CurveSource::accumulate_panels(const Vec3& x, const RadialProfile* tube,
                                    FieldValue& out) const {
  struct Panel {
    double a, b;
    int depth;
  };
  Panel stack[2 * kBasePanels + 64];
  int top = 0;
  for (int j = kBasePanels - 1; j >= 0; --j)
    stack[top++] = {kTwoPi * j / kBasePanels, kTwoPi * (j + 1) / kBasePanels, 0};
  const bool weighted = has_weight();
  const double floor2 = std::pow(kHardFloor * std::max(1.0, diameter_), 2);
  Vec3 A, B;
  double dens = 0.0;
  const std::size_t order = gl_.x.size();
  while (top > 0) {
    const Panel p = stack[--top];
    const double len = p.b - p.a;
    const double mid = 0.5 * (p.a + p.b);
    const bool base = p.depth == 0;
    const std::size_t j = base ? static_cast<std::size_t>(std::lround(p.a * kBasePanels / kTwoPi)) : 0;
    const double dmid = norm(x - (base ? base_mid_[j] : curve_->eval(mid).position));
    if (dmid - 0.5 * speed_ * len < kPanelClearance * speed_ * len) {
      if (p.depth >= opts_.max_depth || dmid * dmid < floor2) return false;
      stack[top++] = {mid, p.b, p.depth + 1};
      stack[top++] = {p.a, mid, p.depth + 1};
      continue;
    }
    const double half = 0.5 * len;
    for (std::size_t g = 0; g < order; ++g) {
      PanelNode node;
      if (base) {
        node = base_nodes_[j * order + g];
      } else {
        const double t = mid + half * gl_.x[g];
        const auto c = curve_->eval(t);
        node = {c.position, c.tangent, half * gl_.w[g], weighted ? phi_(wrap_angle(t)) : 0.0};
      }
      const Vec3 r = x - node.position;
      const double r2 = norm2(r);
      const Vec3 K = cross(node.tangent, r) * (node.weight * kernel_scale(r2, opts_.kernel));
      A += K;
      if (weighted) B += node.phi * K;
      if (tube) dens += node.weight * tube->density(r2);
    }
  }
  out.A = A * kInvFourPi;
  out.A_phi = B * kInvFourPi;
  out.tube_density = dens / kTwoPi;
  return true;
}

FieldValue CurveSource::evaluate(const Vec3& x, const RadialProfile* tube) const {
  FieldValue out;
  const double floor_abs = opts_.near_floor * diameter_;
  auto required = [&](int m) {
    return std::max(opts_.near_factor * speed_ * kTwoPi / m, floor_abs);
  };

  // Lower bound on the distance from the coarsest grid.
  const int bound_nodes = std::min(n_, std::max(opts_.min_nodes, 128));
  const int coarse_stride = n_ / bound_nodes;
  double d2 = INFINITY;
  for (int k = 0; k < n_; k += coarse_stride) {
    const auto i = static_cast<std::size_t>(k);
    const double rx = x.x - px_[i], ry = x.y - py_[i], rz = x.z - pz_[i];
    d2 = std::min(d2, rx * rx + ry * ry + rz * rz);
  }
  const double lb = std::sqrt(d2) - speed_ * kPi / bound_nodes;
  for (int m = opts_.min_nodes; m <= n_; m *= 2) {
    if (lb >= required(m)) {
      accumulate_trapezoid(x, n_ / m, tube, out);
      return out;
    }
  }
  // Refine the bound on the finest grid before giving up on the trapezoid.
  for (int k = 0; k < n_; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const double rx = x.x - px_[i], ry = x.y - py_[i], rz = x.z - pz_[i];
    d2 = std::min(d2, rx * rx + ry * ry + rz * rz);
  }
  if (std::sqrt(d2) - speed_ * kPi / n_ >= required(n_)) {
    accumulate_trapezoid(x, 1, tube, out);
    return out;
  }
  out.near = true;
  if (!accumulate_panels(x, tube, out)) {
    out = FieldValue{};
    out.near = true;
    out.singular = true;
  }
  return out;
}

Vec3 CurveSource::potential(const Vec3& x) const {
  const auto v = evaluate(x);
  if (v.singular) throw SingularPointError("CurveSource::potential: x on the curve");
  return v.A;
}

Vec3 alpha_field(const CurveSource& si, const CurveSource& sj, const Vec3& x) {
  if (si.handle() == sj.handle() || &si.curve() == &sj.curve())
    throw ValidationError("alpha_field: i and j must be different curves");
  return cross(si.potential(x), sj.potential(x));
}

}  // namespace linkm
