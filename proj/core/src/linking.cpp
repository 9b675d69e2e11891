#include "linkm/linking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "linkm/errors.hpp"
#include "linkm/parallel.hpp"

namespace linkm {

namespace {

std::vector<CurvePoint> sample(const PeriodicCurve& c, int n) {
  std::vector<CurvePoint> pts(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) pts[static_cast<std::size_t>(k)] = c.eval(kTwoPi * k / n);
  return pts;
}

double gauss_sum(const std::vector<CurvePoint>& pa, const std::vector<CurvePoint>& pb) {
  double total = 0.0;
  for (const auto& p : pa) {
    double row = 0.0;
    for (const auto& q : pb) {
      const Vec3 r = p.position - q.position;
      const double r2 = norm2(r);
      row += triple_product(p.tangent, q.tangent, r) / (r2 * std::sqrt(r2));
    }
    total += row;
  }
  const double ha = kTwoPi / static_cast<double>(pa.size());
  const double hb = kTwoPi / static_cast<double>(pb.size());
  return total * ha * hb / kFourPi;
}

struct Projected {
  std::vector<double> u, v, h;
};

Projected project(const PeriodicCurve& c, int n, const Vec3& e1, const Vec3& e2, const Vec3& d) {
  Projected p;
  p.u.resize(static_cast<std::size_t>(n));
  p.v.resize(static_cast<std::size_t>(n));
  p.h.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const Vec3 x = c.eval(kTwoPi * k / n).position;
    p.u[static_cast<std::size_t>(k)] = dot(x, e1);
    p.v[static_cast<std::size_t>(k)] = dot(x, e2);
    p.h[static_cast<std::size_t>(k)] = dot(x, d);
  }
  return p;
}

struct Degenerate {};

// Signed crossing sum (not halved) of two projected polygons.
int crossing_sum(const Projected& a, const Projected& b, double scale) {
  const std::size_t na = a.u.size(), nb = b.u.size();
  double lo_u = INFINITY, hi_u = -INFINITY, lo_v = INFINITY, hi_v = -INFINITY, seg = 0.0;
  for (std::size_t k = 0; k < nb; ++k) {
    lo_u = std::min(lo_u, b.u[k]), hi_u = std::max(hi_u, b.u[k]);
    lo_v = std::min(lo_v, b.v[k]), hi_v = std::max(hi_v, b.v[k]);
    const std::size_t k1 = (k + 1) % nb;
    seg = std::max(seg, std::hypot(b.u[k1] - b.u[k], b.v[k1] - b.v[k]));
  }
  const double cell = std::max({2.0 * seg, (hi_u - lo_u) / 1024.0, (hi_v - lo_v) / 1024.0, 1e-12});
  const int gu = static_cast<int>((hi_u - lo_u) / cell) + 1;
  const int gv = static_cast<int>((hi_v - lo_v) / cell) + 1;
  std::vector<std::vector<std::uint32_t>> grid(static_cast<std::size_t>(gu) * gv);
  auto cell_of = [&](double x, double lo, int g) {
    return std::clamp(static_cast<int>((x - lo) / cell), 0, g - 1);
  };
  for (std::size_t k = 0; k < nb; ++k) {
    const std::size_t k1 = (k + 1) % nb;
    const int u0 = cell_of(std::min(b.u[k], b.u[k1]), lo_u, gu);
    const int u1 = cell_of(std::max(b.u[k], b.u[k1]), lo_u, gu);
    const int v0 = cell_of(std::min(b.v[k], b.v[k1]), lo_v, gv);
    const int v1 = cell_of(std::max(b.v[k], b.v[k1]), lo_v, gv);
    for (int i = u0; i <= u1; ++i)
      for (int j = v0; j <= v1; ++j)
        grid[static_cast<std::size_t>(i) * gv + j].push_back(static_cast<std::uint32_t>(k));
  }

  const double eps = 1e-10;
  int total = 0;
  std::vector<std::uint32_t> cand;
  for (std::size_t k = 0; k < na; ++k) {
    const std::size_t k1 = (k + 1) % na;
    const double au0 = a.u[k], av0 = a.v[k], au1 = a.u[k1], av1 = a.v[k1];
    if (std::max(au0, au1) < lo_u || std::min(au0, au1) > hi_u || std::max(av0, av1) < lo_v ||
        std::min(av0, av1) > hi_v)
      continue;
    cand.clear();
    const int u0 = cell_of(std::min(au0, au1), lo_u, gu), u1 = cell_of(std::max(au0, au1), lo_u, gu);
    const int v0 = cell_of(std::min(av0, av1), lo_v, gv), v1 = cell_of(std::max(av0, av1), lo_v, gv);
    for (int i = u0; i <= u1; ++i)
      for (int j = v0; j <= v1; ++j) {
        const auto& c = grid[static_cast<std::size_t>(i) * gv + j];
        cand.insert(cand.end(), c.begin(), c.end());
      }
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    const double du = au1 - au0, dv = av1 - av0;
    for (std::uint32_t m : cand) {
      const std::size_t m1 = (m + 1) % nb;
      const double eu = b.u[m1] - b.u[m], ev = b.v[m1] - b.v[m];
      const double den = du * ev - dv * eu;
      const double wu = b.u[m] - au0, wv = b.v[m] - av0;
      const double s_num = wu * ev - wv * eu;
      const double t_num = wu * dv - wv * du;
      if (std::abs(den) <= eps * std::hypot(du, dv) * std::hypot(eu, ev)) {
        // Parallel: degenerate only if the segments actually touch.
        if (std::abs(s_num) <= eps * scale * std::hypot(du, dv) + 1e-300) throw Degenerate{};
        continue;
      }
      const double s = s_num / den, t = t_num / den;
      if (s < -eps || s > 1.0 + eps || t < -eps || t > 1.0 + eps) continue;
      if (s < eps || s > 1.0 - eps || t < eps || t > 1.0 - eps) throw Degenerate{};
      const double ha = a.h[k] + s * (a.h[k1] - a.h[k]);
      const double hb = b.h[m] + t * (b.h[m1] - b.h[m]);
      if (std::abs(ha - hb) < eps * scale) throw Degenerate{};
      const int orient = den > 0.0 ? 1 : -1;
      total += ha > hb ? orient : -orient;
    }
  }
  return total;
}

}  // namespace

Estimate gauss_linking(const PeriodicCurve& a, const PeriodicCurve& b, double tol, int n_max) {
  int n = 64;
  double value = gauss_sum(sample(a, n), sample(b, n));
  double delta = std::numeric_limits<double>::infinity();
  while (n < n_max) {
    n *= 2;
    const double next = gauss_sum(sample(a, n), sample(b, n));
    delta = std::abs(next - value);
    value = next;
    if (delta < tol) break;
  }
  Estimate e;
  e.value = value;
  e.std_error = delta;
  e.n_samples = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n);
  e.converged = delta < tol;
  return e;
}

int crossing_sign_linking(const PeriodicCurve& a, const PeriodicCurve& b, int n_poly,
                          const Vec3& direction) {
  if (n_poly < 8) throw std::invalid_argument("crossing_sign_linking: n_poly >= 8");
  Vec3 d = normalized(direction);
  CounterRng rng(0x6c696e6bULL, stream_id("crossing_sign_linking"), 0);
  for (int attempt = 0; attempt <= 10; ++attempt) {
    if (attempt > 0) d = normalized(d + 0.05 * rng.unit_vector());
    const Vec3 helper = std::abs(d.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    const Vec3 e1 = normalized(cross(d, helper));
    const Vec3 e2 = cross(d, e1);
    const Projected pa = project(a, n_poly, e1, e2, d);
    const Projected pb = project(b, n_poly, e1, e2, d);
    double scale = 0.0;
    for (std::size_t k = 0; k < pa.h.size(); ++k)
      scale = std::max({scale, std::abs(pa.u[k]), std::abs(pa.v[k]), std::abs(pa.h[k])});
    try {
      const int sum = crossing_sum(pa, pb, std::max(scale, 1.0));
      if (sum % 2 != 0) continue;
      // Seen from +d, this orientation convention matches the Gauss integral.
      return sum / 2;
    } catch (const Degenerate&) {
    }
  }
  throw ConvergenceError("crossing_sign_linking: degenerate projection after 10 retries");
}

double LinkingMatrix::max_residual() const {
  double r = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) r = std::max(r, std::abs(raw[i][j] - lk[i][j]));
  return r;
}

LinkingMatrix linking_matrix(const CurveSet& curves, double tol) {
  LinkingMatrix m;
  std::array<Estimate, 3> est;
  parallel_for(3, [&](std::size_t p) {
    const int i = static_cast<int>(p), j = (i + 1) % 3;
    est[p] = gauss_linking(*curves[static_cast<std::size_t>(i)], *curves[static_cast<std::size_t>(j)], tol);
  });
  for (int p = 0; p < 3; ++p) {
    const int i = p, j = (p + 1) % 3;
    const double v = est[static_cast<std::size_t>(p)].value;
    const double r = std::round(v);
    if (std::abs(v - r) > 1e-3)
      throw ConvergenceError("linking_matrix: Gauss integral " + std::to_string(v) +
                             " is not close to an integer");
    m.lk[i][j] = m.lk[j][i] = static_cast<int>(r);
    m.raw[i][j] = m.raw[j][i] = v;
    m.error[i][j] = m.error[j][i] = est[static_cast<std::size_t>(p)].std_error;
  }
  return m;
}

LinkingMatrix linking_matrix(const Link3& link, double tol) {
  return linking_matrix(link.curves(), tol);
}

std::array<std::array<int, 3>, 3> crossing_matrix(const CurveSet& curves, int n_poly) {
  std::array<std::array<int, 3>, 3> m{};
  std::array<int, 3> v{};
  parallel_for(3, [&](std::size_t p) {
    const int i = static_cast<int>(p), j = (i + 1) % 3;
    v[p] = crossing_sign_linking(*curves[static_cast<std::size_t>(i)], *curves[static_cast<std::size_t>(j)], n_poly);
  });
  for (int p = 0; p < 3; ++p) {
    const int i = p, j = (p + 1) % 3;
    m[i][j] = m[j][i] = v[static_cast<std::size_t>(p)];
  }
  return m;
}

}  // namespace linkm
