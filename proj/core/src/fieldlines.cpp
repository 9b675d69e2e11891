#include "linkm/fieldlines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/numeric/odeint.hpp>

#include "linkm/errors.hpp"
#include "linkm/parallel.hpp"
#include "linkm/rng.hpp"

namespace linkm {

namespace odeint = boost::numeric::odeint;

namespace {

using State3 = std::array<double, 3>;

constexpr int kFrameGrid = 512;

double max_abs_tangent_dot(const Curve3& c, const Vec3& e) {
  double m = 0.0;
  for (int k = 0; k < kFrameGrid; ++k) {
    const Vec3 t = normalized(c.eval(kTwoPi * k / kFrameGrid).tangent);
    m = std::max(m, std::abs(dot(t, e)));
  }
  return m;
}

// Axes first, then a Fibonacci sphere; the first direction least aligned with
// the tangent wins.
Vec3 choose_reference(const Curve3& c) {
  std::vector<Vec3> cand{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  const int n = 256;
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (i + 0.5) / n;  // upper hemisphere suffices
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    cand.push_back({r * std::cos(golden * i), r * std::sin(golden * i), z});
  }
  Vec3 best = cand[0];
  double best_m = 2.0;
  for (const auto& e : cand) {
    const double m = max_abs_tangent_dot(c, e);
    if (m < best_m - 1e-12) {
      best_m = m;
      best = e;
    }
  }
  return best;
}

double max_curvature(const Curve3& c) {
  double k = 0.0;
  for (int i = 0; i < kFrameGrid; ++i) {
    const auto j = c.jet(kTwoPi * i / kFrameGrid);
    const double sp = norm(j[1]);
    k = std::max(k, norm(cross(j[1], j[2])) / (sp * sp * sp));
  }
  return k;
}

// 1 + sum_k t_k x^(k+1) for x = rho^2 / a^2
double transit_profile(const std::vector<double>& t, double x) {
  double p = 1.0, xk = x;
  for (double c : t) {
    p += c * xk;
    xk *= x;
  }
  return p;
}

double ipow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

}  // namespace

FieldSystem::FieldSystem(std::vector<TubeSpec> tubes) : tubes_(std::move(tubes)) {
  if (tubes_.empty() || tubes_.size() > 3) throw ValidationError("FieldSystem: 1 to 3 tubes");
  for (std::size_t i = 0; i < tubes_.size(); ++i) {
    const auto& t = tubes_[i];
    const std::string name = "tube " + std::to_string(i);
    if (!(t.radius > 0.0)) throw ValidationError(name + ": radius must be positive");
    if (!(t.flux > 0.0)) throw ValidationError(name + ": flux must be positive");
    t.center.validate();
    if (t.radius * max_curvature(t.center) >= 0.5)
      throw ValidationError(name + ": radius must stay below half the curvature radius");
    for (int k = 0; k <= 200; ++k)
      if (transit_profile(t.transit, k / 200.0) <= 0.0)
        throw ValidationError(name + ": transit density must be positive on the disk");
    Vec3 e = t.reference ? normalized(*t.reference) : choose_reference(t.center);
    if (max_abs_tangent_dot(t.center, e) > 0.99)
      throw ValidationError(name + ": reference vector is (nearly) tangent to the center curve");
    refs_.push_back(e);
    double m = 1.0;
    for (std::size_t k = 0; k < t.transit.size(); ++k) m += t.transit[k] / static_cast<double>(k + 2);
    g0_.push_back(t.flux / (kPi * t.radius * t.radius * m));
    tube_flux_.push_back(t.flux);
  }
  for (std::size_t i = 0; i < tubes_.size(); ++i)
    for (std::size_t j = i + 1; j < tubes_.size(); ++j)
      if (min_separation(tubes_[i].center, tubes_[j].center) <= tubes_[i].radius + tubes_[j].radius)
        throw ValidationError("tubes " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
}

TubeFrame FieldSystem::frame(int tube, double s) const {
  const auto& c = tubes_[static_cast<std::size_t>(tube)].center;
  const Vec3& e = refs_[static_cast<std::size_t>(tube)];
  const auto j = c.jet(s);
  const double sp = norm(j[1]);
  const Vec3 T = j[1] / sp;
  const Vec3 dT = (j[2] - dot(T, j[2]) * T) / sp;
  const double eT = dot(e, T);
  const Vec3 P = e - eT * T;
  const Vec3 dP = -dot(e, dT) * T - eT * dT;
  const double pn = norm(P);
  const Vec3 N = P / pn;
  const Vec3 dN = (dP - dot(N, dP) * N) / pn;
  return {j[0], T, N, cross(T, N), j[1], dN, cross(dT, N) + cross(T, dN)};
}

Vec3 FieldSystem::position(const TubePoint& p) const {
  const auto f = frame(p.tube, p.s);
  return f.position + p.u * f.normal + p.v * f.binormal;
}

double FieldSystem::jacobian(const TubePoint& p) const {
  const auto f = frame(p.tube, p.s);
  return dot(f.dc + p.u * f.dnormal + p.v * f.dbinormal, f.tangent);
}

double FieldSystem::transit_density(int tube, double u, double v) const {
  const auto& t = tubes_[static_cast<std::size_t>(tube)];
  return g0_[static_cast<std::size_t>(tube)] *
         transit_profile(t.transit, (u * u + v * v) / (t.radius * t.radius));
}

double FieldSystem::stream(int tube, double u, double v) const {
  const auto& t = tubes_[static_cast<std::size_t>(tube)];
  const double r2 = u * u + v * v;
  double psi = 0.0, rk = r2;
  for (double w : t.stream.radial) {
    psi += w * rk;
    rk *= r2;
  }
  double sh = 0.0;
  for (const auto& m : t.stream.shear) sh += m.c * ipow(u, m.pu) * ipow(v, m.pv);
  return psi + (t.radius * t.radius - r2) * sh;
}

std::array<double, 2> FieldSystem::stream_gradient(int tube, double u, double v) const {
  const auto& t = tubes_[static_cast<std::size_t>(tube)];
  const double r2 = u * u + v * v;
  // d/du sum w_k r2^(k+1) = sum w_k (k+1) r2^k 2u
  double dr = 0.0, rk = 1.0;
  for (std::size_t k = 0; k < t.stream.radial.size(); ++k) {
    dr += t.stream.radial[k] * static_cast<double>(k + 1) * rk;
    rk *= r2;
  }
  double S = 0.0, Su = 0.0, Sv = 0.0;
  for (const auto& m : t.stream.shear) {
    S += m.c * ipow(u, m.pu) * ipow(v, m.pv);
    if (m.pu > 0) Su += m.c * m.pu * ipow(u, m.pu - 1) * ipow(v, m.pv);
    if (m.pv > 0) Sv += m.c * m.pv * ipow(u, m.pu) * ipow(v, m.pv - 1);
  }
  const double w = t.radius * t.radius - r2;
  return {2.0 * u * dr - 2.0 * u * S + w * Su, 2.0 * v * dr - 2.0 * v * S + w * Sv};
}

std::array<double, 3> FieldSystem::velocity(const TubePoint& p) const {
  const double h = jacobian(p);
  const auto gp = stream_gradient(p.tube, p.u, p.v);
  return {transit_density(p.tube, p.u, p.v) / h, gp[1] / h, -gp[0] / h};
}

Vec3 FieldSystem::field(const TubePoint& p) const {
  const auto f = frame(p.tube, p.s);
  const Vec3 xs = f.dc + p.u * f.dnormal + p.v * f.dbinormal;
  const double h = dot(xs, f.tangent);
  const auto gp = stream_gradient(p.tube, p.u, p.v);
  const double g = transit_density(p.tube, p.u, p.v);
  return (g * xs + gp[1] * f.normal - gp[0] * f.binormal) / h;
}

std::optional<TubePoint> FieldSystem::locate(const Vec3& x) const {
  for (int i = 0; i < size(); ++i) {
    const auto& t = tubes_[static_cast<std::size_t>(i)];
    double best_s = 0.0, best_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < kFrameGrid; ++k) {
      const double s = kTwoPi * k / kFrameGrid;
      const double d = norm2(x - t.center.eval(s).position);
      if (d < best_d) {
        best_d = d;
        best_s = s;
      }
    }
    if (best_d > 4.0 * t.radius * t.radius + 1.0) continue;
    // Newton on (x - c(s)) . c'(s) = 0
    double s = best_s;
    for (int it = 0; it < 50; ++it) {
      const auto j = t.center.jet(s);
      const Vec3 r = x - j[0];
      const double f = dot(r, j[1]);
      const double df = -dot(j[1], j[1]) + dot(r, j[2]);
      if (df >= 0.0) break;
      const double step = f / df;
      s -= step;
      if (std::abs(step) < 1e-15) break;
    }
    s = wrap_angle(s);
    const auto fr = frame(i, s);
    const Vec3 r = x - fr.position;
    const double u = dot(r, fr.normal), v = dot(r, fr.binormal);
    if (u * u + v * v <= t.radius * t.radius) return TubePoint{i, s, u, v};
  }
  return std::nullopt;
}

Vec3 FieldSystem::field(const Vec3& x) const {
  const auto p = locate(x);
  return p ? field(*p) : Vec3{};
}

FieldSystem transit_field(const Link3& link, double radius, double flux) {
  std::vector<TubeSpec> tubes;
  for (const auto& c : link.components()) {
    TubeSpec t;
    t.center = c;
    t.radius = radius;
    t.flux = flux;
    tubes.push_back(std::move(t));
  }
  return FieldSystem(std::move(tubes));
}

FieldSystem twisted_field(const Link3& link, double radius, double rotation, double flux) {
  std::vector<TubeSpec> tubes;
  const double g0 = flux / (kPi * radius * radius);
  for (const auto& c : link.components()) {
    TubeSpec t;
    t.center = c;
    t.radius = radius;
    t.flux = flux;
    // dtheta/ds = -2 w / g0, so one transit turns the section by -4 pi w / g0.
    t.stream.radial = {-0.5 * rotation * g0};
    tubes.push_back(std::move(t));
  }
  return FieldSystem(std::move(tubes));
}

// ---------------------------------------------------------------------------
// Tracing

namespace {

struct TimeSystem {
  const FieldSystem* field;
  int tube;
  void operator()(const State3& y, State3& dy, double) const {
    const auto v = field->velocity({tube, y[0], y[1], y[2]});
    dy = {v[0], v[1], v[2]};
  }
};

double transit_time_estimate(const FieldSystem& f, const TubePoint& p) {
  const int n = 64;
  double t = 0.0;
  for (int k = 0; k < n; ++k) {
    const TubePoint q{p.tube, p.s + kTwoPi * k / n, p.u, p.v};
    t += 1.0 / f.velocity(q)[0];
  }
  return t * kTwoPi / n;
}

}  // namespace

TraceResult trace(const FieldSystem& field, const Vec3& x0, double T, const TraceOptions& opts) {
  if (!(T > 0.0)) throw ValidationError("trace: T must be positive");
  const auto start = field.locate(x0);
  if (!start) throw ValidationError("trace: starting point is outside every tube");
  const int tube = start->tube;
  const double a = field.tube(tube).radius;
  const double psi0 = field.stream(tube, start->u, start->v);
  const double dt_out = opts.dt_out > 0.0 ? opts.dt_out : transit_time_estimate(field, *start) / 64.0;
  const double close_tol = opts.closure_rel * 2.0 * a;

  TraceResult res;
  res.tube = tube;
  TimeSystem sys{&field, tube};
  auto stepper = odeint::make_dense_output(opts.tol, opts.tol, odeint::runge_kutta_dopri5<State3>());
  State3 y{start->s, start->u, start->v};
  stepper.initialize(y, 0.0, dt_out / 4.0);

  auto record = [&](double t, const State3& st) {
    const TubePoint p{tube, st[0], st[1], st[2]};
    res.times.push_back(t);
    res.coords.push_back(p);
    res.points.push_back(field.position(p));
    res.max_stream_drift = std::max(res.max_stream_drift, std::abs(field.stream(tube, st[1], st[2]) - psi0));
  };
  record(0.0, y);

  std::size_t next_out = 1;
  int next_return = 1;
  State3 tmp;
  bool done = false;
  while (!done && stepper.current_time() < T) {
    const auto [t0, t1] = stepper.do_step(sys);
    const State3& cur = stepper.current_state();
    const double rho = std::hypot(cur[1], cur[2]);
    if (rho > a * (1.0 + opts.boundary_slack))
      throw TraceError("trace: trajectory left tube " + std::to_string(tube) + " at t = " +
                           std::to_string(t1) + " (drift " + std::to_string(rho - a) + ")",
                       rho - a);
    // section crossings s = s0 + 2 pi n inside [t0, t1]
    while (cur[0] >= start->s + kTwoPi * next_return) {
      const double target = start->s + kTwoPi * next_return;
      double lo = t0, hi = t1;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        stepper.calc_state(mid, tmp);
        (tmp[0] < target ? lo : hi) = mid;
      }
      const double tc = 0.5 * (lo + hi);
      if (tc > T) break;
      stepper.calc_state(tc, tmp);
      res.returns.push_back(tc);
      const double dist = std::hypot(tmp[1] - start->u, tmp[2] - start->v);
      if (!res.closed && dist < close_tol) {
        res.closed = true;
        res.period = tc;
        res.transits = next_return;
        res.closure_error = dist;
        if (opts.stop_on_close) {
          while (next_out * dt_out < tc) {
            stepper.calc_state(next_out * dt_out, tmp);
            record(next_out * dt_out, tmp);
            ++next_out;
          }
          stepper.calc_state(tc, tmp);
          record(tc, tmp);
          done = true;
          break;
        }
      }
      ++next_return;
    }
    if (done) break;
    while (next_out * dt_out <= std::min(t1, T)) {
      const double t = next_out * dt_out;
      stepper.calc_state(t, tmp);
      record(t, tmp);
      ++next_out;
    }
  }
  if (!done && res.times.back() < T) {
    stepper.calc_state(T, tmp);
    record(T, tmp);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Asymptotic linking

namespace {

// Gauss integral of two straight segments (exact, via the solid angle of the
// quadrilateral they span), in units of linking number.
double segment_linking(const Vec3& p1, const Vec3& p2, const Vec3& p3, const Vec3& p4) {
  const Vec3 r13 = p3 - p1, r14 = p4 - p1, r23 = p3 - p2, r24 = p4 - p2;
  const Vec3 c[4] = {cross(r13, r14), cross(r14, r24), cross(r24, r23), cross(r23, r13)};
  Vec3 n[4];
  for (int i = 0; i < 4; ++i) {
    const double l = norm(c[i]);
    if (l < 1e-300) return 0.0;
    n[i] = c[i] / l;
  }
  auto as = [](double x) { return std::asin(std::clamp(x, -1.0, 1.0)); };
  const double omega = as(dot(n[0], n[1])) + as(dot(n[1], n[2])) + as(dot(n[2], n[3])) + as(dot(n[3], n[0]));
  const double sgn = dot(cross(p4 - p3, p2 - p1), r13);
  if (sgn == 0.0) return 0.0;
  return (sgn > 0 ? omega : -omega) / kFourPi;
}

double richardson_inverse_t(const std::vector<double>& T, const std::vector<double>& v) {
  const std::size_t n = T.size(), m = std::min<std::size_t>(4, n);
  if (m == 1) return v.back();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = n - m; k < n; ++k) {
    const double x = 1.0 / T[k];
    sx += x;
    sy += v[k];
    sxx += x * x;
    sxy += x * v[k];
  }
  const double det = m * sxx - sx * sx;
  if (std::abs(det) < 1e-300) return v.back();
  return (sxx * sy - sx * sxy) / det;
}

}  // namespace

double polygon_linking(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Vec3& p1 = a[i];
    const Vec3& p2 = a[(i + 1) % a.size()];
    for (std::size_t j = 0; j < b.size(); ++j) s += segment_linking(p1, p2, b[j], b[(j + 1) % b.size()]);
  }
  return s;
}

CesaroEstimate asymptotic_linking(const FieldSystem& field, const Vec3& x0, const Vec3& y0,
                                  double T_max, const LinkingOptions& opts) {
  if (opts.checkpoints < 1) throw ValidationError("asymptotic_linking: need at least one checkpoint");
  if (opts.points_per_transit < 8) throw ValidationError("asymptotic_linking: points_per_transit >= 8");
  const auto px = field.locate(x0), py = field.locate(y0);
  if (!px || !py) throw ValidationError("asymptotic_linking: starting point outside every tube");
  if (px->tube == py->tube) throw ValidationError("asymptotic_linking: points lie in the same tube");

  auto run = [&](const TubePoint& p, const Vec3& x) {
    TraceOptions to = opts.trace;
    to.dt_out = transit_time_estimate(field, p) / opts.points_per_transit;
    to.stop_on_close = false;
    return trace(field, x, T_max, to);
  };
  const TraceResult A = run(*px, x0), B = run(*py, y0);

  const int K = opts.checkpoints;
  CesaroEstimate out;
  std::vector<std::size_t> na(static_cast<std::size_t>(K)), nb(static_cast<std::size_t>(K));
  auto index_at = [](const TraceResult& r, double t) {
    // last output index with time <= t
    const auto it = std::upper_bound(r.times.begin(), r.times.end(), t * (1.0 + 1e-12));
    return static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, (it - r.times.begin()) - 1));
  };
  for (int k = 0; k < K; ++k) {
    const double T = T_max / std::ldexp(1.0, K - 1 - k);
    out.checkpoints.push_back(T);
    na[static_cast<std::size_t>(k)] = index_at(A, T);
    nb[static_cast<std::size_t>(k)] = index_at(B, T);
  }

  // S_k = sum of segment pairs (i < na_k, j < nb_k); rows in parallel blocks.
  const std::size_t rows = na.back();
  const std::size_t block = 64;
  const std::size_t n_blocks = (rows + block - 1) / block;
  std::vector<std::vector<double>> partial(n_blocks, std::vector<double>(static_cast<std::size_t>(K), 0.0));
  parallel_for(n_blocks, [&](std::size_t bi) {
    auto& acc = partial[bi];
    for (std::size_t i = bi * block; i < std::min(rows, (bi + 1) * block); ++i) {
      double run_sum = 0.0;
      std::size_t j = 0;
      for (int k = 0; k < K; ++k) {
        const std::size_t jk = nb[static_cast<std::size_t>(k)];
        for (; j < jk; ++j) run_sum += segment_linking(A.points[i], A.points[i + 1], B.points[j], B.points[j + 1]);
        if (i < na[static_cast<std::size_t>(k)]) acc[static_cast<std::size_t>(k)] += run_sum;
      }
    }
  });

  for (int k = 0; k < K; ++k) {
    const std::size_t ia = na[static_cast<std::size_t>(k)], ib = nb[static_cast<std::size_t>(k)];
    double G = 0.0;
    for (const auto& p : partial) G += p[static_cast<std::size_t>(k)];
    // closing chords
    const Vec3& ea = A.points[ia];
    const Vec3& eb = B.points[ib];
    for (std::size_t j = 0; j < ib; ++j) G += segment_linking(ea, A.points[0], B.points[j], B.points[j + 1]);
    for (std::size_t i = 0; i < ia; ++i) G += segment_linking(A.points[i], A.points[i + 1], eb, B.points[0]);
    G += segment_linking(ea, A.points[0], eb, B.points[0]);

    const double T = out.checkpoints[static_cast<std::size_t>(k)];
    const double ta = (A.coords[ia].s - A.coords[0].s) / kTwoPi;
    const double tb = (B.coords[ib].s - B.coords[0].s) / kTwoPi;
    out.values.push_back(G / (ta * tb));
    out.raw.push_back(G / (T * T));
  }
  out.limit = richardson_inverse_t(out.checkpoints, out.values);
  const std::size_t n = out.values.size();
  for (std::size_t i = n - std::min<std::size_t>(3, n); i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      out.spread = std::max(out.spread, std::abs(out.values[i] - out.values[j]));
  out.lower = *std::min_element(out.values.begin(), out.values.end());
  out.upper = *std::max_element(out.values.begin(), out.values.end());
  return out;
}

// ---------------------------------------------------------------------------
// Closed lines and the triple average

namespace {

// (u, v, t) as functions of s
struct ArcSystem {
  const FieldSystem* field;
  int tube;
  void operator()(const State3& y, State3& dy, double s) const {
    const TubePoint p{tube, s, y[0], y[1]};
    const auto gp = field->stream_gradient(tube, y[0], y[1]);
    const double g = field->transit_density(tube, y[0], y[1]);
    dy = {gp[1] / g, -gp[0] / g, field->jacobian(p) / g};
  }
};

}  // namespace

std::optional<ClosedLine> closed_line(const FieldSystem& field, int tube, double u0, double v0,
                                      const ClosedLineOptions& opts) {
  if (tube < 0 || tube >= field.size()) throw ValidationError("closed_line: no such tube");
  const double a = field.tube(tube).radius;
  if (u0 * u0 + v0 * v0 > a * a) throw ValidationError("closed_line: start outside the tube");
  ArcSystem sys{&field, tube};
  const double close_tol = opts.closure_rel * 2.0 * a;

  State3 y{u0, v0, 0.0};
  int q = 0;
  double dist = 0.0;
  for (int n = 1; n <= opts.max_transits; ++n) {
    odeint::integrate_adaptive(odeint::make_controlled(opts.tol, opts.tol, odeint::runge_kutta_dopri5<State3>()),
                               sys, y, kTwoPi * (n - 1), kTwoPi * n, 0.05);
    if (std::hypot(y[0], y[1]) > a * (1.0 + 1e-6))
      throw TraceError("closed_line: line left tube " + std::to_string(tube), std::hypot(y[0], y[1]) - a);
    dist = std::hypot(y[0] - u0, y[1] - v0);
    if (dist < close_tol) {
      q = n;
      break;
    }
  }
  if (q == 0) return std::nullopt;

  ClosedLine line;
  line.period = y[2];
  line.transits = q;
  line.closure_error = dist;

  // Positions at 2m equispaced parameters; even ones feed the fit, odd ones check it.
  auto sample = [&](int m2) {
    std::vector<double> grid(static_cast<std::size_t>(m2) + 1);
    for (int k = 0; k <= m2; ++k) grid[static_cast<std::size_t>(k)] = kTwoPi * q * k / m2;
    std::vector<Vec3> pts;
    pts.reserve(grid.size());
    State3 st{u0, v0, 0.0};
    odeint::integrate_times(
        odeint::make_dense_output(opts.tol, opts.tol, odeint::runge_kutta_dopri5<State3>()), sys, st,
        grid.begin(), grid.end(), 0.01, [&](const State3& z, double s) {
          pts.push_back(field.position({tube, s, z[0], z[1]}));
        });
    pts.pop_back();
    return pts;
  };

  for (int order = 16 * q; order <= opts.max_order; order *= 2) {
    const int m = 4 * order;
    const auto pts = sample(2 * m);
    Curve3 fit = Curve3::fit([&](double t) {
      const auto k = static_cast<std::size_t>(std::llround(t / kTwoPi * m));
      return pts[2 * (k % static_cast<std::size_t>(m))];
    }, order, m);
    double err = 0.0;
    for (int k = 0; k < m; ++k)
      err = std::max(err, norm(fit.eval(kTwoPi * (k + 0.5) / m).position - pts[static_cast<std::size_t>(2 * k + 1)]));
    if (err < opts.fit_tol) {
      line.curve = std::move(fit);
      line.fit_error = err;
      return line;
    }
  }
  throw ConvergenceError("closed_line: Fourier fit did not reach the tolerance by order " +
                         std::to_string(opts.max_order));
}

std::array<double, 2> sample_section(const FieldSystem& field, int tube, CounterRng& rng) {
  const double a = field.tube(tube).radius;
  double gmax = 0.0;
  for (int k = 0; k <= 400; ++k) gmax = std::max(gmax, field.transit_density(tube, a * k / 400.0, 0.0));
  gmax *= 1.05;
  for (;;) {
    const double r = a * std::sqrt(rng.uniform());
    const double th = kTwoPi * rng.uniform();
    const double u = r * std::cos(th), v = r * std::sin(th);
    if (rng.uniform() * gmax <= field.transit_density(tube, u, v)) return {u, v};
  }
}

ErgodicResult ergodic_M(const FieldSystem& field, const ErgodicOptions& opts) {
  if (field.size() != 3) throw ValidationError("ergodic_M: the field needs exactly 3 tubes");
  if (opts.n_triples < 1) throw ValidationError("ergodic_M: n_triples must be positive");
  ErgodicResult res;
  const std::uint64_t stream = stream_id("ergodic-triples");
  for (int k = 0; k < opts.n_triples; ++k) {
    CounterRng rng(opts.seed, stream, static_cast<std::uint64_t>(k));
    std::array<Curve3, 3> curves;
    double w = 1.0;
    bool ok = true;
    for (int i = 0; i < 3 && ok; ++i) {
      const auto uv = sample_section(field, i, rng);
      const auto line = closed_line(field, i, uv[0], uv[1], opts.line);
      if (!line) {
        ok = false;
        break;
      }
      curves[static_cast<std::size_t>(i)] = line->curve;
      if (opts.period_weighted) w *= line->period;
    }
    if (!ok) {
      ++res.skipped;
      continue;
    }
    MOptions m = opts.m;
    m.seed = splitmix64(opts.seed ^ (0x5bd1e995ULL * static_cast<std::uint64_t>(k + 1)));
    const auto tb = assemble_M(Link3(std::move(curves)), m);
    res.values.push_back(tb.M.value);
    res.std_errors.push_back(tb.M.std_error);
    res.weights.push_back(w);
    ++res.used;
  }
  if (res.skipped > opts.max_skip_fraction * opts.n_triples)
    throw ConvergenceError("ergodic_M: " + std::to_string(res.skipped) + " of " + std::to_string(opts.n_triples) +
                           " triples had a line that does not close; the field violates the return condition");

  const std::size_t n = res.values.size();
  double wsum = 0.0;
  for (double w : res.weights) wsum += w;
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += res.weights[i] / wsum * res.values[i];
  double spread_var = 0.0, integ_var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = res.weights[i] / wsum;
    spread_var += p * p * (res.values[i] - mean) * (res.values[i] - mean);
    integ_var += p * p * res.std_errors[i] * res.std_errors[i];
  }
  if (n > 1) spread_var *= static_cast<double>(n) / static_cast<double>(n - 1);
  res.M.value = mean;
  res.M.std_error = std::sqrt(std::max(spread_var, integ_var));
  res.M.n_samples = n;
  res.M.seed = opts.seed;
  return res;
}

}  // namespace linkm
