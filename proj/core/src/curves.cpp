#include "linkm/curves.hpp"

#include <algorithm>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "linkm/errors.hpp"
#include "linkm/rng.hpp"

namespace linkm {

double wrap_angle(double t) {
  double r = std::fmod(t, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Curve3

Curve3::Curve3(Vec3 constant, std::vector<Vec3> cos_coeffs, std::vector<Vec3> sin_coeffs)
    : constant_(constant), cos_(std::move(cos_coeffs)), sin_(std::move(sin_coeffs)) {
  if (cos_.size() != sin_.size())
    throw ValidationError("Curve3: cosine and sine coefficient lists differ in length");
}

Curve3 Curve3::circle(const Vec3& center, const Vec3& u, const Vec3& v, double radius) {
  return Curve3(center, {radius * u}, {radius * v});
}

Curve3 Curve3::fit(const std::function<Vec3(double)>& f, int order, int samples) {
  if (samples < 2 * order + 1) throw ValidationError("Curve3::fit: too few samples for order");
  std::vector<Vec3> pts(static_cast<std::size_t>(samples));
  for (int s = 0; s < samples; ++s) pts[static_cast<std::size_t>(s)] = f(kTwoPi * s / samples);

  Vec3 c{};
  for (const auto& p : pts) c += p;
  c = c / samples;
  std::vector<Vec3> a(static_cast<std::size_t>(order)), b(static_cast<std::size_t>(order));
  for (int k = 1; k <= order; ++k) {
    Vec3 ak{}, bk{};
    for (int s = 0; s < samples; ++s) {
      // Reduce k*s mod samples so the angle stays exact for large k.
      const double ang = kTwoPi * static_cast<double>((static_cast<long long>(k) * s) % samples) / samples;
      ak += pts[static_cast<std::size_t>(s)] * std::cos(ang);
      bk += pts[static_cast<std::size_t>(s)] * std::sin(ang);
    }
    a[static_cast<std::size_t>(k - 1)] = ak * (2.0 / samples);
    b[static_cast<std::size_t>(k - 1)] = bk * (2.0 / samples);
  }
  return Curve3(c, std::move(a), std::move(b));
}

CurvePoint Curve3::eval(double t) const {
  t = wrap_angle(t);
  const double c1 = std::cos(t), s1 = std::sin(t);
  double ck = 1.0, sk = 0.0;
  Vec3 pos = constant_;
  Vec3 tan{};
  for (std::size_t k = 0; k < cos_.size(); ++k) {
    const double cn = ck * c1 - sk * s1;
    const double sn = sk * c1 + ck * s1;
    ck = cn;
    sk = sn;
    const double kk = static_cast<double>(k + 1);
    pos += cos_[k] * ck + sin_[k] * sk;
    tan += (sin_[k] * ck - cos_[k] * sk) * kk;
  }
  return {pos, tan};
}

std::array<Vec3, 4> Curve3::jet(double t) const {
  t = wrap_angle(t);
  std::array<Vec3, 4> d{constant_, Vec3{}, Vec3{}, Vec3{}};
  for (std::size_t k = 0; k < cos_.size(); ++k) {
    const double kk = static_cast<double>(k + 1);
    const double c = std::cos(kk * t), s = std::sin(kk * t);
    const Vec3& a = cos_[k];
    const Vec3& b = sin_[k];
    d[0] += a * c + b * s;
    d[1] += (b * c - a * s) * kk;
    d[2] += (a * c + b * s) * (-kk * kk);
    d[3] += (a * s - b * c) * (kk * kk * kk);
  }
  return d;
}

double Curve3::speed_bound() const {
  double v = 0.0;
  for (std::size_t k = 0; k < cos_.size(); ++k)
    v += static_cast<double>(k + 1) * (norm(cos_[k]) + norm(sin_[k]));
  return v;
}

void Curve3::validate(int grid) const {
  if (cos_.empty()) throw ValidationError("Curve3: constant curve (order 0)");
  const double scale = speed_bound();
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ValidationError("Curve3: degenerate coefficients");
  double vmin = std::numeric_limits<double>::infinity();
  double amin = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double t = kTwoPi * i / grid;
    const double v = norm(eval(t).tangent);
    if (v < vmin) {
      vmin = v;
      amin = t;
    }
  }
  // Second-derivative bound gives the Lipschitz constant of the speed.
  double acc = 0.0;
  for (std::size_t k = 0; k < cos_.size(); ++k) {
    const double kk = static_cast<double>(k + 1);
    acc += kk * kk * (norm(cos_[k]) + norm(sin_[k]));
  }
  if (vmin - acc * kPi / grid <= 1e-9 * scale) {
    std::ostringstream os;
    os << "Curve3: tangent vanishes near t = " << amin << " (|x'| = " << vmin << ")";
    throw ValidationError(os.str());
  }
}

// ---------------------------------------------------------------------------
// Separation

namespace {

struct Chunk {
  Vec3 center;
  double radius;
  std::size_t begin, end;
};

std::vector<Chunk> make_chunks(const std::vector<Vec3>& pts, std::size_t width) {
  std::vector<Chunk> chunks;
  for (std::size_t b = 0; b < pts.size(); b += width) {
    const std::size_t e = std::min(pts.size(), b + width);
    Vec3 c{};
    for (std::size_t i = b; i < e; ++i) c += pts[i];
    c = c / static_cast<double>(e - b);
    double r = 0.0;
    for (std::size_t i = b; i < e; ++i) r = std::max(r, norm(pts[i] - c));
    chunks.push_back({c, r, b, e});
  }
  return chunks;
}

}  // namespace

double min_separation(const PeriodicCurve& a, const PeriodicCurve& b, int grid) {
  std::vector<Vec3> pa(static_cast<std::size_t>(grid)), pb(static_cast<std::size_t>(grid));
  for (int i = 0; i < grid; ++i) {
    const double t = kTwoPi * i / grid;
    pa[static_cast<std::size_t>(i)] = a.eval(t).position;
    pb[static_cast<std::size_t>(i)] = b.eval(t).position;
  }
  const auto ca = make_chunks(pa, 64);
  const auto cb = make_chunks(pb, 64);
  double best2 = std::numeric_limits<double>::infinity();
  for (const auto& x : ca) {
    for (const auto& y : cb) {
      const double lower = norm(x.center - y.center) - x.radius - y.radius;
      if (lower > 0.0 && lower * lower >= best2) continue;
      for (std::size_t i = x.begin; i < x.end; ++i)
        for (std::size_t j = y.begin; j < y.end; ++j) best2 = std::min(best2, norm2(pa[i] - pb[j]));
    }
  }
  const double margin = 0.5 * (a.speed_bound() + b.speed_bound()) * (kTwoPi / grid);
  return std::sqrt(best2) - margin;
}

double min_separation(const CurveSet& curves, int grid) {
  double m = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      m = std::min(m, min_separation(*curves[static_cast<std::size_t>(i)],
                                     *curves[static_cast<std::size_t>(j)], grid));
  return m;
}

// ---------------------------------------------------------------------------
// Link3

Link3::Link3(std::array<Curve3, 3> components) : components_(std::move(components)) {
  for (const auto& c : components_) c.validate();
  min_separation_ = linkm::min_separation(curves());
  if (!(min_separation_ > 0.0)) {
    std::ostringstream os;
    os << "Link3: components are not certifiably disjoint (separation bound " << min_separation_
       << ")";
    throw ValidationError(os.str());
  }
}

CurveSet Link3::curves() const {
  return {std::make_shared<Curve3>(components_[0]), std::make_shared<Curve3>(components_[1]),
          std::make_shared<Curve3>(components_[2])};
}

// ---------------------------------------------------------------------------
// Rigid motions

void RigidMotion::validate() const {
  if (rotation.orthogonality_defect() > 1e-12)
    throw ValidationError("RigidMotion: rotation part is not orthogonal within 1e-12");
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw ValidationError("RigidMotion: scale must be positive");
}

Curve3 transform(const Curve3& curve, const RigidMotion& m) {
  m.validate();
  std::vector<Vec3> a, b;
  a.reserve(curve.cos_coeffs().size());
  b.reserve(curve.sin_coeffs().size());
  for (const auto& v : curve.cos_coeffs()) a.push_back(m.scale * (m.rotation * v));
  for (const auto& v : curve.sin_coeffs()) b.push_back(m.scale * (m.rotation * v));
  return Curve3(m.apply(curve.constant()), std::move(a), std::move(b));
}

Link3 transform(const Link3& link, const RigidMotion& m) {
  return Link3({transform(link[0], m), transform(link[1], m), transform(link[2], m)});
}

Curve3 reversed(const Curve3& curve) {
  std::vector<Vec3> b;
  b.reserve(curve.sin_coeffs().size());
  for (const auto& v : curve.sin_coeffs()) b.push_back(-v);
  return Curve3(curve.constant(), curve.cos_coeffs(), std::move(b));
}

Link3 reverse_component(const Link3& link, int i) {
  if (i < 0 || i > 2) throw std::out_of_range("reverse_component: index in 0..2");
  auto c = link.components();
  c[static_cast<std::size_t>(i)] = reversed(c[static_cast<std::size_t>(i)]);
  return Link3(c);
}

// ---------------------------------------------------------------------------
// Reparametrization

SpeedProfile::SpeedProfile(std::vector<double> cos_terms, std::vector<double> sin_terms)
    : a_(std::move(cos_terms)), b_(std::move(sin_terms)) {
  if (a_.size() != b_.size()) throw ValidationError("SpeedProfile: coefficient lists differ in length");
}

double SpeedProfile::value(double s) const {
  double w = 1.0;
  for (std::size_t k = 0; k < a_.size(); ++k) {
    const double kk = static_cast<double>(k + 1);
    w += a_[k] * std::cos(kk * s) + b_[k] * std::sin(kk * s);
  }
  return w;
}

double SpeedProfile::phase(double s) const {
  double th = s;
  for (std::size_t k = 0; k < a_.size(); ++k) {
    const double kk = static_cast<double>(k + 1);
    th += (a_[k] * std::sin(kk * s) - b_[k] * (std::cos(kk * s) - 1.0)) / kk;
  }
  return th;
}

double SpeedProfile::min_value() const {
  double w = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4096; ++i) w = std::min(w, value(kTwoPi * i / 4096));
  return w;
}

double SpeedProfile::max_value() const {
  double w = 0.0;
  for (int i = 0; i < 4096; ++i) w = std::max(w, value(kTwoPi * i / 4096));
  return w;
}

ReparametrizedCurve::ReparametrizedCurve(CurveHandle base, double shift, SpeedProfile profile)
    : base_(std::move(base)), shift_(shift), profile_(std::move(profile)) {}

CurvePoint ReparametrizedCurve::eval(double s) const {
  s = wrap_angle(s);
  const CurvePoint p = base_->eval(shift_ + profile_.phase(s));
  return {p.position, p.tangent * profile_.value(s)};
}

double ReparametrizedCurve::speed_bound() const {
  return base_->speed_bound() * profile_.max_value();
}

CurveHandle reparametrize(CurveHandle curve, double shift, const SpeedProfile& profile) {
  // Grid minimum minus a generous derivative margin.
  if (profile.min_value() <= 1e-3)
    throw ValidationError("reparametrize: speed profile must be bounded away from zero");
  return std::make_shared<ReparametrizedCurve>(std::move(curve), shift, profile);
}

// ---------------------------------------------------------------------------
// Isotopy families

std::vector<Link3> isotopy_family(const Link3& link, std::uint64_t seed, double amplitude,
                                  int members) {
  if (amplitude < 0.0) throw ValidationError("isotopy_family: negative amplitude");
  if (amplitude > 0.25 * link.min_separation()) {
    std::ostringstream os;
    os << "isotopy_family: amplitude " << amplitude << " exceeds min_separation/4 = "
       << 0.25 * link.min_separation();
    throw ValidationError(os.str());
  }
  constexpr int kModes = 3;
  constexpr int kGrid = 2048;
  std::vector<Link3> family;
  family.reserve(static_cast<std::size_t>(members));
  for (int m = 0; m < members; ++m) {
    std::array<Curve3, 3> comps = link.components();
    for (int c = 0; c < 3; ++c) {
      CounterRng rng(seed, stream_id("isotopy_family"), static_cast<std::uint64_t>(3 * m + c));
      std::vector<Vec3> da(kModes), db(kModes);
      for (int k = 0; k < kModes; ++k) {
        da[static_cast<std::size_t>(k)] = {rng.normal(), rng.normal(), rng.normal()};
        db[static_cast<std::size_t>(k)] = {rng.normal(), rng.normal(), rng.normal()};
      }
      const Curve3 delta({}, da, db);
      double sup = 0.0;
      for (int i = 0; i < kGrid; ++i) sup = std::max(sup, norm(delta.eval(kTwoPi * i / kGrid).position));
      // Grid sup plus Lipschitz margin bounds the true sup.
      sup += delta.speed_bound() * kPi / kGrid;
      const double s = (amplitude > 0.0 && sup > 0.0) ? amplitude / sup : 0.0;

      const Curve3& base = comps[static_cast<std::size_t>(c)];
      const int order = std::max(base.order(), kModes);
      std::vector<Vec3> a(static_cast<std::size_t>(order)), b(static_cast<std::size_t>(order));
      for (int k = 0; k < order; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        if (k < base.order()) {
          a[kk] = base.cos_coeffs()[kk];
          b[kk] = base.sin_coeffs()[kk];
        }
        if (k < kModes) {
          a[kk] += s * da[kk];
          b[kk] += s * db[kk];
        }
      }
      comps[static_cast<std::size_t>(c)] = Curve3(base.constant(), std::move(a), std::move(b));
    }
    Link3 member(std::move(comps));
    if (member.min_separation() < 0.5 * link.min_separation() - 1e-12)
      throw ValidationError("isotopy_family: member separation fell below half the original");
    family.push_back(std::move(member));
  }
  return family;
}

}  // namespace linkm
