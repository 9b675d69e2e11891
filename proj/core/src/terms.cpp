#include "linkm/terms.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "linkm/errors.hpp"
#include "linkm/parallel.hpp"

namespace linkm {

const std::array<const char*, 9> kBLabels = {"b(1;1,2)", "b(1;1,3)", "b(2;2,3)",
                                             "b(2;2,1)", "b(3;3,1)", "b(3;3,2)",
                                             "b(1;2,3)", "b(2;3,1)", "b(3;1,2)"};
const std::array<const char*, 6> kCLabels = {"c(1;1)", "c(2;2)", "c(3;3)",
                                             "c(1;2)", "c(2;3)", "c(3;1)"};
const std::array<const char*, 6> kDLabels = {"d(1;1)", "d(2;2)", "d(3;3)",
                                             "d(1;2)", "d(2;3)", "d(3;1)"};

namespace {

constexpr const char* kZeroPrefactor = "zero prefactor";

// <A_a, A_b, A_phi_c> for the nine b labels (0-based components).
struct BShape {
  int a, b, phi;
};
constexpr std::array<BShape, 9> kBShapes = {{{0, 1, 0},
                                             {2, 0, 0},
                                             {1, 2, 1},
                                             {0, 1, 1},
                                             {2, 0, 2},
                                             {1, 2, 2},
                                             {1, 2, 0},
                                             {2, 0, 1},
                                             {0, 1, 2}}};

// c and d: the curve integral runs along `on`, the potential comes from `src`.
struct CurvePair {
  int on, src;
};
constexpr std::array<CurvePair, 6> kCdShapes = {{{0, 0}, {1, 1}, {2, 2}, {1, 0}, {2, 1}, {0, 2}}};

// alpha_k = A_first x A_second for k = 12, 23, 31.
constexpr std::array<std::array<int, 2>, 3> kAlpha = {{{0, 1}, {1, 2}, {2, 0}}};
constexpr std::array<std::array<int, 2>, 6> kWBlocks = {{{0, 0}, {1, 1}, {2, 2}, {0, 1}, {1, 2}, {2, 0}}};
constexpr std::array<const char*, 6> kWLabels = {"W(12,12)", "W(23,23)", "W(31,31)",
                                                 "W(12,23)", "W(23,31)", "W(31,12)"};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Term skipped_term(const std::string& label, double prefactor, const char* reason, bool in_sum) {
  Term t;
  t.label = label;
  t.prefactor = prefactor;
  t.integral = Estimate::exact(0.0);
  t.value = Estimate::exact(0.0);
  t.skipped = true;
  t.skip_reason = reason;
  t.in_sum = in_sum;
  return t;
}

Term make_term(const std::string& label, double prefactor, const Estimate& integral, bool in_sum) {
  Term t;
  t.label = label;
  t.prefactor = prefactor;
  t.integral = integral;
  t.value = integral.scaled(prefactor);
  t.in_sum = in_sum;
  return t;
}

// Deterministic chunked sum over [0, n): each chunk is summed serially and
// the chunk totals are added in order.
template <class F>
double chunked_sum(std::size_t n, F&& f) {
  const std::size_t chunk = 64;
  const std::size_t n_chunks = (n + chunk - 1) / chunk;
  std::vector<double> partial(n_chunks, 0.0);
  parallel_for(n_chunks, [&](std::size_t c) {
    double s = 0.0;
    for (std::size_t k = c * chunk; k < std::min(n, (c + 1) * chunk); ++k) s += f(k);
    partial[c] = s;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace

struct TermEvaluator::Impl {
  CurveSet curves;
  MOptions opts;
  std::optional<LinkingMatrix> lk;
  // mv[i][0] = phi_{i+1,i}, mv[i][1] = phi_{i+2,i}
  std::optional<std::array<std::array<MultivaluedPotential, 2>, 3>> mv;
  std::optional<std::array<ScalarPotentialTable, 3>> phi;
  std::array<std::unique_ptr<CurveSource>, 3> sources;
  std::unique_ptr<LinkProposal> proposal;
  std::optional<Estimate> volume;
  std::array<std::optional<Estimate>, 9> b_cache;
  std::array<std::optional<Estimate>, 3> f_curve;
  std::array<double, 3> f_spread{};

  double L(int a, int b) {
    const auto& m = *lk;
    return opts.short_circuit ? static_cast<double>(m(a, b))
                              : m.raw[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
  }
  bool active(double prefactor) const { return !opts.short_circuit || prefactor != 0.0; }

  double triple() { return L(0, 1) * L(1, 2) * L(2, 0); }
  double f_prefactor_scale() { return opts.f_triple_prefactor ? triple() : 1.0; }

  std::array<double, 9> b_prefactors() {
    const double l12 = L(0, 1), l23 = L(1, 2), l31 = L(2, 0), p = l12 * l23 * l31;
    const double k = opts.b_factor;
    return {-k * l23 * l23 * l31, -k * l23 * l23 * l12, -k * l31 * l31 * l12, -k * l31 * l31 * l23,
            -k * l12 * l12 * l23, -k * l12 * l12 * l31, -k * p, -k * p, -k * p};
  }
  std::array<double, 6> c_prefactors() {
    const double l12 = L(0, 1), l23 = L(1, 2), l31 = L(2, 0);
    return {l23 * l23, l31 * l31, l12 * l12, 2 * l23 * l31, 2 * l31 * l12, 2 * l12 * l23};
  }
  std::array<double, 6> d_prefactors() {
    const double l12 = L(0, 1), l23 = L(1, 2), l31 = L(2, 0);
    return {-l23 * l23, -l31 * l31, -l12 * l12, l31 * l23, l12 * l31, l23 * l12};
  }
  std::array<double, 3> alpha_weights() {
    const double l12 = L(0, 1), l23 = L(1, 2), l31 = L(2, 0);
    return {l23 * l31, l31 * l12, l12 * l23};
  }
  std::array<double, 6> w_prefactors() {
    const auto c = alpha_weights();
    std::array<double, 6> w{};
    for (std::size_t k = 0; k < 6; ++k) {
      const auto [p, q] = kWBlocks[k];
      w[k] = (p == q ? 1.0 : 2.0) * c[static_cast<std::size_t>(p)] * c[static_cast<std::size_t>(q)];
    }
    return w;
  }

  void ensure_lk() {
    if (!lk) lk = linking_matrix(curves, opts.linking_tol);
  }

  void ensure_mv() {
    if (mv) return;
    ensure_lk();
    std::array<std::array<MultivaluedPotential, 2>, 3> out;
    parallel_for(6, [&](std::size_t q) {
      const int i = static_cast<int>(q / 2), which = static_cast<int>(q % 2);
      out[q / 2][q % 2] =
          build_multivalued(curves, i, (i + 1 + which) % 3, opts.phi_grid, opts.potential);
    });
    mv = std::move(out);
  }

  void ensure_phi() {
    if (phi) return;
    ensure_lk();
    std::array<ScalarPotentialTable, 3> out;
    const bool any = (*lk)(0, 1) != 0 || (*lk)(1, 2) != 0 || (*lk)(2, 0) != 0;
    if (any) ensure_mv();
    for (std::size_t i = 0; i < 3; ++i) {
      out[i] = any ? combine_phi(curves, *lk, static_cast<int>(i), (*mv)[i][0], (*mv)[i][1],
                                 GaugeKind::MeanZero, opts.gauge_measure)
                   : build_phi(curves, *lk, static_cast<int>(i), GaugeKind::MeanZero,
                               opts.phi_grid, opts.gauge_measure);
    }
    phi = std::move(out);
  }

  void ensure_sources() {
    if (sources[0]) return;
    ensure_phi();
    for (std::size_t i = 0; i < 3; ++i) {
      sources[i] = std::make_unique<CurveSource>(curves[i], opts.potential);
      if (!(*phi)[i].identically_zero()) sources[i]->set_weight((*phi)[i].phi);
    }
    const double sep = min_separation(curves, 1024);
    proposal = std::make_unique<LinkProposal>(
        std::array<const CurveSource*, 3>{sources[0].get(), sources[1].get(), sources[2].get()},
        opts.sampler, sep);
  }

  // Evaluates the three potentials at x; false when x is on a curve.
  bool eval_all(const Vec3& x, std::array<FieldValue, 3>& fv, double& density) const {
    std::array<double, 3> tube{};
    for (std::size_t i = 0; i < 3; ++i) {
      fv[i] = sources[i]->evaluate(x, &proposal->tube());
      if (fv[i].singular) return false;
      tube[i] = fv[i].tube_density;
    }
    density = proposal->combine(tube, x);
    return true;
  }

  McOptions mc_options(std::uint64_t budget, const std::string& stream,
                       std::vector<double> weights) const {
    McOptions mo;
    mo.budget = budget;
    mo.min_samples = std::min<std::uint64_t>(budget, 1 << 13);
    mo.target_relative = opts.target_rel_std_error;
    mo.target_weights = std::move(weights);
    mo.block_size = opts.block_size;
    mo.seed = splitmix64(opts.seed ^ stream_id(stream));
    mo.stream = stream;
    return mo;
  }

  // Volume job: entries 0..8 are b labels, 9 is <A1, A2, A3>.
  VectorEstimate run_volume(const std::vector<int>& items, const std::vector<double>& weights,
                            const std::string& stream) {
    ensure_sources();
    const auto mo = mc_options(opts.volume_budget, stream, weights);
    return mc_run(
        items.size(),
        [&](CounterRng& rng, std::span<double> out) {
          const Vec3 x = proposal->sample(rng);
          std::array<FieldValue, 3> fv;
          double p = 0.0;
          if (!eval_all(x, fv, p)) return false;
          for (std::size_t m = 0; m < items.size(); ++m) {
            const int it = items[m];
            double v;
            if (it == 9) {
              v = triple_product(fv[0].A, fv[1].A, fv[2].A);
            } else {
              const auto s = kBShapes[static_cast<std::size_t>(it)];
              v = triple_product(fv[static_cast<std::size_t>(s.a)].A, fv[static_cast<std::size_t>(s.b)].A,
                                 fv[static_cast<std::size_t>(s.phi)].A_phi);
            }
            out[m] = v / p;
          }
          return true;
        },
        mo);
  }

  // W blocks by the split-kernel pair estimator; mc samples are batches.
  VectorEstimate run_pair(const std::vector<int>& blocks, const std::vector<double>& weights) {
    ensure_sources();
    const HelicityOptions ho = proposal->helicity_options();
    const std::uint64_t per_batch = ho.batch_points + 3ull * ho.close_points;
    McOptions mo = mc_options(std::max<std::uint64_t>(2, opts.pair_budget / per_batch), "W", {});
    mo.min_samples = std::min<std::uint64_t>(mo.budget, 4);
    mo.block_size = 1;
    // alpha_12, alpha_23, alpha_31 -> upper triangle (0,0) (0,1) (0,2) (1,1) (1,2) (2,2)
    static constexpr std::array<std::size_t, 6> kTri = {0, 3, 5, 1, 4, 2};
    std::vector<double> tri_weights(6, 0.0);
    for (std::size_t m = 0; m < blocks.size(); ++m)
      tri_weights[kTri[static_cast<std::size_t>(blocks[m])]] = weights[m];
    mo.target_weights = tri_weights;
    const auto job = mc_helicity_pair(
        3,
        [&](const Vec3& x, std::span<Vec3> f, double& density) {
          std::array<FieldValue, 3> fv;
          if (!eval_all(x, fv, density)) return false;
          for (std::size_t k = 0; k < 3; ++k) {
            const auto [i, j] = kAlpha[k];
            f[k] = cross(fv[static_cast<std::size_t>(i)].A, fv[static_cast<std::size_t>(j)].A);
          }
          return true;
        },
        *proposal, ho, mo);
    // Reorder to the requested blocks.
    VectorEstimate out;
    out.n_samples = job.n_samples;
    out.n_excluded_singular = job.n_excluded_singular;
    out.converged = job.converged;
    out.seed = job.seed;
    const std::size_t n = blocks.size();
    out.mean.resize(n);
    out.covariance.resize(n * n);
    for (std::size_t p = 0; p < n; ++p) {
      const std::size_t tp = kTri[static_cast<std::size_t>(blocks[p])];
      out.mean[p] = job.mean[tp];
      for (std::size_t q = 0; q < n; ++q)
        out.covariance[p * n + q] = job.covariance[tp * 6 + kTri[static_cast<std::size_t>(blocks[q])]];
    }
    return out;
  }

  // int phi_on^power (x_on', A_src or A_src^phi) along L_on, off-diagonal.
  Estimate curve_term(int on, int src, bool phi_potential, int phi_power) {
    ensure_sources();
    const auto& ph = (*phi)[static_cast<std::size_t>(on)];
    const CurveSource& s = *sources[static_cast<std::size_t>(src)];
    const int n2 = 2 * opts.curve_nodes;
    const auto w = ph.phi.on_grid(static_cast<std::size_t>(n2));
    std::vector<double> g(static_cast<std::size_t>(n2));
    parallel_for(static_cast<std::size_t>(n2), [&](std::size_t k) {
      const auto p = curves[static_cast<std::size_t>(on)]->eval(kTwoPi * static_cast<double>(k) / n2);
      const auto fv = s.evaluate(p.position);
      if (fv.singular) throw SingularPointError("curve_term: components touch");
      const double phi_k = phi_power == 1 ? w[k] : w[k] * w[k];
      g[k] = phi_k * dot(p.tangent, phi_potential ? fv.A_phi : fv.A);
    });
    double fine = 0.0, coarse = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      fine += g[k];
      if (k % 2 == 0) coarse += g[k];
    }
    fine *= kTwoPi / n2;
    coarse *= kTwoPi / (n2 / 2);
    Estimate e;
    e.value = fine;
    e.std_error = std::abs(fine - coarse);
    e.n_samples = static_cast<std::uint64_t>(n2);
    e.converged = e.std_error <= 1e-8 * std::max(1.0, std::abs(fine));
    return e;
  }

  // Diagonal pair: (int int phi_t phi_s K, int int phi_t^2 K) with the writhe
  // density K, by Richardson extrapolation of the trapezoid rule.
  std::array<Estimate, 2> self_terms(int i) {
    ensure_phi();
    const auto& ph = (*phi)[static_cast<std::size_t>(i)];
    if (ph.identically_zero()) return {Estimate::exact(0.0), Estimate::exact(0.0)};
    const auto& curve = *curves[static_cast<std::size_t>(i)];
    const KernelKind kind = opts.potential.kernel;
    auto level = [&](int n) {
      std::vector<CurvePoint> pts(static_cast<std::size_t>(n));
      for (int k = 0; k < n; ++k) pts[static_cast<std::size_t>(k)] = curve.eval(kTwoPi * k / n);
      const auto w = ph.phi.on_grid(static_cast<std::size_t>(n));
      std::array<double, 2> out{};
      const double sc = chunked_sum(static_cast<std::size_t>(n), [&](std::size_t a) {
        double row = 0.0;
        for (std::size_t b = 0; b < pts.size(); ++b) {
          if (a == b) continue;
          const Vec3 r = pts[a].position - pts[b].position;
          const double r2 = norm2(r);
          const double den = kind == KernelKind::Cubed ? r2 * std::sqrt(r2) : r2;
          row += w[b] * triple_product(pts[a].tangent, pts[b].tangent, r) / den;
        }
        return w[a] * row;
      });
      const double sd = chunked_sum(static_cast<std::size_t>(n), [&](std::size_t a) {
        double row = 0.0;
        for (std::size_t b = 0; b < pts.size(); ++b) {
          if (a == b) continue;
          const Vec3 r = pts[a].position - pts[b].position;
          const double r2 = norm2(r);
          const double den = kind == KernelKind::Cubed ? r2 * std::sqrt(r2) : r2;
          row += triple_product(pts[a].tangent, pts[b].tangent, r) / den;
        }
        return w[a] * w[a] * row;
      });
      const double h = kTwoPi / n;
      out[0] = sc * h * h / kFourPi;
      out[1] = sd * h * h / kFourPi;
      return out;
    };
    const int n = opts.self_nodes;
    const auto i1 = level(n), i2 = level(2 * n), i4 = level(4 * n);
    std::array<Estimate, 2> res;
    for (std::size_t q = 0; q < 2; ++q) {
      const double r1 = (4.0 * i2[q] - i1[q]) / 3.0;
      const double r2 = (4.0 * i4[q] - i2[q]) / 3.0;
      const double r = (16.0 * r2 - r1) / 15.0;
      res[q].value = r;
      res[q].std_error = std::abs(r - r2);
      res[q].n_samples = static_cast<std::uint64_t>(16 * n) * static_cast<std::uint64_t>(n);
      res[q].converged = res[q].std_error <= 1e-6 * std::max(1.0, std::abs(r));
    }
    return res;
  }

  // Marked-point average of int_{L_i} (x'.A_{i+2}) u - (x'.A_{i+1}) v, where
  // u = phi_{i+1,i} and v = phi_{i+2,i} are lifted from the marked point.
  void compute_f_curve(int i) {
    if (f_curve[static_cast<std::size_t>(i)]) return;
    ensure_mv();
    const auto& u = (*mv)[static_cast<std::size_t>(i)][0];
    const auto& v = (*mv)[static_cast<std::size_t>(i)][1];
    const std::size_t n = u.grid();
    const auto wts = measure_weights(*curves[static_cast<std::size_t>(i)], n, opts.gauge_measure);
    auto evaluate = [&](std::size_t stride, double* spread) {
      const std::size_t m = n / stride;
      const double su = u.slope(), sv = v.slope();
      const auto& pu = u.periodic.values();
      const auto& pv = v.periodic.values();
      double ipu = 0.0, ipv = 0.0, crossed = 0.0, wsum = 0.0, mean_u = 0.0, mean_v = 0.0;
      for (std::size_t k = 0; k < n; k += stride) {
        ipu += pu[k];
        ipv += pv[k];
        crossed += (v.derivative[k] - sv) * pu[k] - (u.derivative[k] - su) * pv[k];
        const double t = kTwoPi * static_cast<double>(k) / static_cast<double>(n);
        mean_u += wts[k] * (su * t + pu[k]);
        mean_v += wts[k] * (sv * t + pv[k]);
        wsum += wts[k];
      }
      const double h = kTwoPi / static_cast<double>(m);
      ipu *= h, ipv *= h, crossed *= h;
      mean_u /= wsum, mean_v /= wsum;
      const double j0 = 2.0 * (sv * ipu - su * ipv) + crossed;
      const double Pu = u.period_increment, Pv = v.period_increment;
      if (spread) {
        double lo = INFINITY, hi = -INFINITY;
        for (std::size_t k = 0; k < n; k += stride) {
          const double t = kTwoPi * static_cast<double>(k) / static_cast<double>(n);
          const double val = j0 + 2.0 * (Pu * (sv * t + pv[k]) - Pv * (su * t + pu[k]));
          lo = std::min(lo, val), hi = std::max(hi, val);
        }
        *spread = hi - lo;
      }
      return j0 + 2.0 * (Pu * mean_v - Pv * mean_u);
    };
    double spread = 0.0;
    const double fine = evaluate(1, &spread);
    const double coarse = evaluate(2, nullptr);
    Estimate e;
    e.value = fine;
    e.std_error = std::abs(fine - coarse);
    e.n_samples = n;
    e.converged = e.std_error <= 1e-8 * std::max(1.0, std::abs(fine));
    f_curve[static_cast<std::size_t>(i)] = e;
    f_spread[static_cast<std::size_t>(i)] = spread;
  }
};

TermEvaluator::TermEvaluator(CurveSet curves, MOptions opts)
    : impl_(std::make_unique<Impl>()), opts_(std::move(opts)) {
  for (const auto& c : curves)
    if (!c) throw std::invalid_argument("TermEvaluator: null curve");
  impl_->curves = std::move(curves);
  impl_->opts = opts_;
}

TermEvaluator::TermEvaluator(const Link3& link, MOptions opts)
    : TermEvaluator(link.curves(), std::move(opts)) {}

TermEvaluator::~TermEvaluator() = default;

const LinkingMatrix& TermEvaluator::linking() {
  impl_->ensure_lk();
  return *impl_->lk;
}

const std::array<ScalarPotentialTable, 3>& TermEvaluator::phi() {
  impl_->ensure_phi();
  return *impl_->phi;
}

Term TermEvaluator::term_W() {
  auto& I = *impl_;
  I.ensure_lk();
  const auto pref = I.w_prefactors();
  std::vector<int> blocks;
  std::vector<double> weights;
  for (int k = 0; k < 6; ++k)
    if (I.active(pref[static_cast<std::size_t>(k)])) {
      blocks.push_back(k);
      weights.push_back(pref[static_cast<std::size_t>(k)]);
    }
  if (blocks.empty()) return skipped_term("W", 0.0, kZeroPrefactor, true);
  const auto job = I.run_pair(blocks, weights);
  Term t = make_term("W", 1.0, job.linear(weights), true);
  return t;
}

Term TermEvaluator::term_b(int index) {
  if (index < 0 || index > 8) throw std::out_of_range("term_b: index in 0..8");
  auto& I = *impl_;
  I.ensure_lk();
  const double pref = I.b_prefactors()[static_cast<std::size_t>(index)];
  const std::string label = kBLabels[static_cast<std::size_t>(index)];
  if (!I.active(pref)) return skipped_term(label, pref, kZeroPrefactor, true);
  auto& cache = I.b_cache[static_cast<std::size_t>(index)];
  if (!cache) cache = I.run_volume({index}, {}, label).component(0);
  return make_term(label, pref, *cache, true);
}

Term TermEvaluator::term_c(int index) {
  if (index < 0 || index > 5) throw std::out_of_range("term_c: index in 0..5");
  auto& I = *impl_;
  I.ensure_lk();
  const double pref = I.c_prefactors()[static_cast<std::size_t>(index)];
  const std::string label = kCLabels[static_cast<std::size_t>(index)];
  const bool diag = index < 3;
  if (!I.active(pref)) return skipped_term(label, pref, kZeroPrefactor, !diag);
  const auto s = kCdShapes[static_cast<std::size_t>(index)];
  const Estimate integral = diag ? I.self_terms(s.on)[0] : I.curve_term(s.on, s.src, true, 1);
  return make_term(label, pref, integral, !diag);
}

Term TermEvaluator::term_d(int index) {
  if (index < 0 || index > 5) throw std::out_of_range("term_d: index in 0..5");
  auto& I = *impl_;
  I.ensure_lk();
  const double pref = I.d_prefactors()[static_cast<std::size_t>(index)];
  const std::string label = kDLabels[static_cast<std::size_t>(index)];
  const bool diag = index < 3;
  if (!I.active(pref)) return skipped_term(label, pref, kZeroPrefactor, !diag);
  const auto s = kCdShapes[static_cast<std::size_t>(index)];
  const Estimate integral = diag ? I.self_terms(s.on)[1] : I.curve_term(s.on, s.src, false, 2);
  return make_term(label, pref, integral, !diag);
}

const Estimate& TermEvaluator::volume_factor() {
  auto& I = *impl_;
  if (!I.volume) I.volume = I.run_volume({9}, {}, "volume").component(0);
  return *I.volume;
}

Term TermEvaluator::term_f(int i) {
  if (i < 0 || i > 2) throw std::out_of_range("term_f: i in 0..2");
  auto& I = *impl_;
  I.ensure_lk();
  const double pref = -2.0 * I.f_prefactor_scale();
  const std::string label = "f(" + std::to_string(i + 1) + ")";
  if (!I.active(pref)) return skipped_term(label, pref, kZeroPrefactor, true);
  I.compute_f_curve(i);
  const Estimate& c = *I.f_curve[static_cast<std::size_t>(i)];
  const Estimate& v = volume_factor();
  Estimate prod = v;
  prod.value = c.value * v.value;
  prod.std_error = std::hypot(c.value * v.std_error, v.value * c.std_error);
  prod.converged = c.converged && v.converged;
  return make_term(label, pref, prod, true);
}

Term TermEvaluator::term_e() {
  auto& I = *impl_;
  I.ensure_lk();
  const double pref = -2.0 * I.triple();
  if (!I.active(pref)) return skipped_term("e", pref, kZeroPrefactor, true);
  const Estimate& v = volume_factor();
  Estimate sq = v;
  sq.value = v.value * v.value;
  sq.std_error = 2.0 * std::abs(v.value) * v.std_error;
  return make_term("e", pref, sq, true);
}

TermBreakdown TermEvaluator::assemble() {
  auto& I = *impl_;
  TermBreakdown tb;
  auto t0 = Clock::now();
  I.ensure_lk();
  tb.lk = I.lk->lk;
  tb.lk_raw = I.lk->raw;
  tb.wall_seconds["linking"] = seconds_since(t0);

  const auto bp = I.b_prefactors();
  const auto cp = I.c_prefactors();
  const auto dp = I.d_prefactors();
  const auto wp = I.w_prefactors();
  const double fp = -2.0 * I.f_prefactor_scale();
  const double ep = -2.0 * I.triple();
  const bool f_on = I.active(fp), e_on = I.active(ep);

  // Deterministic pieces first: they fix the gradient used for the volume job's error target.
  t0 = Clock::now();
  for (int k = 0; k < 6; ++k) {
    if (k < 3 && !opts_.diagonal_terms) {
      tb.c[static_cast<std::size_t>(k)] = skipped_term(kCLabels[static_cast<std::size_t>(k)], cp[static_cast<std::size_t>(k)], "diagonal terms disabled", false);
      tb.d[static_cast<std::size_t>(k)] = skipped_term(kDLabels[static_cast<std::size_t>(k)], dp[static_cast<std::size_t>(k)], "diagonal terms disabled", false);
      continue;
    }
    tb.c[static_cast<std::size_t>(k)] = term_c(k);
    tb.d[static_cast<std::size_t>(k)] = term_d(k);
  }
  for (int i = 0; i < 3; ++i) {
    const auto ci = tb.c[static_cast<std::size_t>(i)].value;
    const auto di = tb.d[static_cast<std::size_t>(i)].value;
    tb.cd_diagonal[static_cast<std::size_t>(i)] = sum_independent({ci, di});
  }
  double f_curve_sum = 0.0;
  if (f_on) {
    for (int i = 0; i < 3; ++i) {
      I.compute_f_curve(i);
      tb.f_curve[static_cast<std::size_t>(i)] = *I.f_curve[static_cast<std::size_t>(i)];
      tb.f_curve_spread[static_cast<std::size_t>(i)] = I.f_spread[static_cast<std::size_t>(i)];
      f_curve_sum += tb.f_curve[static_cast<std::size_t>(i)].value;
    }
  }
  tb.wall_seconds["curve_terms"] = seconds_since(t0);

  // One volume job for every b label and the shared factor V.
  t0 = Clock::now();
  std::vector<int> items;
  std::vector<double> weights;
  for (int k = 0; k < 9; ++k)
    if (I.active(bp[static_cast<std::size_t>(k)])) {
      items.push_back(k);
      weights.push_back(bp[static_cast<std::size_t>(k)]);
    }
  const bool need_v = f_on || e_on;
  std::optional<VectorEstimate> vol;
  if (need_v) {
    items.push_back(9);
    // Rough gradient for the stopping rule; the final error uses the exact one.
    weights.push_back(fp * f_curve_sum);
  }
  if (!items.empty()) vol = I.run_volume(items, weights, "volume");
  tb.wall_seconds["volume"] = seconds_since(t0);

  for (int k = 0; k < 9; ++k) {
    const auto it = std::find(items.begin(), items.end(), k);
    if (it == items.end()) {
      tb.b[static_cast<std::size_t>(k)] = skipped_term(kBLabels[static_cast<std::size_t>(k)], bp[static_cast<std::size_t>(k)], kZeroPrefactor, true);
    } else {
      const auto comp = vol->component(static_cast<std::size_t>(it - items.begin()));
      I.b_cache[static_cast<std::size_t>(k)] = comp;
      tb.b[static_cast<std::size_t>(k)] = make_term(kBLabels[static_cast<std::size_t>(k)], bp[static_cast<std::size_t>(k)], comp, true);
    }
  }
  if (need_v) {
    I.volume = vol->component(items.size() - 1);
    tb.volume = *I.volume;
  }
  for (int i = 0; i < 3; ++i) tb.f[static_cast<std::size_t>(i)] = term_f(i);
  tb.e = term_e();

  // W: one pair job, blocks reported as components.
  t0 = Clock::now();
  std::vector<int> blocks;
  std::vector<double> bw;
  for (int k = 0; k < 6; ++k)
    if (I.active(wp[static_cast<std::size_t>(k)])) {
      blocks.push_back(k);
      bw.push_back(wp[static_cast<std::size_t>(k)]);
    }
  std::optional<VectorEstimate> wjob;
  if (!blocks.empty()) wjob = I.run_pair(blocks, bw);
  for (int k = 0; k < 6; ++k) {
    const auto it = std::find(blocks.begin(), blocks.end(), k);
    if (it == blocks.end()) {
      tb.W_blocks[static_cast<std::size_t>(k)] = skipped_term(kWLabels[static_cast<std::size_t>(k)], wp[static_cast<std::size_t>(k)], kZeroPrefactor, false);
    } else {
      tb.W_blocks[static_cast<std::size_t>(k)] = make_term(kWLabels[static_cast<std::size_t>(k)], wp[static_cast<std::size_t>(k)], wjob->component(static_cast<std::size_t>(it - blocks.begin())), false);
    }
  }
  tb.W = wjob ? make_term("W", 1.0, wjob->linear(bw), true) : skipped_term("W", 0.0, kZeroPrefactor, true);
  tb.wall_seconds["W"] = seconds_since(t0);

  // M with error propagation: the volume job is linearized around its mean
  // (f and e depend on V), deterministic pieces add their refinement deltas.
  double value = tb.W.value.value;
  double var = tb.W.value.std_error * tb.W.value.std_error;
  bool converged = tb.W.value.converged;
  std::uint64_t n_samples = tb.W.value.n_samples, n_excl = tb.W.value.n_excluded_singular;
  for (const auto& t : tb.b) value += t.value.value;
  for (int k = 3; k < 6; ++k) {
    for (const Term* t : {&tb.c[static_cast<std::size_t>(k)], &tb.d[static_cast<std::size_t>(k)]}) {
      value += t->value.value;
      var += t->value.std_error * t->value.std_error;
      converged = converged && t->value.converged;
    }
  }
  for (const auto& t : tb.f) value += t.value.value;
  value += tb.e.value.value;
  if (vol) {
    std::vector<double> grad(items.size(), 0.0);
    for (std::size_t m = 0; m < items.size(); ++m) {
      if (items[m] == 9) {
        const double V = vol->mean[m];
        grad[m] = (f_on ? fp * f_curve_sum : 0.0) + (e_on ? 2.0 * ep * V : 0.0);
      } else {
        grad[m] = bp[static_cast<std::size_t>(items[m])];
      }
    }
    const double se = vol->linear(grad).std_error;
    var += se * se;
    converged = converged && vol->converged;
    n_samples += vol->n_samples;
    n_excl += vol->n_excluded_singular;
    if (f_on) {
      for (int i = 0; i < 3; ++i) {
        const double dv = fp * tb.volume.value * tb.f_curve[static_cast<std::size_t>(i)].std_error;
        var += dv * dv;
        converged = converged && tb.f_curve[static_cast<std::size_t>(i)].converged;
      }
    }
  }
  tb.M.value = value;
  tb.M.std_error = std::sqrt(var);
  tb.M.n_samples = n_samples;
  tb.M.n_excluded_singular = n_excl;
  tb.M.converged = converged;
  tb.M.bias_warning = n_samples > 0 && n_excl * 1000 > n_samples;
  tb.M.seed = opts_.seed;
  tb.converged = converged;
  return tb;
}

nlohmann::json to_json(const Estimate& e) {
  return {{"value", e.value},
          {"std_error", e.std_error},
          {"n_samples", e.n_samples},
          {"n_excluded_singular", e.n_excluded_singular},
          {"converged", e.converged},
          {"bias_warning", e.bias_warning},
          {"seed", e.seed}};
}

nlohmann::json to_json(const Term& t) {
  nlohmann::json j = {{"label", t.label},
                      {"prefactor", t.prefactor},
                      {"value", to_json(t.value)},
                      {"integral", to_json(t.integral)},
                      {"in_sum", t.in_sum}};
  if (t.skipped) j["skip_reason"] = t.skip_reason;
  return j;
}

nlohmann::json to_json(const TermBreakdown& tb) {
  nlohmann::json j;
  j["lk"] = {{"12", tb.lk[0][1]}, {"23", tb.lk[1][2]}, {"31", tb.lk[2][0]}};
  j["lk_raw"] = {{"12", tb.lk_raw[0][1]}, {"23", tb.lk_raw[1][2]}, {"31", tb.lk_raw[2][0]}};
  j["W"] = to_json(tb.W);
  for (const auto& t : tb.W_blocks) j["W_blocks"].push_back(to_json(t));
  for (const auto& t : tb.b) j["b"].push_back(to_json(t));
  for (const auto& t : tb.c) j["c"].push_back(to_json(t));
  for (const auto& t : tb.d) j["d"].push_back(to_json(t));
  for (const auto& t : tb.f) j["f"].push_back(to_json(t));
  j["e"] = to_json(tb.e);
  j["volume_factor"] = to_json(tb.volume);
  for (int i = 0; i < 3; ++i) {
    j["f_curve"].push_back({{"estimate", to_json(tb.f_curve[static_cast<std::size_t>(i)])},
                            {"marked_point_spread", tb.f_curve_spread[static_cast<std::size_t>(i)]}});
    j["cd_diagonal_sum"].push_back(to_json(tb.cd_diagonal[static_cast<std::size_t>(i)]));
  }
  j["M"] = to_json(tb.M);
  j["converged"] = tb.converged;
  return j;
}

}  // namespace linkm
