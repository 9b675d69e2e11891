#include "linkm/quadrature.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "linkm/errors.hpp"
#include "linkm/parallel.hpp"

namespace linkm {

Estimate Estimate::scaled(double s) const {
  Estimate e = *this;
  e.value *= s;
  e.std_error *= std::abs(s);
  return e;
}

Estimate sum_independent(const std::vector<Estimate>& parts) {
  Estimate total = Estimate::exact(0.0);
  double var = 0.0;
  for (const auto& p : parts) {
    total.value += p.value;
    var += p.std_error * p.std_error;
    total.n_samples += p.n_samples;
    total.n_excluded_singular += p.n_excluded_singular;
    total.converged = total.converged && p.converged;
    total.bias_warning = total.bias_warning || p.bias_warning;
  }
  total.std_error = std::sqrt(var);
  return total;
}

Estimate VectorEstimate::component(std::size_t i) const {
  Estimate e;
  e.value = mean.at(i);
  e.std_error = std::sqrt(std::max(0.0, covariance[i * size() + i]));
  e.n_samples = n_samples;
  e.n_excluded_singular = n_excluded_singular;
  e.converged = converged;
  e.bias_warning = n_samples > 0 && n_excluded_singular * 1000 > n_samples;
  e.seed = seed;
  return e;
}

Estimate VectorEstimate::linear(std::span<const double> w) const {
  const std::size_t k = size();
  if (w.size() != k) throw std::invalid_argument("VectorEstimate::linear: weight size mismatch");
  Estimate e = component(0);
  e.value = 0.0;
  double var = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    if (w[a] == 0.0) continue;
    e.value += w[a] * mean[a];
    for (std::size_t b = 0; b < k; ++b) var += w[a] * w[b] * covariance[a * k + b];
  }
  e.std_error = std::sqrt(std::max(0.0, var));
  return e;
}

Estimate periodic_integral(const std::function<double(double)>& f, double tol, int n0,
                           int n_max) {
  int n = std::max(4, n0);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += f(kTwoPi * i / n);
  double value = kTwoPi * sum / n;
  double delta = std::numeric_limits<double>::infinity();
  int calm = 0;
  while (n < n_max) {
    double extra = 0.0;
    for (int i = 0; i < n; ++i) extra += f(kTwoPi * (i + 0.5) / n);
    sum += extra;
    n *= 2;
    const double next = kTwoPi * sum / n;
    delta = std::abs(next - value);
    value = next;
    calm = delta < tol ? calm + 1 : 0;
    if (calm >= 2) break;
  }
  Estimate e;
  e.value = value;
  e.std_error = delta;
  e.n_samples = static_cast<std::uint64_t>(n);
  e.converged = calm >= 2;
  return e;
}

GaussLegendre gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
  GaussLegendre gl;
  gl.x.resize(static_cast<std::size_t>(n));
  gl.w.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    gl.x[static_cast<std::size_t>(i)] = -z;
    gl.x[static_cast<std::size_t>(n - 1 - i)] = z;
    gl.w[static_cast<std::size_t>(i)] = w;
    gl.w[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  return gl;
}

double RadialProfile::sample_radius(CounterRng& rng) const {
  // sigma |Z| / sqrt(chi^2_3) is sigma / sqrt(3) times a |Student-t_3| draw.
  const double z = rng.normal();
  const double a = rng.normal(), b = rng.normal(), c = rng.normal();
  const double chi2 = a * a + b * b + c * c;
  return sigma * std::abs(z) / std::sqrt(chi2);
}

namespace {

struct BlockStats {
  std::uint64_t n = 0;
  std::uint64_t excluded = 0;
  std::vector<double> mean;
  std::vector<double> m2;  // centered co-moments, k x k
};

BlockStats run_block(std::size_t k, const SampleFn& fn, std::uint64_t seed, std::uint64_t stream,
                     std::uint64_t first, std::uint64_t count) {
  BlockStats s;
  s.n = count;
  s.mean.assign(k, 0.0);
  s.m2.assign(k * k, 0.0);
  std::vector<double> values(k * count, 0.0);
  for (std::uint64_t j = 0; j < count; ++j) {
    CounterRng rng(seed, stream, first + j);
    std::span<double> out(values.data() + j * k, k);
    if (!fn(rng, out)) {
      std::fill(out.begin(), out.end(), 0.0);
      ++s.excluded;
      continue;
    }
    for (double v : out) {
      if (!std::isfinite(v)) throw ConvergenceError("mc_run: non-finite sample value");
    }
  }
  for (std::uint64_t j = 0; j < count; ++j)
    for (std::size_t a = 0; a < k; ++a) s.mean[a] += values[j * k + a];
  for (auto& m : s.mean) m /= static_cast<double>(count);
  for (std::uint64_t j = 0; j < count; ++j) {
    const double* v = values.data() + j * k;
    for (std::size_t a = 0; a < k; ++a) {
      const double da = v[a] - s.mean[a];
      for (std::size_t b = a; b < k; ++b) s.m2[a * k + b] += da * (v[b] - s.mean[b]);
    }
  }
  return s;
}

void merge(BlockStats& acc, const BlockStats& blk, std::size_t k) {
  if (acc.n == 0) {
    acc = blk;
    return;
  }
  const double na = static_cast<double>(acc.n), nb = static_cast<double>(blk.n);
  const double n = na + nb;
  std::vector<double> delta(k);
  for (std::size_t a = 0; a < k; ++a) delta[a] = blk.mean[a] - acc.mean[a];
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a; b < k; ++b)
      acc.m2[a * k + b] += blk.m2[a * k + b] + delta[a] * delta[b] * na * nb / n;
    acc.mean[a] += delta[a] * nb / n;
  }
  acc.n += blk.n;
  acc.excluded += blk.excluded;
}

VectorEstimate finish(const BlockStats& s, std::size_t k) {
  VectorEstimate e;
  e.mean = s.mean;
  e.covariance.assign(k * k, 0.0);
  e.n_samples = s.n;
  e.n_excluded_singular = s.excluded;
  if (s.n > 1) {
    const double denom = static_cast<double>(s.n) * static_cast<double>(s.n - 1);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a; b < k; ++b) {
        e.covariance[a * k + b] = s.m2[a * k + b] / denom;
        e.covariance[b * k + a] = e.covariance[a * k + b];
      }
  }
  return e;
}

}  // namespace

VectorEstimate mc_run(std::size_t k, const SampleFn& fn, const McOptions& opts) {
  if (k == 0) throw std::invalid_argument("mc_run: empty integrand");
  if (opts.block_size == 0) throw std::invalid_argument("mc_run: block_size must be positive");
  const std::uint64_t stream = stream_id(opts.stream);
  const std::uint64_t bs = opts.block_size;
  const std::uint64_t budget = std::max<std::uint64_t>(opts.budget, 2);

  BlockStats acc;
  std::uint64_t done = 0;
  std::uint64_t stage = std::clamp<std::uint64_t>(opts.min_samples, 2, budget);
  VectorEstimate result;
  for (;;) {
    const std::uint64_t count = std::min(stage, budget - done);
    const std::uint64_t n_blocks = (count + bs - 1) / bs;
    std::vector<BlockStats> blocks(n_blocks);
    parallel_for(n_blocks, [&](std::size_t b) {
      const std::uint64_t first = done + b * bs;
      const std::uint64_t n = std::min(bs, done + count - first);
      blocks[b] = run_block(k, fn, opts.seed, stream, first, n);
    });
    for (const auto& blk : blocks) merge(acc, blk, k);
    done += count;

    result = finish(acc, k);
    const Estimate tracked = opts.target_weights.empty() ? result.component(0)
                                                        : result.linear(opts.target_weights);
    const bool has_target = opts.target_std_error > 0.0 || opts.target_relative > 0.0;
    const bool reached =
        (opts.target_std_error > 0.0 && tracked.std_error <= opts.target_std_error) ||
        (opts.target_relative > 0.0 &&
         tracked.std_error <= opts.target_relative * std::max(1.0, std::abs(tracked.value)));
    if (reached || done >= budget) {
      result.converged = !has_target || reached;
      break;
    }
    stage = done;  // double the sample count
  }
  result.seed = opts.seed;
  return result;
}

Estimate mc_volume(const std::function<double(const Vec3&)>& f, const Proposal& proposal,
                   const McOptions& opts) {
  const auto r = mc_run(
      1,
      [&](CounterRng& rng, std::span<double> out) {
        const Vec3 x = proposal.sample(rng);
        const double v = f(x);
        if (std::isnan(v)) return false;
        const double p = proposal.density(x);
        if (std::isnan(p)) return false;
        out[0] = v / p;
        return true;
      },
      opts);
  return r.component(0);
}

void PairSampler::sample(CounterRng& rng, Vec3& x, Vec3& y) const {
  if (rng.uniform() >= close_weight) {
    x = proposal->sample(rng);
    y = proposal->sample(rng);
    return;
  }
  const Vec3 z = proposal->sample(rng);
  const Vec3 w = z + close.sample_offset(rng);
  if (rng.uniform() < 0.5) {
    x = z;
    y = w;
  } else {
    x = w;
    y = z;
  }
}

double PairSampler::density(double px, double py, const Vec3& x, const Vec3& y) const {
  const double r2 = norm2(x - y);
  return (1.0 - close_weight) * px * py + close_weight * 0.5 * (px + py) * close.density(r2);
}

Estimate mc_pair_volume(const std::function<double(const Vec3&, const Vec3&)>& f,
                        const PairSampler& sampler, const McOptions& opts) {
  const auto r = mc_run(
      1,
      [&](CounterRng& rng, std::span<double> out) {
        Vec3 x, y;
        sampler.sample(rng, x, y);
        const double v = f(x, y);
        if (std::isnan(v) || x == y) return false;
        const double px = sampler.proposal->density(x);
        const double py = sampler.proposal->density(y);
        if (std::isnan(px) || std::isnan(py)) return false;
        out[0] = v / sampler.density(px, py, x, y);
        return true;
      },
      opts);
  return r.component(0);
}

VectorEstimate mc_helicity_pair(std::size_t m, const FieldFn& fields, const Proposal& proposal,
                                const HelicityOptions& hopts, const McOptions& opts) {
  if (m == 0) throw std::invalid_argument("mc_helicity_pair: no fields");
  if (hopts.batch_points < 2) throw std::invalid_argument("mc_helicity_pair: batch_points must be >= 2");
  if (!(hopts.split_radius > 0.0)) throw std::invalid_argument("mc_helicity_pair: split_radius must be positive");
  const std::size_t n = hopts.batch_points;
  const std::size_t nc = hopts.close_points;
  const std::size_t k = m * (m + 1) / 2;
  const double eps = hopts.split_radius;
  const double eps2 = eps * eps;
  std::atomic<std::uint64_t> excluded{0};

  auto index = [m](std::size_t a, std::size_t b) { return a * m - a * (a + 1) / 2 + b; };

  auto result = mc_run(
      k,
      [&](CounterRng& rng, std::span<double> out) {
        std::vector<Vec3> X(n), F(n * m);
        std::uint64_t excl = 0;
        for (std::size_t a = 0; a < n; ++a) {
          X[a] = proposal.sample(rng);
          double p = 0.0;
          const std::span<Vec3> fa(F.data() + a * m, m);
          if (!fields(X[a], fa, p) || !(p > 0.0)) {
            std::fill(fa.begin(), fa.end(), Vec3{});
            ++excl;
            continue;
          }
          for (auto& v : fa) v = v / p;
        }
        std::vector<double> acc(k, 0.0);
        std::vector<Vec3> T(m);
        for (std::size_t a = 0; a < n; ++a) {
          std::fill(T.begin(), T.end(), Vec3{});
          for (std::size_t c = 0; c < n; ++c) {
            if (c == a) continue;
            const Vec3 u = X[a] - X[c];
            const double r2 = norm2(u);
            if (r2 == 0.0) continue;
            const double r = std::sqrt(r2);
            const double s = r2 < eps2 ? 1.0 / (eps2 * r) : 1.0 / (r2 * r);
            const Vec3 ku = u * s;
            for (std::size_t l = 0; l < m; ++l) T[l] += cross(F[c * m + l], ku);
          }
          for (std::size_t p = 0; p < m; ++p)
            for (std::size_t q = p; q < m; ++q) acc[index(p, q)] += dot(F[a * m + p], T[q]);
        }
        const double far_norm = 1.0 / (kFourPi * static_cast<double>(n) * static_cast<double>(n - 1));
        for (std::size_t j = 0; j < k; ++j) out[j] = acc[j] * far_norm;
        if (nc == 0) {
          if (excl) excluded += excl;
          return true;
        }

        // Near part: y = x +- r h with offset density (1 - r^2/eps^2) / (r^2 8 pi eps / 3)
        // on the ball, which leaves the bounded weight -(eps/3) h after antithetic pairing.
        std::fill(acc.begin(), acc.end(), 0.0);
        std::vector<Vec3> f0(m), fp(m), fm(m);
        for (std::size_t j = 0; j < nc; ++j) {
          const Vec3 x = proposal.sample(rng);
          double r;
          do {
            r = eps * rng.uniform();
          } while (rng.uniform() > 1.0 - r * r / eps2);
          const Vec3 h = rng.unit_vector();
          double p = 0.0, unused = 0.0;
          if (!fields(x, f0, p) || !(p > 0.0) || !fields(x + r * h, fp, unused) ||
              !fields(x - r * h, fm, unused)) {
            ++excl;
            continue;
          }
          const double w = -eps / (3.0 * p);
          for (std::size_t a = 0; a < m; ++a) {
            fp[a] = cross(fp[a] - fm[a], h);
          }
          for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = a; b < m; ++b)
              acc[index(a, b)] += 0.5 * w * (dot(f0[a], fp[b]) + dot(f0[b], fp[a]));
        }
        for (std::size_t j = 0; j < k; ++j) out[j] += acc[j] / static_cast<double>(nc);
        if (excl) excluded += excl;
        return true;
      },
      opts);
  result.n_samples *= n + 3 * nc;
  result.n_excluded_singular = excluded.load();
  return result;
}

}  // namespace linkm
