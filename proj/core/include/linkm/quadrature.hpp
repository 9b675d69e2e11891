#pragma once

// Integration engine shared by every term: periodic trapezoid rules, Gauss-Legendre
// panels, and importance-sampled Monte Carlo over R^3 and R^3 x R^3 with
// block-deterministic reduction.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "linkm/rng.hpp"
#include "linkm/vec.hpp"

namespace linkm {

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t n_samples = 0;
  std::uint64_t n_excluded_singular = 0;
  bool converged = true;
  bool bias_warning = false;  // more than 0.1% of samples excluded
  std::uint64_t seed = 0;

  static Estimate exact(double v) { return Estimate{v, 0.0, 0, 0, true, false, 0}; }
  Estimate scaled(double s) const;
};

/// Sum of independent estimates: values add, variances add.
Estimate sum_independent(const std::vector<Estimate>& parts);

/// Mean vector with the covariance of the mean (row-major k x k).
struct VectorEstimate {
  std::vector<double> mean;
  std::vector<double> covariance;
  std::uint64_t n_samples = 0;
  std::uint64_t n_excluded_singular = 0;
  bool converged = true;
  std::uint64_t seed = 0;

  std::size_t size() const { return mean.size(); }
  Estimate component(std::size_t i) const;
  /// w . mean with standard error sqrt(w^T C w).
  Estimate linear(std::span<const double> w) const;
};

/// Trapezoid rule on [0, 2*pi) with node doubling until two successive
/// refinements change the value by less than tol (absolute), or n_max is hit.
Estimate periodic_integral(const std::function<double(double)>& f, double tol, int n0 = 32,
                           int n_max = 1 << 20);

struct GaussLegendre {
  std::vector<double> x;  // nodes on [-1, 1]
  std::vector<double> w;
};
GaussLegendre gauss_legendre(int n);

/// Isotropic offset whose radius has density q(r) = 4 s^3 / (pi (s^2 + r^2)^2).
/// The 3-d density q(r) / (4 pi r^2) has an r^-6 tail, heavy enough to dominate
/// products of Biot-Savart potentials.
struct RadialProfile {
  double sigma = 1.0;

  /// 3-d density of the offset at squared length r2 > 0.
  double density(double r2) const {
    const double s2 = sigma * sigma;
    const double d = s2 + r2;
    return sigma * s2 / (kPi * kPi * r2 * d * d);
  }
  double sample_radius(CounterRng& rng) const;
  Vec3 sample_offset(CounterRng& rng) const { return sample_radius(rng) * rng.unit_vector(); }
};

struct McOptions {
  std::uint64_t budget = 1 << 16;       // sample cap
  std::uint64_t min_samples = 1 << 13;  // first stage; later stages double
  /// Stop once the standard error of target_weights . mean (or of component 0
  /// when the weights are empty) drops below this; 0 spends the whole budget.
  double target_std_error = 0.0;
  /// Also stop once the standard error is below target_relative * max(1, |value|).
  double target_relative = 0.0;
  std::vector<double> target_weights;
  std::uint32_t block_size = 1024;
  std::uint64_t seed = 0;
  std::string stream = "mc";
};

/// One Monte Carlo sample: fill out (length k) with f/p and return true, or
/// return false to exclude the sample as singular (it then contributes 0).
using SampleFn = std::function<bool(CounterRng& rng, std::span<double> out)>;

/// Runs blocks of samples on the worker pool; sample i draws from
/// CounterRng(seed, stream_id(stream), i) and blocks are merged in index order,
/// so the result is bit-identical for any worker count.
VectorEstimate mc_run(std::size_t k, const SampleFn& fn, const McOptions& opts);

/// Sampling density on R^3, strictly positive, integrating to 1.
class Proposal {
 public:
  virtual ~Proposal() = default;
  virtual Vec3 sample(CounterRng& rng) const = 0;
  virtual double density(const Vec3& x) const = 0;
};

/// Importance-sampled integral of f over R^3. f may return NaN to flag a
/// singular sample.
Estimate mc_volume(const std::function<double(const Vec3&)>& f, const Proposal& proposal,
                   const McOptions& opts);

/// Pair sampling for integrands over R^3 x R^3 with an |x - y|^-2 singularity:
/// with probability 1 - close_weight draw x, y independently from the proposal,
/// otherwise draw z from the proposal, offset it by the close profile, and put z
/// at x or y with equal odds. The estimator divides by the full mixture density.
struct PairSampler {
  const Proposal* proposal = nullptr;
  RadialProfile close;
  double close_weight = 0.5;

  void sample(CounterRng& rng, Vec3& x, Vec3& y) const;
  /// Mixture density given the single-point densities p(x), p(y).
  double density(double px, double py, const Vec3& x, const Vec3& y) const;
};

Estimate mc_pair_volume(const std::function<double(const Vec3&, const Vec3&)>& f,
                        const PairSampler& sampler, const McOptions& opts);

/// Evaluates m vector fields at x and the proposal density there; false when
/// x is singular for any of them.
using FieldFn = std::function<bool(const Vec3& x, std::span<Vec3> fields, double& density)>;

struct HelicityOptions {
  std::uint32_t batch_points = 1024;  // independent points per batch
  std::uint32_t close_points = 256;   // antithetic close-pair samples per batch
  double split_radius = 0.1;          // kernel split radius
};

/// Gauss-type pair integrals
///   I_kl = (1/4pi) int int <a_k(x), a_l(y), x - y> / |x - y|^3 dx dy,  k <= l,
/// returned in row-major upper-triangle order. The kernel is split at
/// split_radius: the bounded far part is a U-statistic over all point pairs of
/// a batch, the near part an antithetic close-pair stream whose offset density
/// cancels the singularity. One Monte Carlo sample of opts is one batch.
VectorEstimate mc_helicity_pair(std::size_t m, const FieldFn& fields, const Proposal& proposal,
                                const HelicityOptions& hopts, const McOptions& opts);

}  // namespace linkm
