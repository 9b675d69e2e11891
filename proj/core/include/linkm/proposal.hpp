#pragma once

// Mixture proposal for Monte Carlo over R^3: one tube component per link
// component (uniform curve parameter plus an isotropic heavy-tailed offset)
// and one broad component around the whole link.

#include <array>

#include "linkm/potentials.hpp"
#include "linkm/quadrature.hpp"

namespace linkm {

struct SamplerSpec {
  double sigma_tube = 0.0;       // 0: 0.5 * min_separation
  double tube_weight = 0.7;      // split equally among the three tubes
  double broad_scale = 0.0;      // 0: radius of the link about its centroid
  double close_weight = 0.5;     // pair sampling: share of close pairs
  double close_sigma = 0.0;      // 0: sigma_tube
  double split_radius = 0.0;     // helicity pair kernel split; 0: 0.25 * min_separation
  std::uint32_t pair_batch = 1024;
  std::uint32_t close_points = 256;

  void validate() const;
};

class LinkProposal final : public Proposal {
 public:
  LinkProposal(std::array<const CurveSource*, 3> sources, const SamplerSpec& spec,
               double min_separation);

  Vec3 sample(CounterRng& rng) const override;
  /// Evaluates the tube densities by curve quadrature; NaN when x is on a curve.
  double density(const Vec3& x) const override;
  /// Mixture density from tube densities already computed by CurveSource::evaluate.
  double combine(const std::array<double, 3>& tube_densities, const Vec3& x) const;

  const RadialProfile& tube() const { return tube_; }
  const RadialProfile& broad() const { return broad_; }
  const Vec3& center() const { return center_; }
  PairSampler pair_sampler() const;
  HelicityOptions helicity_options() const;

 private:
  std::array<const CurveSource*, 3> sources_;
  SamplerSpec spec_;
  RadialProfile tube_;
  RadialProfile broad_;
  RadialProfile close_;
  double split_radius_ = 0.0;
  Vec3 center_;
};

}  // namespace linkm
