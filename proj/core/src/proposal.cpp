#include "linkm/proposal.hpp"

#include <cmath>
#include <limits>

#include "linkm/errors.hpp"

namespace linkm {

void SamplerSpec::validate() const {
  if (sigma_tube < 0.0 || broad_scale < 0.0 || close_sigma < 0.0 || split_radius < 0.0)
    throw ValidationError("sampler: scales must be non-negative");
  if (!(tube_weight >= 0.0 && tube_weight < 1.0))
    throw ValidationError("sampler: tube_weight must lie in [0, 1) so the broad part stays positive");
  if (!(close_weight >= 0.0 && close_weight < 1.0))
    throw ValidationError("sampler: close_weight must lie in [0, 1)");
  if (pair_batch < 2) throw ValidationError("sampler: pair_batch must be at least 2");
}

LinkProposal::LinkProposal(std::array<const CurveSource*, 3> sources, const SamplerSpec& spec,
                           double min_separation)
    : sources_(sources), spec_(spec) {
  spec_.validate();
  for (const auto* s : sources_)
    if (!s) throw std::invalid_argument("LinkProposal: null source");
  tube_.sigma = spec_.sigma_tube > 0.0 ? spec_.sigma_tube : 0.5 * min_separation;
  if (!(tube_.sigma > 0.0)) throw ValidationError("LinkProposal: tube scale must be positive");
  center_ = (sources_[0]->centroid() + sources_[1]->centroid() + sources_[2]->centroid()) / 3.0;
  double r = 0.0;
  for (const auto* s : sources_) r = std::max(r, s->radius_about(center_));
  broad_.sigma = spec_.broad_scale > 0.0 ? spec_.broad_scale : r;
  close_.sigma = spec_.close_sigma > 0.0 ? spec_.close_sigma : tube_.sigma;
  split_radius_ = spec_.split_radius > 0.0 ? spec_.split_radius : 0.25 * min_separation;
}

Vec3 LinkProposal::sample(CounterRng& rng) const {
  const double u = rng.uniform();
  if (u < spec_.tube_weight) {
    const int c = std::min(2, static_cast<int>(3.0 * u / spec_.tube_weight));
    const double t = kTwoPi * rng.uniform();
    return sources_[static_cast<std::size_t>(c)]->curve().eval(t).position + tube_.sample_offset(rng);
  }
  return center_ + broad_.sample_offset(rng);
}

double LinkProposal::combine(const std::array<double, 3>& tube_densities, const Vec3& x) const {
  const double r2 = norm2(x - center_);
  const double broad = r2 > 0.0 ? broad_.density(r2) : std::numeric_limits<double>::infinity();
  return spec_.tube_weight / 3.0 * (tube_densities[0] + tube_densities[1] + tube_densities[2]) +
         (1.0 - spec_.tube_weight) * broad;
}

double LinkProposal::density(const Vec3& x) const {
  std::array<double, 3> t{};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto v = sources_[i]->evaluate(x, &tube_);
    if (v.singular) return std::numeric_limits<double>::quiet_NaN();
    t[i] = v.tube_density;
  }
  return combine(t, x);
}

PairSampler LinkProposal::pair_sampler() const {
  return PairSampler{this, close_, spec_.close_weight};
}

HelicityOptions LinkProposal::helicity_options() const {
  return HelicityOptions{spec_.pair_batch, spec_.close_points, split_radius_};
}

}  // namespace linkm
