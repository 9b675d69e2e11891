#pragma once

// Uniformly sampled 2*pi-periodic functions and the FFT helpers built on them.

#include <vector>

namespace linkm {

/// Samples f(2*pi*k/n), k = 0..n-1. Off-grid values come from 8-point local
/// Lagrange interpolation.
class PeriodicSamples {
 public:
  PeriodicSamples() = default;
  explicit PeriodicSamples(std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  bool empty() const { return values_.empty(); }

  double operator()(double t) const;
  /// Values on an m-node uniform grid (stride when m divides size()).
  std::vector<double> on_grid(std::size_t m) const;

 private:
  std::vector<double> values_;
};

/// Splits the antiderivative of g (samples of a periodic function on a uniform
/// grid) into slope * t + periodic part; the periodic part vanishes at t = 0.
/// Computed spectrally, exact for trigonometric polynomials below Nyquist.
struct Antiderivative {
  double slope = 0.0;  // mean of g
  std::vector<double> periodic;
};
Antiderivative spectral_antiderivative(const std::vector<double>& g);

/// Magnitude of the top half of the spectrum relative to the total: a cheap
/// resolution indicator for sampled periodic data.
double spectral_tail(const std::vector<double>& g);

}  // namespace linkm
