#include "linkm/periodic.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <stdexcept>

#include "linkm/vec.hpp"

namespace linkm {

namespace {

// The FFTW planner is not thread-safe; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::vector<std::complex<double>> forward(const std::vector<double>& g) {
  const int n = static_cast<int>(g.size());
  std::vector<double> in(g);
  std::vector<std::complex<double>> out(static_cast<std::size_t>(n / 2 + 1));
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

std::vector<double> inverse(std::vector<std::complex<double>> spec, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_c2r_1d(n, reinterpret_cast<fftw_complex*>(spec.data()), out.data(),
                                FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  for (auto& v : out) v /= n;
  return out;
}

}  // namespace

PeriodicSamples::PeriodicSamples(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() < 8) throw std::invalid_argument("PeriodicSamples: need at least 8 samples");
}

double PeriodicSamples::operator()(double t) const {
  const int n = static_cast<int>(values_.size());
  const double u = t / kTwoPi * n;
  const double fl = std::floor(u);
  const double frac = u - fl;
  const long base = static_cast<long>(fl);
  if (frac == 0.0) {
    return values_[static_cast<std::size_t>(((base % n) + n) % n)];
  }
  // nodes base-3 .. base+4, abscissae -3..4 relative to base
  double num = 0.0, den = 0.0;
  static constexpr double kBary[8] = {-1.0 / 5040, 1.0 / 720, -1.0 / 240, 1.0 / 144,
                                      -1.0 / 144,  1.0 / 240, -1.0 / 720, 1.0 / 5040};
  long idx = ((base - 3) % n + n) % n;
  for (int j = 0; j < 8; ++j) {
    const double w = kBary[j] / (frac - (j - 3));
    num += w * values_[static_cast<std::size_t>(idx)];
    den += w;
    if (++idx == n) idx = 0;
  }
  return num / den;
}

std::vector<double> PeriodicSamples::on_grid(std::size_t m) const {
  std::vector<double> out(m);
  if (m > 0 && values_.size() % m == 0) {
    const std::size_t stride = values_.size() / m;
    for (std::size_t k = 0; k < m; ++k) out[k] = values_[k * stride];
    return out;
  }
  for (std::size_t k = 0; k < m; ++k) out[k] = (*this)(kTwoPi * static_cast<double>(k) / m);
  return out;
}

Antiderivative spectral_antiderivative(const std::vector<double>& g) {
  const int n = static_cast<int>(g.size());
  if (n < 8 || n % 2 != 0) throw std::invalid_argument("spectral_antiderivative: even n >= 8");
  auto spec = forward(g);
  Antiderivative a;
  a.slope = spec[0].real() / n;
  spec[0] = 0.0;
  spec[static_cast<std::size_t>(n / 2)] = 0.0;
  for (int k = 1; k < n / 2; ++k) spec[static_cast<std::size_t>(k)] /= std::complex<double>(0.0, k);
  a.periodic = inverse(std::move(spec), n);
  const double at0 = a.periodic[0];
  for (auto& v : a.periodic) v -= at0;
  return a;
}

double spectral_tail(const std::vector<double>& g) {
  const auto spec = forward(g);
  double total = 0.0, tail = 0.0;
  for (std::size_t k = 1; k < spec.size(); ++k) {
    const double m = std::abs(spec[k]);
    total += m;
    if (k >= spec.size() / 2) tail += m;
  }
  return total > 0.0 ? tail / total : 0.0;
}

}  // namespace linkm
