#pragma once

#include <array>

#include "linkm/curves.hpp"
#include "linkm/quadrature.hpp"

namespace linkm {

/// (1/4pi) double integral of <x_a', x_b', x_a - x_b> / |x_a - x_b|^3 by the
/// double trapezoid rule, doubling until successive values agree within tol.
Estimate gauss_linking(const PeriodicCurve& a, const PeriodicCurve& b, double tol = 1e-12,
                       int n_max = 8192);

inline const Vec3 kDefaultProjection{0.2810846, 0.5477226, 0.7880108};

/// Half the signed count of crossings between the two n_poly-gons seen along
/// `direction`. A degenerate projection (tangential or vertex crossings) is
/// retried with up to 10 perturbed directions, then ConvergenceError.
int crossing_sign_linking(const PeriodicCurve& a, const PeriodicCurve& b, int n_poly = 4096,
                          const Vec3& direction = kDefaultProjection);

struct LinkingMatrix {
  std::array<std::array<int, 3>, 3> lk{};      // diagonal unused (0)
  std::array<std::array<double, 3>, 3> raw{};  // Gauss estimates
  std::array<std::array<double, 3>, 3> error{};

  int operator()(int i, int j) const {
    return lk[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  double max_residual() const;
};

/// Gauss route for all three pairs, rounded. Throws ConvergenceError when a
/// value is more than 1e-3 away from an integer.
LinkingMatrix linking_matrix(const CurveSet& curves, double tol = 1e-10);
LinkingMatrix linking_matrix(const Link3& link, double tol = 1e-10);

/// Crossing route for all three pairs.
std::array<std::array<int, 3>, 3> crossing_matrix(const CurveSet& curves, int n_poly = 4096);

}  // namespace linkm
