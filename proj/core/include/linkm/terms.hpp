#pragma once

// Every named contribution to M for a 3-component link, and their sum.

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "linkm/gauge.hpp"
#include "linkm/linking.hpp"
#include "linkm/potentials.hpp"
#include "linkm/proposal.hpp"
#include "linkm/quadrature.hpp"

namespace linkm {

struct MOptions {
  std::uint64_t seed = 1;
  /// Skip terms whose integer prefactor is 0. When off, every term is
  /// integrated and prefactors use the unrounded Gauss estimates.
  bool short_circuit = true;
  /// f_i carries the prefactor (1,2)(2,3)(3,1), like e.
  bool f_triple_prefactor = true;
  /// Multiplier on every b prefactor. 2 is the cross-term weight of the
  /// helicity expansion; 1 reproduces the printed coefficients.
  double b_factor = 2.0;
  GaugeMeasure gauge_measure = GaugeMeasure::Arclength;
  PotentialOptions potential;
  std::size_t phi_grid = 2048;
  int curve_nodes = 256;          // off-diagonal c, d: trapezoid at n and 2n
  int self_nodes = 256;           // diagonal c, d: Richardson over n, 2n, 4n
  double linking_tol = 1e-10;
  std::uint64_t volume_budget = 1 << 16;
  std::uint64_t pair_budget = 1 << 16;
  double target_rel_std_error = 1e-3;
  std::uint32_t block_size = 1024;
  SamplerSpec sampler;
  bool diagonal_terms = true;     // c_{i;i}, d_{i;i} for the c = -d check
};

struct Term {
  std::string label;
  double prefactor = 0.0;
  Estimate integral;  // without the prefactor
  Estimate value;     // prefactor * integral
  bool skipped = false;
  std::string skip_reason;
  bool in_sum = true;  // part of M (diagonal c, d and W blocks are not summed separately)
};

struct TermBreakdown {
  std::array<std::array<int, 3>, 3> lk{};
  std::array<std::array<double, 3>, 3> lk_raw{};
  Term W;
  std::array<Term, 6> W_blocks;  // (12,12) (23,23) (31,31) (12,23) (23,31) (31,12)
  std::array<Term, 9> b;
  std::array<Term, 6> c;  // (1;1) (2;2) (3;3) (1;2) (2;3) (3;1)
  std::array<Term, 6> d;
  std::array<Term, 3> f;
  Term e;
  Estimate volume;  // int <A1, A2, A3> dx, shared by f and e
  std::array<Estimate, 3> f_curve;        // marked-point averaged curve factor of f_i
  std::array<double, 3> f_curve_spread{}; // max - min over marked points
  std::array<Estimate, 3> cd_diagonal;    // c_{i;i} + d_{i;i}
  Estimate M;
  bool converged = true;
  std::map<std::string, double> wall_seconds;  // not part of the deterministic body
};

/// Lazily computes and caches the shared ingredients (linking numbers, scalar
/// potentials, sources, proposal, shared volume factor) for one link.
class TermEvaluator {
 public:
  TermEvaluator(CurveSet curves, MOptions opts);
  explicit TermEvaluator(const Link3& link, MOptions opts = {});
  ~TermEvaluator();

  const LinkingMatrix& linking();
  const std::array<ScalarPotentialTable, 3>& phi();
  const MOptions& options() const { return opts_; }

  Term term_W();
  /// index into the 9 labels, in TermBreakdown order
  Term term_b(int index);
  Term term_c(int index);
  Term term_d(int index);
  Term term_f(int i);
  Term term_e();
  const Estimate& volume_factor();

  TermBreakdown assemble();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  MOptions opts_;
};

inline TermBreakdown assemble_M(const CurveSet& curves, const MOptions& opts = {}) {
  return TermEvaluator(curves, opts).assemble();
}
inline TermBreakdown assemble_M(const Link3& link, const MOptions& opts = {}) {
  return TermEvaluator(link, opts).assemble();
}

extern const std::array<const char*, 9> kBLabels;
extern const std::array<const char*, 6> kCLabels;
extern const std::array<const char*, 6> kDLabels;

nlohmann::json to_json(const Estimate& e);
nlohmann::json to_json(const Term& t);
/// Deterministic body only; wall times are emitted separately by the caller.
nlohmann::json to_json(const TermBreakdown& tb);

}  // namespace linkm
