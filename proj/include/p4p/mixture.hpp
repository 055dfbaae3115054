#pragma once

// The mixture of alternative outcome distributions closest to the target in
// total variation:
//
//   min_{lambda in simplex, mu >= 0}  sum_j mu_j
//   s.t.  F_n,j - sum_i lambda_i F_i,j <= mu_j   for every outcome j.
//
// This is the dual of the statistical min-budget LP for uniform costs. Its
// optimum is 1 - R*, and it certifies non-implementability when it hits 0.

#include <vector>

#include "p4p/convex.hpp"
#include "p4p/core.hpp"

namespace p4p::detail {

struct ClosestMixture {
  std::vector<double> weights;  // over the n-1 alternatives
  std::vector<double> slacks;   // mu_j
  double distance = 0.0;        // TV(F_n, sum_i lambda_i F_i)
};

/// Separations at or below this are treated as an exact mixture match.
inline constexpr double kSeparationFloor = 1e-9;

inline ClosestMixture closest_mixture(const std::vector<OutcomeDistribution>& dists) {
  const std::size_t n = dists.size();
  if (n < 2) throw Error(ErrorCode::MalformedSetting, "need at least two distributions");
  const std::size_t m = dists.back().size();
  const std::size_t alts = n - 1;
  // Variables: lambda (alts), mu (m).
  convex::LinearProgram lp(alts + m);
  std::vector<double> obj(alts + m, 0.0);
  for (std::size_t j = 0; j < m; ++j) obj[alts + j] = 1.0;
  lp.set_objective(obj);
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<double> row(alts + m, 0.0);
    for (std::size_t i = 0; i < alts; ++i) {
      if (dists[i].size() != m) throw Error(ErrorCode::ArityMismatch, "distribution lengths differ");
      row[i] = dists[i][j];
    }
    row[alts + j] = 1.0;
    // sum_i lambda_i F_ij + mu_j >= F_nj
    lp.add_row(std::move(row), convex::RowSense::GreaterEqual, dists.back()[j]);
  }
  std::vector<double> simplex(alts + m, 0.0);
  for (std::size_t i = 0; i < alts; ++i) simplex[i] = 1.0;
  lp.add_row(std::move(simplex), convex::RowSense::Equal, 1.0);

  const auto out = convex::solve_lp(lp);
  if (out.status != convex::Status::Optimal) {
    throw Error(ErrorCode::NumericalBreakdown, "closest-mixture LP did not solve");
  }
  ClosestMixture res;
  res.weights.assign(out.primal.begin(), out.primal.begin() + static_cast<long>(alts));
  res.slacks.assign(out.primal.begin() + static_cast<long>(alts), out.primal.end());
  double total = 0.0;
  for (double& w : res.weights) {
    w = std::max(w, 0.0);
    total += w;
  }
  for (double& w : res.weights) w /= total;
  for (double& s : res.slacks) s = std::max(s, 0.0);
  res.distance = 0.0;
  for (double s : res.slacks) res.distance += s;
  return res;
}

/// Throws NotImplementable, carrying the mixture weights, when some mixture of
/// the alternatives reproduces the target distribution.
inline void require_implementable(const std::vector<OutcomeDistribution>& dists) {
  const auto mix = closest_mixture(dists);
  if (mix.distance <= kSeparationFloor) {
    throw Error(ErrorCode::NotImplementable,
                "a mixture of cheaper actions reproduces the target distribution", mix.weights);
  }
}

}  // namespace p4p::detail
