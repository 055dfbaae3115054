#pragma once

// Composite hypothesis testing of the target distribution F_n (the last row)
// against the alternatives F_1..F_{n-1}, and the conversions between tests
// and cost-robust contracts.

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "p4p/contracts.hpp"
#include "p4p/convex.hpp"
#include "p4p/core.hpp"
#include "p4p/mixture.hpp"

namespace p4p {

namespace detail {

inline void check_family(const std::vector<OutcomeDistribution>& dists, std::size_t m) {
  if (dists.size() < 2) {
    throw Error(ErrorCode::MalformedSetting, "need a target and at least one alternative");
  }
  for (const auto& d : dists) {
    if (d.size() != m) throw Error(ErrorCode::ArityMismatch, "arity mismatch");
  }
}

}  // namespace detail

inline double tv_distance(const OutcomeDistribution& p, const OutcomeDistribution& q) {
  if (p.size() != q.size()) throw Error(ErrorCode::ArityMismatch, "arity mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) s += std::abs(p[j] - q[j]);
  return 0.5 * s;
}

inline RiskReport risk_report(const std::vector<OutcomeDistribution>& dists,
                              const HypothesisTest& psi) {
  detail::check_family(dists, psi.size());
  RiskReport r;
  const auto& target = dists.back();
  double tp = 0.0;
  for (std::size_t j = 0; j < psi.size(); ++j) tp += target[j] * psi[j];
  r.tp_rate = tp;
  r.fn_rate = 1.0 - tp;
  for (std::size_t k = 0; k + 1 < dists.size(); ++k) {
    double fp = 0.0;
    for (std::size_t j = 0; j < psi.size(); ++j) fp += dists[k][j] * psi[j];
    r.fp_per_alternative.push_back(fp);
  }
  r.sum_risk = r.fp() + r.fn_rate;
  if (tp <= 0.0) {
    r.ratio_undefined = true;
    r.ratio_risk = std::numeric_limits<double>::infinity();
  } else {
    r.ratio_risk = r.fp() / tp;
  }
  return r;
}

struct MinimaxTest {
  HypothesisTest test;
  double risk = 0.0;
};

/// Test minimizing max_k FP_k + FN. Throws NotSeparable when R* >= 1 - 1e-9.
inline MinimaxTest minimax_sum_test(const std::vector<OutcomeDistribution>& dists) {
  const std::size_t m = dists.back().size();
  detail::check_family(dists, m);
  // Variables psi (m) in [0,1] and r (free): min r.
  convex::LinearProgram lp(m + 1);
  std::vector<double> obj(m + 1, 0.0);
  obj[m] = 1.0;
  lp.set_objective(std::move(obj));
  for (std::size_t j = 0; j < m; ++j) lp.set_bounds(j, 0.0, 1.0);
  lp.set_bounds(m, -convex::kInfinity, convex::kInfinity);
  for (std::size_t k = 0; k + 1 < dists.size(); ++k) {
    std::vector<double> row(m + 1, 0.0);
    for (std::size_t j = 0; j < m; ++j) row[j] = dists[k][j] - dists.back()[j];
    row[m] = -1.0;
    lp.add_row(std::move(row), convex::RowSense::LessEqual, -1.0);
  }
  const auto out = convex::solve_lp(lp);
  if (out.status != convex::Status::Optimal) {
    throw Error(ErrorCode::NumericalBreakdown, "minimax test LP did not solve");
  }
  auto psi = HypothesisTest::from_solution(
      std::vector<double>(out.primal.begin(), out.primal.begin() + static_cast<long>(m)));
  const double risk = risk_report(dists, psi).sum_risk;
  if (risk >= 1.0 - detail::kSeparationFloor) {
    throw Error(ErrorCode::NotSeparable, "no test separates the target from the alternatives");
  }
  return {std::move(psi), risk};
}

inline HypothesisTest contract_to_test(const Contract& t) {
  const double top = t.budget();
  if (!(top > 0.0)) throw Error(ErrorCode::ZeroContract, "contract pays nothing");
  std::vector<double> psi(t.size());
  for (std::size_t j = 0; j < t.size(); ++j) psi[j] = t[j] / top;
  return HypothesisTest::from_solution(std::move(psi));
}

/// Test minimizing max_k FP_k / TP, read off the min-pay contract for costs
/// (0,...,0,1) as t / max t.
inline MinimaxTest minimax_ratio_test(const std::vector<OutcomeDistribution>& dists) {
  detail::check_family(dists, dists.back().size());
  Contract t;
  try {
    t = min_pay_contract(robust_surrogate(dists, 1.0));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NotImplementable) throw;
    throw Error(ErrorCode::NotSeparable, "no test separates the target from the alternatives",
                e.certificate());
  }
  auto psi = contract_to_test(t);
  const double rho = risk_report(dists, psi).ratio_risk;
  return {std::move(psi), rho};
}

enum class RiskKind { Sum, Ratio };

/// Scales a test into the b-cost-robust contract it induces.
inline Contract test_to_contract(const std::vector<OutcomeDistribution>& dists,
                                 const HypothesisTest& psi, RiskKind kind, double b) {
  if (!(b > 0.0)) throw Error(ErrorCode::InvalidArgument, "b must be > 0");
  const auto r = risk_report(dists, psi);
  const double denom = kind == RiskKind::Sum ? 1.0 - r.sum_risk : r.tp_rate - r.fp();
  if (denom <= 1e-12) {
    throw Error(ErrorCode::DegenerateScale, "test does not separate; scale is undefined");
  }
  std::vector<double> t(psi.size());
  for (std::size_t j = 0; j < t.size(); ++j) t[j] = b / denom * psi[j];
  return Contract(std::move(t));
}

struct LeastFavorableMix {
  std::vector<double> weights;
  std::vector<double> slacks;
  double implied_budget = 0.0;
};

/// Mixture of alternatives closest to the target in total variation. Weight
/// on identical alternatives is pooled onto the lowest index.
inline LeastFavorableMix least_favorable_mix(const std::vector<OutcomeDistribution>& dists,
                                             double b) {
  if (!(b > 0.0)) throw Error(ErrorCode::InvalidArgument, "b must be > 0");
  detail::check_family(dists, dists.back().size());
  auto mix = detail::closest_mixture(dists);
  if (mix.distance <= detail::kSeparationFloor) {
    throw Error(ErrorCode::NotSeparable, "a mixture of alternatives equals the target",
                mix.weights);
  }
  const std::size_t alts = dists.size() - 1;
  for (std::size_t i = 0; i < alts; ++i) {
    for (std::size_t k = i + 1; k < alts; ++k) {
      if (mix.weights[k] > 0.0 && rows_identical(dists[i], dists[k])) {
        mix.weights[i] += mix.weights[k];
        mix.weights[k] = 0.0;
      }
    }
  }
  const std::size_t m = dists.back().size();
  std::vector<double> blend(m, 0.0);
  for (std::size_t i = 0; i < alts; ++i) {
    for (std::size_t j = 0; j < m; ++j) blend[j] += mix.weights[i] * dists[i][j];
  }
  LeastFavorableMix out;
  out.implied_budget = b / tv_distance(dists.back(), OutcomeDistribution::from(blend));
  out.weights = std::move(mix.weights);
  out.slacks = std::move(mix.slacks);
  return out;
}

/// Monotone likelihood ratio: F_{i,j} / F_{i',j} nondecreasing in j for all
/// i > i'. A 0/0 ratio continues the previous one; x/0 = +inf may only form a
/// terminal run.
inline bool check_mlr(const std::vector<OutcomeDistribution>& dists) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (std::size_t hi = 1; hi < dists.size(); ++hi) {
    for (std::size_t lo = 0; lo < hi; ++lo) {
      double prev = -inf;
      for (std::size_t j = 0; j < dists[hi].size(); ++j) {
        const double num = dists[hi][j];
        const double den = dists[lo][j];
        if (num == 0.0 && den == 0.0) continue;
        const double r = den == 0.0 ? inf : num / den;
        if (prev == inf && r != inf) return false;
        if (r != inf && r < prev - 1e-12 * std::max(1.0, prev)) return false;
        prev = r;
      }
    }
  }
  return true;
}

}  // namespace p4p
