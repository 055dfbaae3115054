#pragma once

// Optimal contracts for a target action: min-pay, min-budget and
// min-variance objectives, optionally restricted to monotone or threshold
// shapes, for known costs or for every cost vector with spread at most b.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "p4p/convex.hpp"
#include "p4p/core.hpp"
#include "p4p/mixture.hpp"

namespace p4p {

struct BestResponse {
  std::size_t action = 0;
  double utility = 0.0;
  std::vector<double> per_action_utilities;
};

namespace detail {

inline void check_contract_arity(const ContractSetting& s, const Contract& t) {
  if (t.size() != s.outcomes()) {
    throw Error(ErrorCode::ArityMismatch, "contract has " + std::to_string(t.size()) +
                                              " payments, setting has " +
                                              std::to_string(s.outcomes()) + " outcomes");
  }
}

inline std::vector<double> utilities(const ContractSetting& s, const Contract& t,
                                     std::span<const double> costs) {
  std::vector<double> u(s.actions());
  for (std::size_t i = 0; i < s.actions(); ++i) {
    u[i] = t.expected_pay(s.distribution(i)) - costs[i];
  }
  return u;
}

}  // namespace detail

/// Agent's pure best response; ties within 1e-9 go to the highest index,
/// i.e. toward the principal's preferred action.
inline BestResponse best_response(const ContractSetting& setting, const Contract& contract) {
  detail::check_contract_arity(setting, contract);
  BestResponse br;
  br.per_action_utilities = detail::utilities(setting, contract, setting.costs());
  const auto& u = br.per_action_utilities;
  const double best = *std::max_element(u.begin(), u.end());
  for (std::size_t i = u.size(); i-- > 0;) {
    if (u[i] >= best - kIcSlack) {
      br.action = i;
      break;
    }
  }
  br.utility = best;
  return br;
}

/// IC check against an arbitrary cost vector (used for robustness sweeps,
/// where the cost vector need not make the target strictly costliest).
inline bool verify_ic(const ContractSetting& setting, const Contract& contract,
                      std::span<const double> costs) {
  detail::check_contract_arity(setting, contract);
  if (costs.size() != setting.actions()) {
    throw Error(ErrorCode::ArityMismatch, "one cost per action required");
  }
  const auto u = detail::utilities(setting, contract, costs);
  const double target = u.back();
  for (std::size_t i = 0; i + 1 < u.size(); ++i) {
    if (target - u[i] < -kIcSlack) return false;
  }
  return true;
}

inline bool verify_ic(const ContractSetting& setting, const Contract& contract) {
  return verify_ic(setting, contract, setting.costs());
}

/// Variance matrix V = R'R with R = diag(sqrt(p)) (I - 1 p'), so that
/// t'Vt = Var_{j~p}(t_j).
inline Eigen::MatrixXd variance_matrix(const OutcomeDistribution& p) {
  const auto m = static_cast<Eigen::Index>(p.size());
  Eigen::VectorXd pv(m);
  for (Eigen::Index j = 0; j < m; ++j) pv[j] = p[static_cast<std::size_t>(j)];
  const Eigen::MatrixXd centering =
      Eigen::MatrixXd::Identity(m, m) - Eigen::VectorXd::Ones(m) * pv.transpose();
  const Eigen::MatrixXd r = pv.cwiseSqrt().asDiagonal() * centering;
  Eigen::MatrixXd v = r.transpose() * r;
  return 0.5 * (v + v.transpose());
}

namespace detail {

// LP skeleton over payments t (first m variables) plus `extra` trailing
// variables, with IC rows and optional monotonicity rows.
inline convex::LinearProgram contract_program(const ContractSetting& s, std::size_t extra,
                                              bool monotone, double margin) {
  const std::size_t m = s.outcomes();
  const std::size_t n = s.actions();
  convex::LinearProgram lp(m + extra);
  const auto& target = s.target_distribution();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    std::vector<double> row(m + extra, 0.0);
    for (std::size_t j = 0; j < m; ++j) row[j] = target[j] - s.prob(i, j);
    lp.add_row(std::move(row), convex::RowSense::GreaterEqual,
               s.cost(n - 1) - s.cost(i) + margin);
  }
  if (monotone) {
    for (std::size_t j = 0; j + 1 < m; ++j) {
      std::vector<double> row(m + extra, 0.0);
      row[j] = 1.0;
      row[j + 1] = -1.0;
      lp.add_row(std::move(row), convex::RowSense::LessEqual, 0.0);
    }
  }
  return lp;
}

inline Contract finish(const ContractSetting& s, std::vector<double> t, bool monotone) {
  t.resize(s.outcomes());
  for (double& v : t) {
    if (v < 0.0 && v > -1e-9) v = 0.0;
  }
  if (monotone) {
    // Remove round-off inversions so t_j <= t_{j+1} holds exactly.
    for (std::size_t j = 1; j < t.size(); ++j) t[j] = std::max(t[j], t[j - 1]);
  }
  Contract c = Contract::from_solution(std::move(t));
  if (!verify_ic(s, c)) {
    throw Error(ErrorCode::NumericalBreakdown, "solver returned a contract violating IC");
  }
  return c;
}

inline void expect_optimal(const convex::SolveOutcome& out) {
  if (out.status == convex::Status::Infeasible) {
    throw Error(ErrorCode::NotImplementable, "no contract satisfies the constraints",
                out.certificate);
  }
  if (out.status != convex::Status::Optimal) {
    throw Error(ErrorCode::NumericalBreakdown, "contract program is unbounded");
  }
}

inline Contract solve_min_pay(const ContractSetting& s, bool monotone, double margin) {
  require_implementable(s.distributions());
  auto lp = contract_program(s, 0, monotone, margin);
  lp.set_objective(s.target_distribution().vector());
  const auto out = convex::solve_lp(lp);
  expect_optimal(out);
  return finish(s, out.primal, monotone);
}

inline Contract solve_min_budget(const ContractSetting& s, bool monotone, double margin) {
  require_implementable(s.distributions());
  const std::size_t m = s.outcomes();
  auto lp = contract_program(s, 1, monotone, margin);
  std::vector<double> obj(m + 1, 0.0);
  obj[m] = 1.0;
  lp.set_objective(std::move(obj));
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<double> row(m + 1, 0.0);
    row[j] = 1.0;
    row[m] = -1.0;
    lp.add_row(std::move(row), convex::RowSense::LessEqual, 0.0);
  }
  const auto out = convex::solve_lp(lp);
  expect_optimal(out);
  return finish(s, out.primal, monotone);
}

inline Contract solve_min_variance(const ContractSetting& s, bool monotone, double margin) {
  require_implementable(s.distributions());
  const std::size_t m = s.outcomes();
  const auto& p = s.target_distribution();
  convex::QuadraticProgram qp{variance_matrix(p), contract_program(s, 0, monotone, margin)};
  const auto out = convex::solve_qp(qp);
  expect_optimal(out);

  // The minimizers share R t, i.e. they agree up to a common shift on the
  // target's support. Among them take the one with least expected pay.
  auto lp = contract_program(s, 1, monotone, margin);
  lp.set_bounds(m, -convex::kInfinity, convex::kInfinity);
  std::vector<double> obj(m + 1, 0.0);
  for (std::size_t j = 0; j < m; ++j) obj[j] = p[j];
  lp.set_objective(std::move(obj));
  for (std::size_t j = 0; j < m; ++j) {
    if (p[j] <= 0.0) continue;
    std::vector<double> row(m + 1, 0.0);
    row[j] = 1.0;
    row[m] = -1.0;
    lp.add_row(std::move(row), convex::RowSense::Equal, out.primal[j]);
  }
  const auto face = convex::solve_lp(lp);
  if (face.status == convex::Status::Optimal) {
    std::vector<double> t(face.primal.begin(), face.primal.begin() + static_cast<long>(m));
    for (double& v : t) {
      if (v < 0.0 && v > -1e-9) v = 0.0;
    }
    Contract c = Contract::from_solution(t);
    if (verify_ic(s, c) && c.variance(p) <= Contract::from_solution(out.primal).variance(p) + 1e-9) {
      return finish(s, std::move(t), monotone);
    }
  }
  return finish(s, out.primal, monotone);
}

}  // namespace detail

inline Contract min_pay_contract(const ContractSetting& setting, double ic_margin = 0.0) {
  return detail::solve_min_pay(setting, false, ic_margin);
}

inline Contract min_budget_contract(const ContractSetting& setting, double ic_margin = 0.0) {
  return detail::solve_min_budget(setting, false, ic_margin);
}

inline Contract min_variance_contract(const ContractSetting& setting, double ic_margin = 0.0) {
  return detail::solve_min_variance(setting, false, ic_margin);
}

/// Objective value of a contract under the target distribution; variance is
/// reported as a variance (not a standard deviation).
inline double objective_value(const ContractSetting& s, const Contract& t, Objective o) {
  switch (o) {
    case Objective::MinPay: return t.expected_pay(s.target_distribution());
    case Objective::MinBudget: return t.budget();
    case Objective::MinVariance: return t.variance(s.target_distribution());
  }
  return 0.0;
}

struct CutoffResult {
  std::size_t cutoff = 0;  // 0-based: pays for outcomes j >= cutoff
  bool feasible = false;
  double budget = 0.0;
  double objective = 0.0;
};

struct ThresholdSearch {
  std::vector<CutoffResult> cutoffs;
  std::optional<std::size_t> best;  // index into cutoffs
};

/// Full enumeration of threshold contracts t_j = B * [j >= cutoff]. For each
/// cutoff, B is the least value meeting every IC row; cutoff 0 (constant
/// pay) can never separate a strictly costlier target and is reported
/// infeasible.
inline ThresholdSearch threshold_search(const ContractSetting& s, Objective objective,
                                        double ic_margin = 0.0) {
  const std::size_t m = s.outcomes();
  const std::size_t n = s.actions();
  const auto& p = s.target_distribution();
  ThresholdSearch out;
  for (std::size_t k = 0; k < m; ++k) {
    CutoffResult r;
    r.cutoff = k;
    double tail_target = 0.0;
    for (std::size_t j = k; j < m; ++j) tail_target += p[j];
    bool ok = true;
    double budget = 0.0;
    for (std::size_t i = 0; i + 1 < n && ok; ++i) {
      double tail_alt = 0.0;
      for (std::size_t j = k; j < m; ++j) tail_alt += s.prob(i, j);
      const double gap = k == 0 ? 0.0 : tail_target - tail_alt;
      const double need = s.cost(n - 1) - s.cost(i) + ic_margin;
      if (gap <= 1e-15) {
        ok = need <= 0.0;
        continue;
      }
      budget = std::max(budget, need / gap);
    }
    r.feasible = ok;
    if (ok) {
      r.budget = budget;
      switch (objective) {
        case Objective::MinPay: r.objective = budget * tail_target; break;
        case Objective::MinBudget: r.objective = budget; break;
        case Objective::MinVariance:
          r.objective = budget * budget * tail_target * (1.0 - tail_target);
          break;
      }
      if (!out.best || r.objective < out.cutoffs[*out.best].objective *
                                         (1.0 - 1e-12)) {
        out.best = out.cutoffs.size();
      }
    }
    out.cutoffs.push_back(r);
  }
  return out;
}

inline Contract threshold_contract(const ContractSetting& s, Objective objective,
                                   double ic_margin = 0.0) {
  const auto search = threshold_search(s, objective, ic_margin);
  if (!search.best) {
    throw Error(ErrorCode::NotImplementable, "no threshold contract implements the target");
  }
  const auto& r = search.cutoffs[*search.best];
  std::vector<double> t(s.outcomes(), 0.0);
  for (std::size_t j = r.cutoff; j < t.size(); ++j) t[j] = r.budget;
  Contract c(std::move(t));
  if (!verify_ic(s, c)) {
    throw Error(ErrorCode::NumericalBreakdown, "threshold contract violates IC");
  }
  return c;
}

inline Contract constrained_contract(const ContractSetting& setting, Objective objective,
                                     Constraint constraint, double ic_margin = 0.0) {
  if (constraint == Constraint::Threshold) {
    return threshold_contract(setting, objective, ic_margin);
  }
  const bool monotone = constraint == Constraint::Monotone;
  switch (objective) {
    case Objective::MinPay: return detail::solve_min_pay(setting, monotone, ic_margin);
    case Objective::MinBudget: return detail::solve_min_budget(setting, monotone, ic_margin);
    case Objective::MinVariance: return detail::solve_min_variance(setting, monotone, ic_margin);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown objective");
}

/// The uniform-cost setting (F, (0,...,0,b)) whose optimal contracts are
/// exactly the optimal b-cost-robust contracts.
inline ContractSetting robust_surrogate(const std::vector<OutcomeDistribution>& dists, double b) {
  if (!(b > 0.0) || !std::isfinite(b)) {
    throw Error(ErrorCode::InvalidArgument, "robustness bound b must be > 0");
  }
  std::vector<std::vector<double>> rows;
  rows.reserve(dists.size());
  for (const auto& d : dists) rows.push_back(d.vector());
  std::vector<double> costs(dists.size(), 0.0);
  costs.back() = b;
  return validate_setting(std::move(rows), std::move(costs));
}

inline Contract cost_robust_contract(const std::vector<OutcomeDistribution>& dists, double b,
                                     Objective objective,
                                     Constraint constraint = Constraint::Unconstrained,
                                     double ic_margin = 0.0) {
  return constrained_contract(robust_surrogate(dists, b), objective, constraint, ic_margin);
}

inline Contract solve_contract(const ContractSetting& setting, const SolveRequest& request) {
  if (const auto* r = std::get_if<CostRobust>(&request.robustness)) {
    return cost_robust_contract(setting.distributions(), r->bound, request.objective,
                                request.constraint, request.ic_margin);
  }
  return constrained_contract(setting, request.objective, request.constraint,
                              request.ic_margin);
}

struct ApproximationReport {
  double robust_budget = 0.0;
  double aware_budget = 0.0;
  double ratio = 0.0;
  double bound_ratio = 0.0;  // b / a
};

/// Compares the min-budget b-cost-robust contract with the cost-aware
/// min-budget contract when every gap c_n - c_i lies in [a, b].
inline ApproximationReport approximation_certificate(const ContractSetting& setting, double a,
                                                     double b) {
  if (!(a > 0.0) || !(a <= b)) {
    throw Error(ErrorCode::InvalidArgument, "need 0 < a <= b");
  }
  const double cn = setting.costs().back();
  for (std::size_t i = 0; i + 1 < setting.actions(); ++i) {
    const double gap = cn - setting.cost(i);
    if (gap < a - 1e-12 || gap > b + 1e-12) {
      throw Error(ErrorCode::BoundsViolated,
                  "cost gap of action " + std::to_string(i + 1) + " lies outside [a, b]");
    }
  }
  ApproximationReport rep;
  rep.robust_budget =
      cost_robust_contract(setting.distributions(), b, Objective::MinBudget).budget();
  rep.aware_budget = min_budget_contract(setting).budget();
  rep.ratio = rep.robust_budget / rep.aware_budget;
  rep.bound_ratio = b / a;
  if (rep.ratio > rep.bound_ratio + 1e-7) {
    throw Error(ErrorCode::NumericalBreakdown, "robust/aware budget ratio exceeds b/a");
  }
  return rep;
}

}  // namespace p4p
