#pragma once

// Domain types shared by every solver: outcome distributions, contract
// settings (F, c), contracts, hypothesis tests and risk reports.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace p4p {

enum class ErrorCode {
  MalformedSetting,
  NonStochasticRow,
  CostsNotNondecreasing,
  TargetNotStrictlyCostliest,
  NotImplementable,
  ArityMismatch,
  InvalidArgument,
  NumericalBreakdown,
  NotPSD,
  NotSeparable,
  DegenerateScale,
  ZeroContract,
  BoundsViolated,
  WindowExhausted,
  TooManyOutcomes,
  EmptyHistogram,
  SchemaError,
  IoError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedSetting: return "MalformedSetting";
    case ErrorCode::NonStochasticRow: return "NonStochasticRow";
    case ErrorCode::CostsNotNondecreasing: return "CostsNotNondecreasing";
    case ErrorCode::TargetNotStrictlyCostliest: return "TargetNotStrictlyCostliest";
    case ErrorCode::NotImplementable: return "NotImplementable";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NumericalBreakdown: return "NumericalBreakdown";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::NotSeparable: return "NotSeparable";
    case ErrorCode::DegenerateScale: return "DegenerateScale";
    case ErrorCode::ZeroContract: return "ZeroContract";
    case ErrorCode::BoundsViolated: return "BoundsViolated";
    case ErrorCode::WindowExhausted: return "WindowExhausted";
    case ErrorCode::TooManyOutcomes: return "TooManyOutcomes";
    case ErrorCode::EmptyHistogram: return "EmptyHistogram";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Library-wide exception. Carries a machine-readable code and, where one
/// exists, a numeric certificate (e.g. the mixture weights proving that the
/// target action cannot be implemented).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, std::vector<double> certificate = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        certificate_(std::move(certificate)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::vector<double>& certificate() const noexcept { return certificate_; }

 private:
  ErrorCode code_;
  std::vector<double> certificate_;
};

// Tolerances fixed at the domain level.
inline constexpr double kRowSumTolerance = 1e-6;
inline constexpr double kStochasticTolerance = 1e-9;
inline constexpr double kIdenticalRowTolerance = 1e-12;
inline constexpr double kIcSlack = 1e-9;

class OutcomeDistribution {
 public:
  /// Validates and, if the entries sum to within 1e-6 of one, renormalizes.
  static OutcomeDistribution from(std::vector<double> probs) {
    if (probs.empty()) {
      throw Error(ErrorCode::MalformedSetting, "distribution has no outcomes");
    }
    double total = 0.0;
    for (double p : probs) {
      if (!std::isfinite(p) || p < 0.0) {
        throw Error(ErrorCode::NonStochasticRow, "negative or non-finite probability");
      }
      total += p;
    }
    if (std::abs(total - 1.0) > kRowSumTolerance) {
      throw Error(ErrorCode::NonStochasticRow,
                  "row sums to " + std::to_string(total) + " (tolerance 1e-6)");
    }
    // Rows already stochastic to 1e-9 are kept bit-for-bit, so validation
    // is idempotent.
    if (std::abs(total - 1.0) > kStochasticTolerance) {
      for (double& p : probs) p /= total;
    }
    return OutcomeDistribution(std::move(probs));
  }

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t j) const { return probs_[j]; }
  std::span<const double> probs() const noexcept { return probs_; }
  const std::vector<double>& vector() const noexcept { return probs_; }

  friend bool operator==(const OutcomeDistribution&, const OutcomeDistribution&) = default;

 private:
  explicit OutcomeDistribution(std::vector<double> probs) : probs_(std::move(probs)) {}
  std::vector<double> probs_;
};

/// The pair (F, c). Actions are indexed 0..n-1 and the target is always the
/// last action, which must be strictly the costliest.
class ContractSetting {
 public:
  std::size_t actions() const noexcept { return rows_.size(); }
  std::size_t outcomes() const noexcept { return rows_.front().size(); }
  std::size_t target() const noexcept { return rows_.size() - 1; }

  const OutcomeDistribution& distribution(std::size_t i) const { return rows_[i]; }
  const std::vector<OutcomeDistribution>& distributions() const noexcept { return rows_; }
  const OutcomeDistribution& target_distribution() const { return rows_.back(); }
  double prob(std::size_t i, std::size_t j) const { return rows_[i][j]; }

  double cost(std::size_t i) const { return costs_[i]; }
  const std::vector<double>& costs() const noexcept { return costs_; }
  /// c_n - c_1, the spread used as the robustness bound for known costs.
  double cost_spread() const { return costs_.back() - costs_.front(); }

  std::vector<std::vector<double>> matrix() const {
    std::vector<std::vector<double>> out;
    out.reserve(rows_.size());
    for (const auto& r : rows_) out.push_back(r.vector());
    return out;
  }

  friend bool operator==(const ContractSetting&, const ContractSetting&) = default;

 private:
  friend ContractSetting validate_setting(std::vector<std::vector<double>> rows,
                                          std::vector<double> costs);
  ContractSetting(std::vector<OutcomeDistribution> rows, std::vector<double> costs)
      : rows_(std::move(rows)), costs_(std::move(costs)) {}

  std::vector<OutcomeDistribution> rows_;
  std::vector<double> costs_;
};

inline bool rows_identical(const OutcomeDistribution& a, const OutcomeDistribution& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (std::abs(a[j] - b[j]) > kIdenticalRowTolerance) return false;
  }
  return true;
}

inline ContractSetting validate_setting(std::vector<std::vector<double>> rows,
                                        std::vector<double> costs) {
  if (rows.size() < 2) {
    throw Error(ErrorCode::MalformedSetting, "need at least two actions");
  }
  if (costs.size() != rows.size()) {
    throw Error(ErrorCode::ArityMismatch, "one cost per action required");
  }
  const std::size_t m = rows.front().size();
  if (m < 2) {
    throw Error(ErrorCode::MalformedSetting, "need at least two outcomes");
  }
  std::vector<OutcomeDistribution> dists;
  dists.reserve(rows.size());
  for (auto& r : rows) {
    if (r.size() != m) {
      throw Error(ErrorCode::ArityMismatch, "rows of F have different lengths");
    }
    dists.push_back(OutcomeDistribution::from(std::move(r)));
  }
  for (double c : costs) {
    if (!std::isfinite(c) || c < 0.0) {
      throw Error(ErrorCode::CostsNotNondecreasing, "costs must be finite and nonnegative");
    }
  }
  for (std::size_t i = 1; i < costs.size(); ++i) {
    if (costs[i] < costs[i - 1]) {
      throw Error(ErrorCode::CostsNotNondecreasing,
                  "cost of action " + std::to_string(i + 1) + " decreases");
    }
  }
  const std::size_t n = costs.size();
  if (!(costs[n - 1] > costs[n - 2])) {
    throw Error(ErrorCode::TargetNotStrictlyCostliest,
                "target action must have strictly the highest cost");
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (rows_identical(dists[i], dists[n - 1])) {
      std::vector<double> mix(n - 1, 0.0);
      mix[i] = 1.0;
      throw Error(ErrorCode::NotImplementable,
                  "action " + std::to_string(i + 1) +
                      " has the target's outcome distribution at lower cost",
                  std::move(mix));
    }
  }
  return ContractSetting(std::move(dists), std::move(costs));
}

/// Re-validation of an already valid setting is the identity.
inline ContractSetting validate_setting(const ContractSetting& setting) {
  return validate_setting(setting.matrix(), setting.costs());
}

/// Nonnegative payment per outcome (limited liability).
class Contract {
 public:
  Contract() = default;
  explicit Contract(std::vector<double> payments) : payments_(std::move(payments)) {
    for (double t : payments_) {
      if (!std::isfinite(t) || t < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "contract payments must be finite and >= 0");
      }
    }
  }

  /// Clamps solver round-off (|t| <= tol) to zero before validating.
  static Contract from_solution(std::vector<double> payments, double tol = 1e-9) {
    for (double& t : payments) {
      if (t < 0.0 && t >= -tol) t = 0.0;
    }
    return Contract(std::move(payments));
  }

  std::size_t size() const noexcept { return payments_.size(); }
  double operator[](std::size_t j) const { return payments_[j]; }
  std::span<const double> payments() const noexcept { return payments_; }
  const std::vector<double>& vector() const noexcept { return payments_; }

  double budget() const {
    return payments_.empty() ? 0.0 : *std::max_element(payments_.begin(), payments_.end());
  }

  double expected_pay(const OutcomeDistribution& dist) const {
    check_arity(dist.size());
    double s = 0.0;
    for (std::size_t j = 0; j < payments_.size(); ++j) s += dist[j] * payments_[j];
    return s;
  }

  double variance(const OutcomeDistribution& dist) const {
    const double mean = expected_pay(dist);
    double s = 0.0;
    for (std::size_t j = 0; j < payments_.size(); ++j) {
      const double d = payments_[j] - mean;
      s += dist[j] * d * d;
    }
    return s;
  }

  double stdev(const OutcomeDistribution& dist) const { return std::sqrt(variance(dist)); }

  friend bool operator==(const Contract&, const Contract&) = default;

 private:
  void check_arity(std::size_t m) const {
    if (m != payments_.size()) {
      throw Error(ErrorCode::ArityMismatch, "contract and distribution lengths differ");
    }
  }
  std::vector<double> payments_;
};

/// A (possibly randomized) test: psi_j is the probability of deciding for the
/// target distribution on outcome j.
class HypothesisTest {
 public:
  explicit HypothesisTest(std::vector<double> accept_probs)
      : accept_(std::move(accept_probs)) {
    for (double p : accept_) {
      if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
        throw Error(ErrorCode::InvalidArgument, "test entries must lie in [0,1]");
      }
    }
  }

  /// Clamps solver round-off into [0,1].
  static HypothesisTest from_solution(std::vector<double> values, double tol = 1e-9) {
    for (double& v : values) {
      if (v < 0.0 && v >= -tol) v = 0.0;
      if (v > 1.0 && v <= 1.0 + tol) v = 1.0;
    }
    return HypothesisTest(std::move(values));
  }

  std::size_t size() const noexcept { return accept_.size(); }
  double operator[](std::size_t j) const { return accept_[j]; }
  std::span<const double> accept_probs() const noexcept { return accept_; }
  const std::vector<double>& vector() const noexcept { return accept_; }

 private:
  std::vector<double> accept_;
};

struct RiskReport {
  std::vector<double> fp_per_alternative;
  double fn_rate = 0.0;
  double tp_rate = 0.0;
  double sum_risk = 0.0;
  /// +infinity when the test never accepts under the target (TP = 0).
  double ratio_risk = 0.0;
  bool ratio_undefined = false;

  double fp() const {
    return fp_per_alternative.empty()
               ? 0.0
               : *std::max_element(fp_per_alternative.begin(), fp_per_alternative.end());
  }
};

enum class Objective { MinPay, MinBudget, MinVariance };
enum class Constraint { Unconstrained, Monotone, Threshold };

struct CostAware {};
struct CostRobust {
  double bound = 0.0;
};

struct SolveRequest {
  Objective objective = Objective::MinPay;
  Constraint constraint = Constraint::Unconstrained;
  std::variant<CostAware, CostRobust> robustness = CostAware{};
  /// Added to the right-hand side of every IC row; zero keeps them weak.
  double ic_margin = 0.0;

  static SolveRequest make(Objective objective, Constraint constraint,
                           std::variant<CostAware, CostRobust> robustness,
                           double ic_margin = 0.0) {
    if (const auto* r = std::get_if<CostRobust>(&robustness)) {
      if (!(r->bound > 0.0) || !std::isfinite(r->bound)) {
        throw Error(ErrorCode::InvalidArgument, "robustness bound b must be > 0");
      }
    }
    if (!(ic_margin >= 0.0) || !std::isfinite(ic_margin)) {
      throw Error(ErrorCode::InvalidArgument, "IC margin must be >= 0");
    }
    return SolveRequest{objective, constraint, std::move(robustness), ic_margin};
  }

  bool robust() const { return std::holds_alternative<CostRobust>(robustness); }
};

inline const char* to_string(Objective o) {
  switch (o) {
    case Objective::MinPay: return "min-pay";
    case Objective::MinBudget: return "min-budget";
    case Objective::MinVariance: return "min-variance";
  }
  return "?";
}

inline const char* to_string(Constraint c) {
  switch (c) {
    case Constraint::Unconstrained: return "none";
    case Constraint::Monotone: return "monotone";
    case Constraint::Threshold: return "threshold";
  }
  return "?";
}

}  // namespace p4p
