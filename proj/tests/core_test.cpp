#include <gtest/gtest.h>

#include <random>

#include "p4p/core.hpp"

namespace p4p {
namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected p4p::Error";
  return ErrorCode::IoError;
}

TEST(ValidateSetting, AcceptsWellFormedTwoByTwo) {
  const auto s = validate_setting({{0.8, 0.2}, {0.5, 0.5}}, {0.0, 1.0});
  EXPECT_EQ(s.actions(), 2u);
  EXPECT_EQ(s.outcomes(), 2u);
  EXPECT_EQ(s.target(), 1u);
  EXPECT_DOUBLE_EQ(s.cost_spread(), 1.0);
}

TEST(ValidateSetting, RejectsNonStochasticRow) {
  EXPECT_EQ(code_of([] { validate_setting({{0.8, 0.3}, {0.5, 0.5}}, {0.0, 1.0}); }),
            ErrorCode::NonStochasticRow);
  EXPECT_EQ(code_of([] { validate_setting({{1.2, -0.2}, {0.5, 0.5}}, {0.0, 1.0}); }),
            ErrorCode::NonStochasticRow);
}

TEST(ValidateSetting, IdenticalTargetRowIsNotImplementable) {
  try {
    validate_setting({{0.5, 0.5}, {0.5, 0.5}}, {0.0, 1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotImplementable);
    ASSERT_EQ(e.certificate().size(), 1u);
    EXPECT_EQ(e.certificate()[0], 1.0);
  }
}

TEST(ValidateSetting, CostOrdering) {
  EXPECT_EQ(code_of([] { validate_setting({{1, 0}, {0.5, 0.5}, {0, 1}}, {0.0, 2.0, 1.0}); }),
            ErrorCode::CostsNotNondecreasing);
  EXPECT_EQ(code_of([] { validate_setting({{1, 0}, {0, 1}}, {1.0, 1.0}); }),
            ErrorCode::TargetNotStrictlyCostliest);
  EXPECT_EQ(code_of([] { validate_setting({{1, 0}, {0, 1}}, {-1.0, 1.0}); }),
            ErrorCode::CostsNotNondecreasing);
}

TEST(ValidateSetting, ShapeErrors) {
  EXPECT_EQ(code_of([] { validate_setting({{1.0}}, {0.0}); }), ErrorCode::MalformedSetting);
  EXPECT_EQ(code_of([] { validate_setting({{1.0}, {1.0}}, {0.0, 1.0}); }),
            ErrorCode::MalformedSetting);
  EXPECT_EQ(code_of([] { validate_setting({{1, 0}, {0, 0, 1}}, {0.0, 1.0}); }),
            ErrorCode::ArityMismatch);
  EXPECT_EQ(code_of([] { validate_setting({{1, 0}, {0, 1}}, {0.0}); }), ErrorCode::ArityMismatch);
}

TEST(ValidateSetting, RenormalizesWithinTolerance) {
  const auto s = validate_setting({{0.3, 0.7 + 5e-7}, {0.5, 0.5}}, {0.0, 1.0});
  EXPECT_NEAR(s.prob(0, 0) + s.prob(0, 1), 1.0, 1e-15);
  EXPECT_NEAR(s.prob(0, 0), 0.3 / (1.0 + 5e-7), 1e-15);
}

TEST(ValidateSetting, IdempotentOnRandomSettings) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + trial % 4;
    const std::size_t m = 2 + trial % 7;
    std::vector<std::vector<double>> f(n, std::vector<double>(m));
    for (auto& row : f) {
      double tot = 0.0;
      for (auto& v : row) tot += (v = u(rng));
      // Leave rows slightly off so renormalization kicks in.
      for (auto& v : row) v = v / tot * (1.0 + 4e-7 * (u(rng) - 0.5));
    }
    std::vector<double> c(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) c[i] = (acc += u(rng));
    const auto once = validate_setting(f, c);
    const auto twice = validate_setting(once);
    EXPECT_EQ(once, twice);
  }
}

TEST(ContractTest, BudgetAndExpectedPay) {
  const Contract t({1.0, 2.0, 4.0});
  EXPECT_EQ(t.budget(), 4.0);
  const auto p = OutcomeDistribution::from({0.25, 0.25, 0.5});
  EXPECT_DOUBLE_EQ(t.expected_pay(p), 2.75);
  EXPECT_DOUBLE_EQ(t.variance(p), 0.25 * 1.75 * 1.75 + 0.25 * 0.75 * 0.75 + 0.5 * 1.25 * 1.25);
  EXPECT_THROW(Contract({1.0, -0.5}), Error);
  EXPECT_THROW(t.expected_pay(OutcomeDistribution::from({0.5, 0.5})), Error);
}

TEST(ContractTest, ExpectedPayIsLinear) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  const auto p = OutcomeDistribution::from({0.1, 0.2, 0.3, 0.4});
  for (int k = 0; k < 50; ++k) {
    std::vector<double> a(4), b(4), sum(4);
    const double alpha = u(rng);
    for (int j = 0; j < 4; ++j) {
      a[j] = u(rng);
      b[j] = u(rng);
      sum[j] = alpha * a[j] + b[j];
    }
    EXPECT_NEAR(Contract(sum).expected_pay(p),
                alpha * Contract(a).expected_pay(p) + Contract(b).expected_pay(p), 1e-12);
    EXPECT_EQ(Contract(a).budget(), *std::max_element(a.begin(), a.end()));
  }
}

TEST(ContractTest, FromSolutionClampsRoundOff) {
  const auto t = Contract::from_solution({-1e-13, 3.0});
  EXPECT_EQ(t[0], 0.0);
  EXPECT_THROW(Contract::from_solution({-1e-3, 3.0}), Error);
}

TEST(HypothesisTestTest, RangeChecked) {
  EXPECT_NO_THROW(HypothesisTest({0.0, 0.5, 1.0}));
  EXPECT_THROW(HypothesisTest({1.5}), Error);
  EXPECT_EQ(HypothesisTest::from_solution({1.0 + 1e-12, -1e-12})[0], 1.0);
}

TEST(SolveRequestTest, RobustBoundMustBePositive) {
  EXPECT_THROW(SolveRequest::make(Objective::MinPay, Constraint::Unconstrained, CostRobust{0.0}),
               Error);
  const auto r =
      SolveRequest::make(Objective::MinBudget, Constraint::Monotone, CostRobust{2.0});
  EXPECT_TRUE(r.robust());
}

}  // namespace
}  // namespace p4p
