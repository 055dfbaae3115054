#include <gtest/gtest.h>

#include <cstdio>
#include <random>
#include <sstream>

#include "p4p/contracts.hpp"
#include "p4p/ingest.hpp"

namespace p4p {
namespace {

const std::filesystem::path kFixtures = P4P_FIXTURES;

ErrorCode code_of(auto&& fn, std::string* message = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  ADD_FAILURE() << "expected p4p::Error";
  return ErrorCode::IoError;
}

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

TEST(Costs, InvertedEnergiesReproduceTable) {
  const ingest::CostConfig cfg;
  EXPECT_EQ(round3(ingest::per_mtoken_cost(576923.0, cfg)), 0.182);
  EXPECT_EQ(round3(ingest::per_mtoken_cost(437500.0, cfg)), 0.24);
  EXPECT_EQ(round3(ingest::per_mtoken_cost(164062.5, cfg)), 0.64);
}

TEST(Costs, LinearInRate) {
  ingest::CostConfig cfg;
  const double base = ingest::per_mtoken_cost(437500.0, cfg);
  cfg.energy_rate *= 2.0;
  EXPECT_DOUBLE_EQ(ingest::per_mtoken_cost(437500.0, cfg), 2.0 * base);
  cfg.energy_rate = 0.0;
  EXPECT_EQ(code_of([&] { ingest::per_mtoken_cost(437500.0, cfg); }), ErrorCode::InvalidArgument);
}

TEST(Costs, PerResponse) {
  const ingest::CostConfig cfg;
  ingest::ModelRecord r;
  r.tokens_per_kwh = 164062.5;
  r.verbosity = 1695;
  EXPECT_NEAR(ingest::per_response_cost(r, cfg), 0.0010848, 1e-15);
  r.tokens_per_kwh = ingest::tokens_per_kwh_for(0.182, cfg);
  r.verbosity = 1625;
  EXPECT_NEAR(ingest::per_response_cost(r, cfg), 0.00029575, 1e-15);
  r.verbosity = 0;
  EXPECT_EQ(ingest::per_response_cost(r, cfg), 0.0);
}

TEST(Costs, InversionRoundTrip) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.01, 50.0);
  ingest::CostConfig cfg;
  for (int k = 0; k < 200; ++k) {
    cfg.energy_rate = u(rng) / 100.0;
    const double cost = u(rng);
    EXPECT_NEAR(ingest::per_mtoken_cost(ingest::tokens_per_kwh_for(cost, cfg), cfg), cost, 1e-9);
  }
}

TEST(Histogram, Normalizes) {
  EXPECT_EQ(ingest::histogram_to_distribution({10, 30}).vector(), (std::vector<double>{0.25, 0.75}));
  EXPECT_EQ(ingest::histogram_to_distribution({0, 0, 5}).vector(),
            (std::vector<double>{0.0, 0.0, 1.0}));
  EXPECT_EQ(code_of([] { ingest::histogram_to_distribution({0, 0}); }), ErrorCode::EmptyHistogram);
}

TEST(LoadInstance, MtBenchStyleFixture) {
  const auto inst = ingest::load_instance(kFixtures / "mtbench_style.json");
  const auto& s = inst.contract_setting();
  EXPECT_EQ(s.actions(), 3u);
  EXPECT_EQ(s.outcomes(), 10u);
  for (std::size_t i = 0; i < 3; ++i) {
    double sum = 0.0;
    for (double p : s.distribution(i).probs()) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
  EXPECT_EQ(inst.models[0].name, "Llama-2-7B-chat");
  EXPECT_EQ(inst.models[2].name, "Llama-2-70B-chat");
  EXPECT_NEAR(s.cost(2), 0.0010848, 1e-12);
  EXPECT_EQ(inst.defaults.objective, Objective::MinBudget);
  EXPECT_EQ(inst.defaults.constraint, Constraint::Monotone);

  const auto uniform = ingest::load_instance(kFixtures / "mtbench_style.json", {true});
  EXPECT_NEAR(uniform.contract_setting().cost(1), 0.24, 1e-12);
  EXPECT_NEAR(uniform.contract_setting().cost(2), 0.64, 1e-12);
}

TEST(LoadInstance, MonotoneRobustBudgetHasThreeLevels) {
  const auto inst = ingest::load_instance(kFixtures / "mtbench_style.json", {true});
  const auto& s = inst.contract_setting();
  const auto t = cost_robust_contract(s.distributions(), s.cost_spread(), Objective::MinBudget,
                                      Constraint::Monotone);
  std::vector<double> levels;
  for (double v : t.payments()) {
    if (levels.empty() || std::abs(v - levels.back()) > 1e-9) levels.push_back(v);
  }
  ASSERT_EQ(levels.size(), 3u);
  EXPECT_EQ(levels[0], 0.0);
  EXPECT_GT(levels[1], 0.0);
  EXPECT_GT(levels[2], levels[1]);
}

TEST(LoadInstance, BinaryPassRates) {
  const auto inst = ingest::load_instance(kFixtures / "codegen_binary.json");
  const auto& s = inst.contract_setting();
  ASSERT_EQ(s.actions(), 3u);
  const std::vector<std::vector<double>> want = {{0.8, 0.2}, {0.65, 0.35}, {0.5, 0.5}};
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(s.prob(i, j), want[i][j], 1e-15);
  }
  EXPECT_EQ(inst.models[2].tokens_per_kwh, 164062.5);
  // payment_unit 1e-6 expresses costs in micro-dollars.
  EXPECT_NEAR(s.cost(2), 1084.8, 1e-9);
}

TEST(LoadInstance, SchemaErrorsCarryPaths) {
  std::string msg;
  EXPECT_EQ(code_of([&] { ingest::parse_instance(nlohmann::json::parse(R"({"outcomes": 2})")); },
                    &msg),
            ErrorCode::SchemaError);
  EXPECT_EQ(msg.rfind("SchemaError: /models", 0), 0u) << msg;

  const auto bad_hist = nlohmann::json::parse(R"({"outcomes": 3, "models": [
      {"name": "a", "score_histogram": [1, 2, 3], "cost": 0},
      {"name": "b", "score_histogram": [1, 2], "cost": 1}]})");
  EXPECT_EQ(code_of([&] { ingest::parse_instance(bad_hist); }, &msg), ErrorCode::SchemaError);
  EXPECT_EQ(msg.rfind("SchemaError: /models/1/score_histogram", 0), 0u) << msg;

  const auto bad_target = nlohmann::json::parse(R"({"models": [
      {"name": "a", "pass_rate": 0.2, "cost": 0},
      {"name": "b", "pass_rate": 0.5, "cost": 1}], "target": "a"})");
  EXPECT_EQ(code_of([&] { ingest::parse_instance(bad_target); }, &msg), ErrorCode::SchemaError);
  EXPECT_EQ(msg.rfind("SchemaError: /target", 0), 0u) << msg;

  const auto no_cost = nlohmann::json::parse(R"({"models": [
      {"name": "a", "pass_rate": 0.2}, {"name": "b", "pass_rate": 0.5, "cost": 1}]})");
  EXPECT_EQ(code_of([&] { ingest::parse_instance(no_cost); }, &msg), ErrorCode::SchemaError);
  EXPECT_EQ(msg.rfind("SchemaError: /models/0", 0), 0u) << msg;

  EXPECT_EQ(code_of([] { ingest::load_instance(kFixtures / "missing.json"); }),
            ErrorCode::IoError);
}

TEST(LoadInstance, CoreValidationPropagates) {
  EXPECT_EQ(code_of([] { ingest::load_instance(kFixtures / "identical_rows.json"); }),
            ErrorCode::NotImplementable);
  const auto unordered = nlohmann::json::parse(R"({"models": [
      {"name": "a", "pass_rate": 0.2, "cost": 2}, {"name": "b", "pass_rate": 0.5, "cost": 1}]})");
  EXPECT_EQ(code_of([&] { ingest::parse_instance(unordered); }),
            ErrorCode::CostsNotNondecreasing);
}

TEST(LoadInstance, DeterministicAndOrderPreserving) {
  const auto a = ingest::load_instance(kFixtures / "tightness.json");
  const auto b = ingest::load_instance(kFixtures / "tightness.json");
  EXPECT_EQ(a.contract_setting(), b.contract_setting());
  EXPECT_EQ(a.models[0].name, "a1");
  EXPECT_EQ(a.models[1].name, "a2");
  EXPECT_EQ(a.models[2].name, "a3");
  EXPECT_EQ(a.defaults.bound, 2.0);
}

TEST(Csv, RoundTripAtFullPrecision) {
  const Contract t({0.0, 10.0 / 3.0, 1e-300, 123456.789});
  std::stringstream ss;
  ingest::write_contract_csv(ss, t);
  EXPECT_EQ(ss.str().substr(0, 16), "outcome,payment\n");
  EXPECT_EQ(ingest::read_contract_csv(ss), t);
}

TEST(Csv, RejectsMalformed) {
  std::stringstream bad_header("a,b\n1,2\n");
  EXPECT_EQ(code_of([&] { ingest::read_contract_csv(bad_header); }), ErrorCode::SchemaError);
  std::stringstream bad_cell("outcome,payment\n1,abc\n");
  EXPECT_EQ(code_of([&] { ingest::read_contract_csv(bad_cell); }), ErrorCode::SchemaError);
  std::stringstream negative("outcome,payment\n1,-2\n");
  EXPECT_EQ(code_of([&] { ingest::read_contract_csv(negative); }), ErrorCode::InvalidArgument);
}

}  // namespace
}  // namespace p4p
