#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "json.hpp"
#include "p4p/ingest.hpp"

namespace p4p::cli {
namespace {

const std::string kFixtures = P4P_FIXTURES;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string fixture(const std::string& name) { return kFixtures + "/" + name; }

std::string temp_file(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / ("p4p_cli_test_" + name);
  std::ofstream(path) << content;
  return path.string();
}

Contract parse_csv(const std::string& text) {
  std::istringstream in(text);
  return ingest::read_contract_csv(in);
}

TEST(Solve, TwoByTwoMinPay) {
  const auto r = invoke({"solve", fixture("two_by_two.json"), "--objective", "pay"});
  EXPECT_EQ(r.code, kOk) << r.err;
  EXPECT_NE(r.out.find("t = (0.0000, 3.3333)"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("best response: large (target)"), std::string::npos);
}

TEST(Solve, IdenticalRowsExitTwo) {
  const auto r = invoke({"solve", fixture("identical_rows.json")});
  EXPECT_EQ(r.code, kNotImplementable);
  EXPECT_NE(r.err.find("target not implementable"), std::string::npos) << r.err;
  EXPECT_EQ(invoke({"solve", fixture("mixture_target.json")}).code, kNotImplementable);
}

TEST(Solve, MonotoneOnBinaryMatchesUnconstrained) {
  const auto plain = invoke({"solve", fixture("codegen_binary.json"), "--format", "csv"});
  const auto mono = invoke(
      {"solve", fixture("codegen_binary.json"), "--constraint", "monotone", "--format", "csv"});
  ASSERT_EQ(plain.code, kOk) << plain.err;
  const auto a = parse_csv(plain.out);
  const auto b = parse_csv(mono.out);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0], 0.0);
  for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(a[j], b[j], 1e-8 * a.budget());
}

TEST(Robust, TightnessAndFormulas) {
  auto r = invoke({"robust", fixture("tightness.json"), "--format", "csv"});
  ASSERT_EQ(r.code, kOk) << r.err;
  const auto t = parse_csv(r.out);
  EXPECT_NEAR(t[0], 0.0, 1e-12);
  EXPECT_NEAR(t[1], 5.0, 1e-9);

  r = invoke({"robust", fixture("two_by_two.json"), "--objective", "budget", "--format", "json"});
  ASSERT_EQ(r.code, kOk) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j["budget"].get<double>(), 10.0 / 3.0, 1e-9);
  EXPECT_NEAR(j["budget_formula"].get<double>(), 10.0 / 3.0, 1e-9);
  EXPECT_NEAR(j["pay_formula"].get<double>(), 5.0 / 3.0, 1e-9);
  EXPECT_NEAR(j["sum_risk"].get<double>(), 0.7, 1e-9);
}

TEST(Robust, FromCostsAndBound) {
  auto r = invoke({"robust", fixture("tightness.json"), "--from-costs", "--format", "json"});
  EXPECT_NEAR(nlohmann::json::parse(r.out)["bound"].get<double>(), 2.0, 1e-15);
  r = invoke({"robust", fixture("tightness.json"), "--bound", "4", "--format", "json"});
  EXPECT_NEAR(nlohmann::json::parse(r.out)["budget"].get<double>(), 10.0, 1e-9);
  EXPECT_EQ(invoke({"robust", fixture("tightness.json"), "--bound", "-1"}).code, kInvalidInput);
  EXPECT_EQ(invoke({"robust", fixture("tightness.json"), "--bound", "1", "--from-costs"}).code,
            kUsage);
}

TEST(Dual, TightnessMixture) {
  const auto r = invoke({"dual", fixture("tightness.json"), "--format", "json"});
  ASSERT_EQ(r.code, kOk) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j["implied_budget"].get<double>(), 5.0, 1e-9);
  EXPECT_NEAR(j["tv_distance"].get<double>(), 0.4, 1e-9);
  EXPECT_NEAR(j["weights"][1].get<double>(), 1.0, 1e-9);
}

TEST(Verify, RobustPassesAwareFailsZeroFails) {
  const auto robust = invoke({"robust", fixture("tightness.json"), "--format", "csv"});
  const auto aware = invoke({"solve", fixture("tightness.json"), "--format", "csv"});
  const auto robust_csv = temp_file("robust.csv", robust.out);
  const auto aware_csv = temp_file("aware.csv", aware.out);
  const auto zero_csv = temp_file("zero.csv", "outcome,payment\n1,0\n2,0\n");

  auto r = invoke({"verify", fixture("tightness.json"), robust_csv, "--samples", "100"});
  EXPECT_EQ(r.code, kOk) << r.out << r.err;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);

  r = invoke({"verify", fixture("tightness.json"), aware_csv, "--format", "json"});
  EXPECT_EQ(r.code, kVerificationFailed);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["violating_costs"][0], (std::vector<double>{0.0, 0.0, 2.0}));
  EXPECT_TRUE(j["ic_on_instance_costs"].get<bool>());

  EXPECT_EQ(invoke({"verify", fixture("tightness.json"), zero_csv}).code, kVerificationFailed);

  const auto wrong = temp_file("wrong.csv", "outcome,payment\n1,0\n2,0\n3,1\n");
  EXPECT_EQ(invoke({"verify", fixture("tightness.json"), wrong}).code, kInvalidInput);
}

TEST(Report, BinaryRowsAgreeAcrossObjectives) {
  const auto r = invoke({"report", fixture("two_by_two.json"), "--format", "json"});
  ASSERT_EQ(r.code, kOk) << r.err;
  const auto rows = nlohmann::json::parse(r.out)["rows"];
  ASSERT_EQ(rows.size(), 18u);
  for (const auto& row : rows) {
    ASSERT_TRUE(row["feasible"].get<bool>());
    EXPECT_NEAR(row["expected_pay"].get<double>(), 5.0 / 3.0, 1e-8);
    EXPECT_NEAR(row["budget"].get<double>(), 10.0 / 3.0, 1e-8);
    EXPECT_NEAR(row["stdev"].get<double>(), 5.0 / 3.0, 1e-8);
  }
}

TEST(Report, PriceOfRobustnessUsesOwnObjective) {
  const auto s = ingest::load_instance(fixture("mtbench_style.json"), {true});
  const auto rows = report_rows(s.contract_setting(), s.contract_setting().cost_spread());
  ASSERT_EQ(rows.size(), 18u);
  for (std::size_t k = 0; k < rows.size(); k += 2) {
    const auto& a = rows[k];
    const auto& b = rows[k + 1];
    EXPECT_FALSE(a.robust);
    EXPECT_TRUE(b.robust);
    ASSERT_TRUE(a.feasible && b.feasible);
    const double own_a = a.objective == Objective::MinPay      ? a.expected_pay
                         : a.objective == Objective::MinBudget ? a.budget
                                                               : a.stdev;
    const double own_b = b.objective == Objective::MinPay      ? b.expected_pay
                         : b.objective == Objective::MinBudget ? b.budget
                                                               : b.stdev;
    EXPECT_NEAR(b.price_of_robustness_percent, 100.0 * (own_b / own_a - 1.0), 1e-9);
    EXPECT_EQ(a.price_of_robustness_percent, 0.0);
  }
}

TEST(Report, TightnessRobustBudgetDoubles) {
  const auto r = invoke({"report", fixture("tightness.json"), "--format", "csv"});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_NE(r.out.find("min-budget,none,cost-robust,5,5,0,100\n"), std::string::npos) << r.out;
}

TEST(Output, ByteIdenticalAcrossRuns) {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {"report", fixture("mtbench_style.json"), "--uniform-verbosity"},
           {"solve", fixture("mtbench_style.json"), "--objective", "variance"},
           {"robust", fixture("mtbench_style.json"), "--format", "json"}}) {
    const auto a = invoke(args);
    const auto b = invoke(args);
    EXPECT_EQ(a.code, kOk) << a.err;
    EXPECT_EQ(a.out, b.out);
  }
}

TEST(ExitCodes, InputAndIoErrors) {
  EXPECT_EQ(invoke({"solve", fixture("does_not_exist.json")}).code, kIo);
  const auto bad = temp_file("bad.json", R"({"outcomes": 2})");
  const auto r = invoke({"solve", bad});
  EXPECT_EQ(r.code, kInvalidInput);
  EXPECT_NE(r.err.find("/models"), std::string::npos) << r.err;
  EXPECT_EQ(invoke({"solve"}).code, kUsage);
  EXPECT_EQ(invoke({"frobnicate"}).code, kUsage);
  EXPECT_EQ(invoke({"solve", fixture("two_by_two.json"), "--objective", "cheap"}).code, kUsage);
  EXPECT_EQ(invoke({"--help"}).code, kOk);
}

TEST(Sweep, ListsEveryFixtureInOrder) {
  const auto r = invoke({"sweep", kFixtures, "--format", "csv"});
  EXPECT_EQ(r.code, kNotImplementable);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "instance,status,expected_pay,budget,stdev");
  std::vector<std::string> names;
  while (std::getline(in, line)) names.push_back(line.substr(0, line.find(',')));
  EXPECT_TRUE(std::is_sorted(names.begin(), names.end()));
  EXPECT_NE(r.out.find("identical_rows.json,NotImplementable"), std::string::npos);
  EXPECT_NE(r.out.find("two_by_two.json,ok,"), std::string::npos);
}

}  // namespace
}  // namespace p4p::cli
