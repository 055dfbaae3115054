#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "p4p/core.hpp"

namespace p4p::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kNotImplementable = 2,
  kInvalidInput = 3,
  kVerificationFailed = 4,
  kNumerical = 5,
  kIo = 6,
};

int exit_code_for(ErrorCode code);

enum class Format { Text, Csv, Json };

struct Options {
  std::filesystem::path instance;
  std::filesystem::path contract;  // verify
  std::optional<Objective> objective;
  std::optional<Constraint> constraint;
  std::optional<double> bound;
  bool from_costs = false;
  std::optional<double> ic_margin;
  bool uniform_verbosity = false;
  std::uint64_t seed = 0;
  std::size_t samples = 100;
  Format format = Format::Text;
};

struct ReportRow {
  Objective objective = Objective::MinPay;
  Constraint constraint = Constraint::Unconstrained;
  bool robust = false;
  bool feasible = false;
  double expected_pay = 0.0;
  double budget = 0.0;
  double stdev = 0.0;
  /// 100 * (robust / aware - 1) on the row's own objective; 0 for aware rows.
  double price_of_robustness_percent = 0.0;
};

/// Full objective x constraint x {aware, robust} grid in fixed order.
std::vector<ReportRow> report_rows(const ContractSetting& setting, double bound,
                                   double ic_margin = 0.0);

int cmd_solve(const Options& opts, std::ostream& out);
int cmd_robust(const Options& opts, std::ostream& out);
int cmd_dual(const Options& opts, std::ostream& out);
int cmd_verify(const Options& opts, std::ostream& out);
int cmd_report(const Options& opts, std::ostream& out);
/// `instance` names a directory; every *.json in it is solved in name order.
int cmd_sweep(const Options& opts, std::ostream& out);

/// Parses argv-style arguments (without the program name) and dispatches.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace p4p::cli
