#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>

#include "CLI11.hpp"
#include "json.hpp"
#include "p4p/contracts.hpp"
#include "p4p/ingest.hpp"
#include "p4p/oracle.hpp"
#include "p4p/statistics.hpp"

namespace p4p::cli {

namespace {

using nlohmann::json;

std::string num(double v) {
  char buf[48];
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v != 0.0 && std::abs(v) < 1e-3) {
    std::snprintf(buf, sizeof buf, "%.4g", v);
  } else {
    std::snprintf(buf, sizeof buf, "%.4f", v);
  }
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

std::string rpad(const std::string& s, std::size_t width) {
  return s.size() >= width ? " " + s : std::string(width - s.size(), ' ') + s;
}

ingest::Instance load(const Options& opts) {
  return ingest::load_instance(opts.instance, {opts.uniform_verbosity});
}

Objective objective_of(const Options& o, const ingest::Instance& inst) {
  return o.objective.value_or(inst.defaults.objective.value_or(Objective::MinPay));
}

Constraint constraint_of(const Options& o, const ingest::Instance& inst) {
  return o.constraint.value_or(inst.defaults.constraint.value_or(Constraint::Unconstrained));
}

double margin_of(const Options& o, const ingest::Instance& inst) {
  const double m = o.ic_margin.value_or(inst.defaults.ic_margin.value_or(0.0));
  if (m < 0.0) throw Error(ErrorCode::InvalidArgument, "--ic-margin must be >= 0");
  return m;
}

// --bound, else --from-costs, else the instance default, else c_n - c_1.
double bound_of(const Options& o, const ingest::Instance& inst) {
  if (o.bound) {
    if (!(*o.bound > 0.0)) throw Error(ErrorCode::InvalidArgument, "--bound must be > 0");
    return *o.bound;
  }
  if (!o.from_costs && inst.defaults.bound) return *inst.defaults.bound;
  return inst.contract_setting().cost_spread();
}

void print_warnings(const ingest::Instance& inst, std::ostream& out) {
  for (const auto& w : inst.warnings) out << "warning: " << w << '\n';
}

void print_header(const ingest::Instance& inst, Objective obj, Constraint con,
                  const std::string& mode, std::ostream& out) {
  const auto& s = inst.contract_setting();
  out << pad("setting", 13) << s.actions() << " actions x " << s.outcomes()
      << " outcomes, target " << inst.models.back().name << '\n';
  out << pad("objective", 13) << to_string(obj) << '\n';
  out << pad("constraint", 13) << to_string(con) << '\n';
  out << pad("robustness", 13) << mode << '\n';
}

void print_contract(const ingest::Instance& inst, const Contract& t, std::ostream& out) {
  const auto& s = inst.contract_setting();
  const auto& p = s.target_distribution();
  out << "\nt = (";
  for (std::size_t j = 0; j < t.size(); ++j) out << (j ? ", " : "") << num(t[j]);
  out << ")\n\n";
  std::size_t w = 9;
  for (const auto& l : inst.outcome_labels) w = std::max(w, l.size() + 2);
  out << pad("outcome", w) << "payment\n";
  for (std::size_t j = 0; j < t.size(); ++j) {
    out << pad(inst.outcome_labels[j], w) << num(t[j]) << '\n';
  }
  out << '\n';
  out << pad("expected pay", 14) << num(t.expected_pay(p)) << '\n';
  out << pad("budget", 14) << num(t.budget()) << '\n';
  out << pad("stdev", 14) << num(t.stdev(p)) << '\n';

  const auto br = best_response(s, t);
  std::size_t nw = 8;
  for (const auto& m : inst.models) nw = std::max(nw, m.name.size() + 2);
  out << '\n' << pad("action", nw) << pad("cost", 12) << "utility\n";
  for (std::size_t i = 0; i < s.actions(); ++i) {
    out << pad(inst.models[i].name, nw) << pad(num(s.cost(i)), 12)
        << num(br.per_action_utilities[i]) << '\n';
  }
  out << "best response: " << inst.models[br.action].name
      << (br.action == s.target() ? " (target)" : " (not the target)") << '\n';
}

json contract_json(const ingest::Instance& inst, const Contract& t) {
  const auto& s = inst.contract_setting();
  const auto& p = s.target_distribution();
  const auto br = best_response(s, t);
  json j;
  j["payments"] = t.vector();
  j["outcomes"] = inst.outcome_labels;
  j["expected_pay"] = t.expected_pay(p);
  j["budget"] = t.budget();
  j["stdev"] = t.stdev(p);
  j["best_response"] = {{"action", br.action},
                        {"name", inst.models[br.action].name},
                        {"utilities", br.per_action_utilities}};
  return j;
}

int emit_contract(const Options& opts, const ingest::Instance& inst, const Contract& t,
                  json extra, const std::vector<std::pair<std::string, double>>& text_extra,
                  Objective obj, Constraint con, const std::string& mode, std::ostream& out) {
  switch (opts.format) {
    case Format::Csv:
      ingest::write_contract_csv(out, t, inst.outcome_labels);
      break;
    case Format::Json: {
      json j = contract_json(inst, t);
      j["objective"] = to_string(obj);
      j["constraint"] = to_string(con);
      j["robustness"] = mode;
      for (auto& [k, v] : extra.items()) j[k] = v;
      out << j.dump(2) << '\n';
      break;
    }
    case Format::Text:
      print_warnings(inst, out);
      print_header(inst, obj, con, mode, out);
      print_contract(inst, t, out);
      if (!text_extra.empty()) out << '\n';
      for (const auto& [k, v] : text_extra) out << pad(k, 22) << num(v) << '\n';
      break;
  }
  return kOk;
}

const char* mode_name(bool robust) { return robust ? "cost-robust" : "cost-aware"; }

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotImplementable:
    case ErrorCode::NotSeparable:
      return kNotImplementable;
    case ErrorCode::NumericalBreakdown:
    case ErrorCode::NotPSD:
      return kNumerical;
    case ErrorCode::IoError:
      return kIo;
    default:
      return kInvalidInput;
  }
}

int cmd_solve(const Options& opts, std::ostream& out) {
  const auto inst = load(opts);
  const auto obj = objective_of(opts, inst);
  const auto con = constraint_of(opts, inst);
  const auto t = constrained_contract(inst.contract_setting(), obj, con, margin_of(opts, inst));
  return emit_contract(opts, inst, t, json::object(), {}, obj, con, mode_name(false), out);
}

int cmd_robust(const Options& opts, std::ostream& out) {
  const auto inst = load(opts);
  const auto& s = inst.contract_setting();
  const auto obj = objective_of(opts, inst);
  const auto con = constraint_of(opts, inst);
  const double b = bound_of(opts, inst);
  const auto t = cost_robust_contract(s.distributions(), b, obj, con, margin_of(opts, inst));
  const auto sum = minimax_sum_test(s.distributions());
  const auto ratio = minimax_ratio_test(s.distributions());
  const double budget_formula = b / (1.0 - sum.risk);
  const double pay_formula = b / (1.0 - ratio.risk);
  json extra = {{"bound", b},
                {"sum_risk", sum.risk},
                {"ratio_risk", ratio.risk},
                {"budget_formula", budget_formula},
                {"pay_formula", pay_formula}};
  return emit_contract(opts, inst, t, extra,
                       {{"bound b", b},
                        {"R* (sum risk)", sum.risk},
                        {"b/(1-R*)", budget_formula},
                        {"rho* (ratio risk)", ratio.risk},
                        {"b/(1-rho*)", pay_formula}},
                       obj, con, mode_name(true), out);
}

int cmd_dual(const Options& opts, std::ostream& out) {
  const auto inst = load(opts);
  const auto& s = inst.contract_setting();
  const double b = bound_of(opts, inst);
  const auto mix = least_favorable_mix(s.distributions(), b);
  const double tv = b / mix.implied_budget;
  if (opts.format == Format::Json) {
    json names = json::array();
    for (std::size_t i = 0; i + 1 < inst.models.size(); ++i) names.push_back(inst.models[i].name);
    out << json{{"bound", b},
                {"alternatives", names},
                {"weights", mix.weights},
                {"slacks", mix.slacks},
                {"tv_distance", tv},
                {"implied_budget", mix.implied_budget}}
               .dump(2)
        << '\n';
    return kOk;
  }
  if (opts.format == Format::Csv) {
    out << "alternative,weight\n";
    for (std::size_t i = 0; i < mix.weights.size(); ++i) {
      out << inst.models[i].name << ',' << ingest::format_double(mix.weights[i]) << '\n';
    }
    return kOk;
  }
  print_warnings(inst, out);
  std::size_t nw = 13;
  for (const auto& m : inst.models) nw = std::max(nw, m.name.size() + 2);
  out << "least favorable mixture of alternatives\n\n" << pad("alternative", nw) << "weight\n";
  for (std::size_t i = 0; i < mix.weights.size(); ++i) {
    out << pad(inst.models[i].name, nw) << num(mix.weights[i]) << '\n';
  }
  out << '\n' << pad("bound b", 16) << num(b) << '\n';
  out << pad("TV distance", 16) << num(tv) << '\n';
  out << pad("implied budget", 16) << num(mix.implied_budget) << '\n';
  return kOk;
}

int cmd_verify(const Options& opts, std::ostream& out) {
  const auto inst = load(opts);
  const auto& s = inst.contract_setting();
  const auto t = ingest::read_contract_csv(opts.contract);
  if (t.size() != s.outcomes()) {
    throw Error(ErrorCode::ArityMismatch, "contract has " + std::to_string(t.size()) +
                                              " payments, instance has " +
                                              std::to_string(s.outcomes()) + " outcomes");
  }
  const double b = bound_of(opts, inst);
  const auto costs = oracle::sample_cost_vectors(b, s.actions(), opts.samples + 2, opts.seed);
  std::vector<std::size_t> bad;
  for (std::size_t k = 0; k < costs.size(); ++k) {
    if (!verify_ic(s, t, costs[k])) bad.push_back(k);
  }
  const bool own = verify_ic(s, t);
  const bool pass = bad.empty();
  if (opts.format == Format::Json) {
    json viol = json::array();
    for (auto k : bad) viol.push_back(costs[k]);
    out << json{{"bound", b},
                {"seed", opts.seed},
                {"cost_vectors", costs.size()},
                {"violations", bad.size()},
                {"violating_costs", viol},
                {"ic_on_instance_costs", own},
                {"pass", pass}}
               .dump(2)
        << '\n';
  } else if (opts.format == Format::Csv) {
    out << "cost_vectors,violations,pass\n"
        << costs.size() << ',' << bad.size() << ',' << (pass ? "true" : "false") << '\n';
  } else {
    out << pad("bound b", 22) << num(b) << '\n';
    out << pad("cost vectors", 22) << costs.size() << " (seed " << opts.seed << ")\n";
    out << pad("violations", 22) << bad.size() << '\n';
    for (std::size_t k = 0; k < bad.size() && k < 5; ++k) {
      out << "  c = (";
      const auto& c = costs[bad[k]];
      for (std::size_t i = 0; i < c.size(); ++i) out << (i ? ", " : "") << num(c[i]);
      out << ")\n";
    }
    out << pad("IC on instance costs", 22) << (own ? "yes" : "no") << '\n';
    out << pad("result", 22) << (pass ? "PASS" : "FAIL") << '\n';
  }
  return pass ? kOk : kVerificationFailed;
}

std::vector<ReportRow> report_rows(const ContractSetting& setting, double bound,
                                   double ic_margin) {
  std::vector<ReportRow> rows;
  const auto& p = setting.target_distribution();
  for (auto obj : {Objective::MinPay, Objective::MinBudget, Objective::MinVariance}) {
    for (auto con : {Constraint::Unconstrained, Constraint::Monotone, Constraint::Threshold}) {
      ReportRow cell[2];
      for (int r = 0; r < 2; ++r) {
        cell[r].objective = obj;
        cell[r].constraint = con;
        cell[r].robust = r == 1;
        try {
          const auto t =
              r == 0 ? constrained_contract(setting, obj, con, ic_margin)
                     : cost_robust_contract(setting.distributions(), bound, obj, con, ic_margin);
          cell[r].feasible = true;
          cell[r].expected_pay = t.expected_pay(p);
          cell[r].budget = t.budget();
          cell[r].stdev = t.stdev(p);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::NotImplementable) throw;
        }
      }
      if (cell[0].feasible && cell[1].feasible) {
        auto own = [obj](const ReportRow& row) {
          switch (obj) {
            case Objective::MinPay: return row.expected_pay;
            case Objective::MinBudget: return row.budget;
            case Objective::MinVariance: return row.stdev;
          }
          return 0.0;
        };
        const double aware = own(cell[0]);
        cell[1].price_of_robustness_percent =
            aware > 0.0 ? 100.0 * (own(cell[1]) / aware - 1.0) : 0.0;
      }
      rows.push_back(cell[0]);
      rows.push_back(cell[1]);
    }
  }
  return rows;
}

int cmd_report(const Options& opts, std::ostream& out) {
  const auto inst = load(opts);
  const auto& s = inst.contract_setting();
  const double b = bound_of(opts, inst);
  const auto rows = report_rows(s, b, margin_of(opts, inst));

  if (opts.format == Format::Csv) {
    out << "objective,constraint,robustness,expected_pay,budget,stdev,"
           "price_of_robustness_percent\n";
    for (const auto& r : rows) {
      out << to_string(r.objective) << ',' << to_string(r.constraint) << ','
          << mode_name(r.robust) << ',';
      if (r.feasible) {
        out << ingest::format_double(r.expected_pay) << ',' << ingest::format_double(r.budget)
            << ',' << ingest::format_double(r.stdev) << ','
            << ingest::format_double(r.price_of_robustness_percent) << '\n';
      } else {
        out << ",,,\n";
      }
    }
    return kOk;
  }
  if (opts.format == Format::Json) {
    json arr = json::array();
    for (const auto& r : rows) {
      json j = {{"objective", to_string(r.objective)},
                {"constraint", to_string(r.constraint)},
                {"robustness", mode_name(r.robust)},
                {"feasible", r.feasible}};
      if (r.feasible) {
        j["expected_pay"] = r.expected_pay;
        j["budget"] = r.budget;
        j["stdev"] = r.stdev;
        j["price_of_robustness_percent"] = r.price_of_robustness_percent;
      }
      arr.push_back(j);
    }
    out << json{{"bound", b}, {"rows", arr}}.dump(2) << '\n';
    return kOk;
  }

  print_warnings(inst, out);
  out << "bound b = " << num(b) << "; price = robust vs aware on the row's own objective\n\n";
  out << pad("objective", 14) << pad("constraint", 12) << rpad("E[t]", 10) << rpad("max t", 10)
      << rpad("stdev", 10) << " |" << rpad("E[t]", 10) << rpad("max t", 10) << rpad("stdev", 10)
      << rpad("price", 10) << '\n';
  out << pad("", 26) << pad("  cost-aware", 30) << " |  cost-robust\n";
  auto cells = [&](const ReportRow& r) {
    if (!r.feasible) return rpad("-", 10) + rpad("-", 10) + rpad("-", 10);
    return rpad(num(r.expected_pay), 10) + rpad(num(r.budget), 10) + rpad(num(r.stdev), 10);
  };
  for (std::size_t k = 0; k < rows.size(); k += 2) {
    const auto& a = rows[k];
    const auto& r = rows[k + 1];
    char price[32] = "-";
    if (a.feasible && r.feasible) {
      std::snprintf(price, sizeof price, "%+.1f%%", r.price_of_robustness_percent);
    }
    out << pad(to_string(a.objective), 14) << pad(to_string(a.constraint), 12) << cells(a)
        << " |" << cells(r) << rpad(price, 10) << '\n';
  }
  return kOk;
}

int cmd_sweep(const Options& opts, std::ostream& out) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(opts.instance)) {
    throw Error(ErrorCode::IoError, opts.instance.string() + " is not a directory");
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(opts.instance)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  const bool robust = opts.bound.has_value() || opts.from_costs;
  const bool csv = opts.format == Format::Csv;
  json arr = json::array();
  if (csv) out << "instance,status,expected_pay,budget,stdev\n";
  if (opts.format == Format::Text) {
    out << pad("instance", 26) << pad("status", 18) << rpad("E[t]", 10) << rpad("max t", 10)
        << rpad("stdev", 10) << '\n';
  }
  int worst = kOk;
  for (const auto& f : files) {
    std::string status = "ok";
    double e = 0, bud = 0, sd = 0;
    try {
      Options one = opts;
      one.instance = f;
      const auto inst = load(one);
      const auto& s = inst.contract_setting();
      const auto obj = objective_of(one, inst);
      const auto con = constraint_of(one, inst);
      const double margin = margin_of(one, inst);
      const auto t = robust ? cost_robust_contract(s.distributions(), bound_of(one, inst), obj,
                                                   con, margin)
                            : constrained_contract(s, obj, con, margin);
      e = t.expected_pay(s.target_distribution());
      bud = t.budget();
      sd = t.stdev(s.target_distribution());
    } catch (const Error& err) {
      status = to_string(err.code());
      if (worst == kOk) worst = exit_code_for(err.code());
    }
    const std::string name = f.filename().string();
    const bool ok = status == "ok";
    if (csv) {
      out << name << ',' << status << ',';
      if (ok) {
        out << ingest::format_double(e) << ',' << ingest::format_double(bud) << ','
            << ingest::format_double(sd);
      } else {
        out << ",,";
      }
      out << '\n';
    } else if (opts.format == Format::Json) {
      json j = {{"instance", name}, {"status", status}};
      if (ok) {
        j["expected_pay"] = e;
        j["budget"] = bud;
        j["stdev"] = sd;
      }
      arr.push_back(j);
    } else {
      out << pad(name, 26) << pad(status, 18);
      if (ok) out << rpad(num(e), 10) << rpad(num(bud), 10) << rpad(num(sd), 10);
      out << '\n';
    }
  }
  if (opts.format == Format::Json) out << arr.dump(2) << '\n';
  return worst;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contracts for paying text generators: optimal and cost-robust", "p4p"};
  app.require_subcommand(1);
  Options opts;
  std::string objective, constraint, format = "text";
  std::optional<double> bound, margin;

  const std::map<std::string, Objective> objectives = {
      {"pay", Objective::MinPay}, {"budget", Objective::MinBudget},
      {"variance", Objective::MinVariance}};
  const std::map<std::string, Constraint> constraints = {
      {"none", Constraint::Unconstrained}, {"monotone", Constraint::Monotone},
      {"threshold", Constraint::Threshold}};

  auto common = [&](CLI::App* sub, bool solve_flags) {
    sub->add_option("--format", format, "Output format")
        ->check(CLI::IsMember({"text", "csv", "json"}));
    sub->add_flag("--uniform-verbosity", opts.uniform_verbosity,
                  "Costs per 1M tokens, ignoring per-model verbosity");
    if (solve_flags) {
      sub->add_option("--objective", objective, "Contract objective")
          ->check(CLI::IsMember({"pay", "budget", "variance"}));
      sub->add_option("--constraint", constraint, "Shape constraint")
          ->check(CLI::IsMember({"none", "monotone", "threshold"}));
      sub->add_option("--ic-margin", margin, "Strengthen every IC row by this margin");
    }
  };
  auto bound_flags = [&](CLI::App* sub) {
    auto* b = sub->add_option("--bound", bound, "Cost-spread bound b (default c_n - c_1)");
    sub->add_flag("--from-costs", opts.from_costs, "Use b = c_n - c_1 from the instance")
        ->excludes(b);
  };

  auto* solve = app.add_subcommand("solve", "Optimal cost-aware contract");
  solve->add_option("instance", opts.instance, "Instance JSON")->required();
  common(solve, true);

  auto* robust = app.add_subcommand("robust", "Optimal b-cost-robust contract");
  robust->add_option("instance", opts.instance, "Instance JSON")->required();
  common(robust, true);
  bound_flags(robust);

  auto* dual = app.add_subcommand("dual", "Least favorable mixture and implied budget");
  dual->add_option("instance", opts.instance, "Instance JSON")->required();
  common(dual, false);
  bound_flags(dual);

  auto* verify = app.add_subcommand("verify", "Check a contract against sampled cost vectors");
  verify->add_option("instance", opts.instance, "Instance JSON")->required();
  verify->add_option("contract", opts.contract, "Contract CSV (outcome,payment)")->required();
  verify->add_option("--samples", opts.samples, "Random cost vectors besides the two extremes");
  verify->add_option("--seed", opts.seed, "Sampling seed");
  common(verify, false);
  bound_flags(verify);

  auto* report = app.add_subcommand("report", "Objective x constraint x robustness table");
  report->add_option("instance", opts.instance, "Instance JSON")->required();
  common(report, false);
  report->add_option("--ic-margin", margin, "Strengthen every IC row by this margin");
  bound_flags(report);

  auto* sweep = app.add_subcommand("sweep", "Solve every instance in a directory");
  sweep->add_option("directory", opts.instance, "Directory of instance JSON files")->required();
  common(sweep, true);
  bound_flags(sweep);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  if (!objective.empty()) opts.objective = objectives.at(objective);
  if (!constraint.empty()) opts.constraint = constraints.at(constraint);
  opts.format = format == "csv" ? Format::Csv : format == "json" ? Format::Json : Format::Text;
  opts.bound = bound;
  opts.ic_margin = margin;

  try {
    if (solve->parsed()) return cmd_solve(opts, out);
    if (robust->parsed()) return cmd_robust(opts, out);
    if (dual->parsed()) return cmd_dual(opts, out);
    if (verify->parsed()) return cmd_verify(opts, out);
    if (report->parsed()) return cmd_report(opts, out);
    if (sweep->parsed()) return cmd_sweep(opts, out);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NotImplementable || e.code() == ErrorCode::NotSeparable) {
      err << "error: target not implementable (" << e.what() << ")\n";
    } else {
      err << "error: " << e.what() << '\n';
    }
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kNumerical;
  }
  return kUsage;
}

}  // namespace p4p::cli
