#pragma once

// Instance files: benchmark histograms or pass rates per model plus energy
// figures, turned into a validated ContractSetting.
//
// {
//   "outcomes": 10,                       // or an array of labels
//   "models": [ { "name": "...", "score_histogram": [...],
//                 "tokens_per_kwh": 576923, "verbosity": 1625 }, ... ],
//   "target": "Llama-2-70B-chat",         // name or index; must be last
//   "cost_config": { "energy_rate": 0.105, "payment_unit": 1.0 },
//   "reference_energy": { "Llama-2-70B-chat": 164062.5 },
//   "solve": { "objective": "budget", "constraint": "monotone", "bound": 0.458 }
// }
//
// A model may give "pass_rate" instead of a histogram (two outcomes), a
// direct "cost" instead of energy data, or "extrapolated_from" naming a
// reference_energy entry or another model whose energy figure it borrows.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "p4p/core.hpp"

namespace p4p::ingest {

struct CostConfig {
  double energy_rate = 0.105;  // $/kWh
  double payment_unit = 1.0;   // $ per unit of contract payment
};

struct ModelRecord {
  std::string name;
  std::optional<double> tokens_per_kwh;
  double verbosity = 1.0;
  std::vector<double> score_histogram;
  std::optional<double> pass_rate;
  std::optional<double> cost;
  std::optional<std::string> extrapolated_from;
};

/// $ per 1M output tokens.
inline double per_mtoken_cost(double tokens_per_kwh, const CostConfig& config) {
  if (!(tokens_per_kwh > 0.0)) throw Error(ErrorCode::InvalidArgument, "tokens_per_kwh must be > 0");
  if (!(config.energy_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "energy_rate must be > 0");
  return 1e6 * config.energy_rate / tokens_per_kwh;
}

inline double per_mtoken_cost(const ModelRecord& record, const CostConfig& config) {
  if (!record.tokens_per_kwh) {
    throw Error(ErrorCode::InvalidArgument, "model " + record.name + " has no energy figure");
  }
  return per_mtoken_cost(*record.tokens_per_kwh, config);
}

/// Inverse of per_mtoken_cost.
inline double tokens_per_kwh_for(double per_mtoken, const CostConfig& config) {
  if (!(per_mtoken > 0.0)) throw Error(ErrorCode::InvalidArgument, "cost must be > 0");
  return 1e6 * config.energy_rate / per_mtoken;
}

/// $ per response: per-token cost times mean response length.
inline double per_response_cost(const ModelRecord& record, const CostConfig& config) {
  return per_mtoken_cost(record, config) / 1e6 * record.verbosity;
}

inline OutcomeDistribution histogram_to_distribution(const std::vector<double>& counts) {
  double total = 0.0;
  for (double c : counts) {
    if (!std::isfinite(c) || c < 0.0) {
      throw Error(ErrorCode::InvalidArgument, "histogram counts must be finite and >= 0");
    }
    total += c;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::EmptyHistogram, "histogram is empty");
  std::vector<double> p(counts.size());
  for (std::size_t j = 0; j < p.size(); ++j) p[j] = counts[j] / total;
  return OutcomeDistribution::from(std::move(p));
}

struct SolveDefaults {
  std::optional<Objective> objective;
  std::optional<Constraint> constraint;
  std::optional<double> bound;
  std::optional<double> ic_margin;
};

struct Instance {
  std::vector<ModelRecord> models;
  std::vector<std::string> outcome_labels;
  CostConfig cost_config;
  std::vector<double> costs;  // in payment units
  std::optional<ContractSetting> setting;
  SolveDefaults defaults;
  std::vector<std::string> warnings;

  const ContractSetting& contract_setting() const { return *setting; }
};

struct LoadOptions {
  /// Costs per 1M tokens, ignoring per-model verbosity.
  bool uniform_verbosity = false;
};

inline std::optional<Objective> parse_objective(const std::string& s) {
  if (s == "pay" || s == "min-pay") return Objective::MinPay;
  if (s == "budget" || s == "min-budget") return Objective::MinBudget;
  if (s == "variance" || s == "min-variance") return Objective::MinVariance;
  return std::nullopt;
}

inline std::optional<Constraint> parse_constraint(const std::string& s) {
  if (s == "none") return Constraint::Unconstrained;
  if (s == "monotone") return Constraint::Monotone;
  if (s == "threshold") return Constraint::Threshold;
  return std::nullopt;
}

namespace detail {

using nlohmann::json;

[[noreturn]] inline void schema_error(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::SchemaError, path + ": " + what);
}

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) schema_error(path + "/" + key, "missing");
  return obj.at(key);
}

inline double number(const json& v, const std::string& path) {
  if (!v.is_number()) schema_error(path, "expected a number");
  return v.get<double>();
}

inline double positive(const json& v, const std::string& path) {
  const double x = number(v, path);
  if (!(x > 0.0) || !std::isfinite(x)) schema_error(path, "expected a positive number");
  return x;
}

inline std::string text(const json& v, const std::string& path) {
  if (!v.is_string()) schema_error(path, "expected a string");
  return v.get<std::string>();
}

inline ModelRecord parse_model(const json& v, const std::string& path) {
  if (!v.is_object()) schema_error(path, "expected an object");
  ModelRecord r;
  r.name = text(require(v, "name", path), path + "/name");
  if (v.contains("tokens_per_kwh")) {
    r.tokens_per_kwh = positive(v["tokens_per_kwh"], path + "/tokens_per_kwh");
  }
  if (v.contains("verbosity")) {
    r.verbosity = number(v["verbosity"], path + "/verbosity");
    if (r.verbosity < 0.0) schema_error(path + "/verbosity", "must be >= 0");
  }
  if (v.contains("score_histogram")) {
    const auto& h = v["score_histogram"];
    if (!h.is_array()) schema_error(path + "/score_histogram", "expected an array");
    for (std::size_t j = 0; j < h.size(); ++j) {
      r.score_histogram.push_back(number(h[j], path + "/score_histogram/" + std::to_string(j)));
    }
  }
  if (v.contains("pass_rate")) {
    const double p = number(v["pass_rate"], path + "/pass_rate");
    if (p < 0.0 || p > 1.0) schema_error(path + "/pass_rate", "must lie in [0,1]");
    r.pass_rate = p;
  }
  if (v.contains("cost")) {
    const double c = number(v["cost"], path + "/cost");
    if (c < 0.0 || !std::isfinite(c)) schema_error(path + "/cost", "must be >= 0");
    r.cost = c;
  }
  if (v.contains("extrapolated_from")) {
    r.extrapolated_from = text(v["extrapolated_from"], path + "/extrapolated_from");
  }
  if (r.score_histogram.empty() == !r.pass_rate.has_value()) {
    schema_error(path, "give exactly one of score_histogram or pass_rate");
  }
  return r;
}

}  // namespace detail

inline Instance parse_instance(const nlohmann::json& doc, const LoadOptions& options = {}) {
  using detail::schema_error;
  if (!doc.is_object()) schema_error("", "expected a JSON object");
  Instance inst;

  const auto& models = detail::require(doc, "models", "");
  if (!models.is_array() || models.size() < 2) schema_error("/models", "need at least two models");

  if (doc.contains("cost_config")) {
    const auto& cc = doc["cost_config"];
    if (cc.contains("energy_rate")) {
      inst.cost_config.energy_rate = detail::positive(cc["energy_rate"], "/cost_config/energy_rate");
    }
    if (cc.contains("payment_unit")) {
      inst.cost_config.payment_unit =
          detail::positive(cc["payment_unit"], "/cost_config/payment_unit");
    }
  }

  for (std::size_t i = 0; i < models.size(); ++i) {
    inst.models.push_back(detail::parse_model(models[i], "/models/" + std::to_string(i)));
  }

  std::size_t m = 0;
  if (doc.contains("outcomes")) {
    const auto& o = doc["outcomes"];
    if (o.is_number_unsigned()) {
      m = o.get<std::size_t>();
    } else if (o.is_array()) {
      for (std::size_t j = 0; j < o.size(); ++j) {
        inst.outcome_labels.push_back(o[j].is_string() ? o[j].get<std::string>() : o[j].dump());
      }
      m = o.size();
    } else {
      schema_error("/outcomes", "expected a count or an array of labels");
    }
  } else {
    const auto& first = inst.models.front();
    m = first.pass_rate ? 2 : first.score_histogram.size();
  }
  if (m < 2) schema_error("/outcomes", "need at least two outcomes");
  if (inst.outcome_labels.empty()) {
    for (std::size_t j = 1; j <= m; ++j) inst.outcome_labels.push_back(std::to_string(j));
  }

  if (doc.contains("target")) {
    const auto& t = doc["target"];
    std::optional<std::size_t> idx;
    if (t.is_number_unsigned()) {
      idx = t.get<std::size_t>();
    } else if (t.is_string()) {
      for (std::size_t i = 0; i < inst.models.size(); ++i) {
        if (inst.models[i].name == t.get<std::string>()) idx = i;
      }
    }
    if (!idx || *idx >= inst.models.size()) schema_error("/target", "unknown model");
    if (*idx != inst.models.size() - 1) {
      schema_error("/target", "the target must be the last (costliest) model");
    }
  }

  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < inst.models.size(); ++i) {
    const auto& r = inst.models[i];
    const std::string path = "/models/" + std::to_string(i);
    if (r.pass_rate) {
      if (m != 2) schema_error(path + "/pass_rate", "pass rates need exactly two outcomes");
      rows.push_back({1.0 - *r.pass_rate, *r.pass_rate});
    } else {
      if (r.score_histogram.size() != m) {
        schema_error(path + "/score_histogram", "expected " + std::to_string(m) + " counts");
      }
      try {
        rows.push_back(histogram_to_distribution(r.score_histogram).vector());
      } catch (const Error& e) {
        schema_error(path + "/score_histogram", e.what());
      }
    }
  }

  std::map<std::string, double> reference;
  if (doc.contains("reference_energy")) {
    const auto& ref = doc["reference_energy"];
    if (!ref.is_object()) schema_error("/reference_energy", "expected an object");
    for (const auto& [name, v] : ref.items()) {
      reference[name] = detail::positive(v, "/reference_energy/" + name);
    }
  }
  for (const auto& r : inst.models) {
    if (r.tokens_per_kwh && !reference.count(r.name)) reference[r.name] = *r.tokens_per_kwh;
  }

  for (std::size_t i = 0; i < inst.models.size(); ++i) {
    auto& r = inst.models[i];
    const std::string path = "/models/" + std::to_string(i);
    double dollars = 0.0;
    if (r.cost) {
      inst.costs.push_back(*r.cost);
      continue;
    }
    if (!r.tokens_per_kwh && r.extrapolated_from) {
      const auto it = reference.find(*r.extrapolated_from);
      if (it == reference.end()) schema_error(path + "/extrapolated_from", "unknown reference");
      r.tokens_per_kwh = it->second;
    }
    if (!r.tokens_per_kwh) schema_error(path, "no cost, tokens_per_kwh or extrapolated_from");
    if (options.uniform_verbosity) {
      dollars = per_mtoken_cost(r, inst.cost_config);
    } else {
      if (r.verbosity == 0.0) inst.warnings.push_back(r.name + ": verbosity 0 gives zero cost");
      dollars = per_response_cost(r, inst.cost_config);
    }
    inst.costs.push_back(dollars / inst.cost_config.payment_unit);
  }

  if (doc.contains("solve")) {
    const auto& s = doc["solve"];
    if (s.contains("objective")) {
      inst.defaults.objective = parse_objective(detail::text(s["objective"], "/solve/objective"));
      if (!inst.defaults.objective) schema_error("/solve/objective", "unknown objective");
    }
    if (s.contains("constraint")) {
      inst.defaults.constraint =
          parse_constraint(detail::text(s["constraint"], "/solve/constraint"));
      if (!inst.defaults.constraint) schema_error("/solve/constraint", "unknown constraint");
    }
    if (s.contains("bound")) inst.defaults.bound = detail::positive(s["bound"], "/solve/bound");
    if (s.contains("ic_margin")) {
      inst.defaults.ic_margin = detail::number(s["ic_margin"], "/solve/ic_margin");
    }
  }

  inst.setting = validate_setting(std::move(rows), inst.costs);
  return inst;
}

inline Instance load_instance(const std::filesystem::path& path, const LoadOptions& options = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
  }
  return parse_instance(doc, options);
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// CSV with columns outcome,payment; payments at 17 significant digits.
inline void write_contract_csv(std::ostream& out, const Contract& t,
                               const std::vector<std::string>& labels = {}) {
  out << "outcome,payment\n";
  for (std::size_t j = 0; j < t.size(); ++j) {
    out << (j < labels.size() ? labels[j] : std::to_string(j + 1)) << ','
        << format_double(t[j]) << '\n';
  }
}

inline Contract read_contract_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::SchemaError, "contract CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "outcome,payment") {
    throw Error(ErrorCode::SchemaError, "contract CSV header must be 'outcome,payment'");
  }
  std::vector<double> payments;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw Error(ErrorCode::SchemaError, "row " + std::to_string(row) + ": expected two columns");
    }
    const std::string cell = line.substr(comma + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != cell.size()) {
      throw Error(ErrorCode::SchemaError, "row " + std::to_string(row) + ": bad payment '" + cell + "'");
    }
    payments.push_back(v);
  }
  return Contract(std::move(payments));
}

inline Contract read_contract_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return read_contract_csv(in);
}

}  // namespace p4p::ingest
