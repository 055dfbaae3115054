#pragma once

// Brute-force reference solvers for tiny instances. Slow on purpose; they
// share no code with the LP/QP path beyond the IC check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "p4p/contracts.hpp"
#include "p4p/core.hpp"
#include "p4p/statistics.hpp"

namespace p4p::oracle {

namespace detail {

enum class GridObjective { Budget, Pay };

inline Contract grid_search(const ContractSetting& s, double step, GridObjective objective) {
  const std::size_t m = s.outcomes();
  const std::size_t n = s.actions();
  if (m > 3) throw Error(ErrorCode::InvalidArgument, "grid oracle supports at most 3 outcomes");
  if (!(step > 0.0)) throw Error(ErrorCode::InvalidArgument, "grid step must be > 0");
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double d = tv_distance(s.distribution(i), s.target_distribution());
    if (d > 0.0) gap = std::min(gap, d);
  }
  if (!std::isfinite(gap)) throw Error(ErrorCode::WindowExhausted, "no alternative differs");
  const double window = 10.0 * s.cost_spread() / gap;
  const auto cells = static_cast<std::int64_t>(std::floor(window / step));

  const auto& p = s.target_distribution();
  std::vector<double> t(m, 0.0);
  std::vector<double> best;
  double best_value = std::numeric_limits<double>::infinity();

  // Enumerate the first m-1 payments; the last is set to its least feasible
  // grid value, which is optimal for both objectives.
  const std::size_t free = m - 1;
  std::vector<std::int64_t> idx(free, 0);
  for (;;) {
    for (std::size_t j = 0; j < free; ++j) t[j] = static_cast<double>(idx[j]) * step;
    double lower = 0.0;
    double upper = window;
    bool ok = true;
    for (std::size_t i = 0; i + 1 < n && ok; ++i) {
      double need = s.cost(n - 1) - s.cost(i);
      for (std::size_t j = 0; j < free; ++j) need -= (p[j] - s.prob(i, j)) * t[j];
      const double d = p[m - 1] - s.prob(i, m - 1);
      if (d > 0.0) {
        lower = std::max(lower, need / d);
      } else if (d < 0.0) {
        upper = std::min(upper, need / d);
      } else if (need > kIcSlack) {
        ok = false;
      }
    }
    if (ok) {
      auto k = static_cast<std::int64_t>(std::ceil(lower / step - 1e-9));
      for (int bump = 0; bump < 2; ++bump, ++k) {
        t[m - 1] = static_cast<double>(k) * step;
        if (t[m - 1] > upper + 1e-12 || k > cells) break;
        const Contract c(t);
        if (!verify_ic(s, c)) continue;
        const double v = objective == GridObjective::Budget ? c.budget() : c.expected_pay(p);
        if (v < best_value) {
          best_value = v;
          best = t;
        }
        break;
      }
    }
    std::size_t pos = 0;
    while (pos < free && ++idx[pos] > cells) idx[pos++] = 0;
    if (pos == free) break;
  }
  if (best.empty()) {
    throw Error(ErrorCode::WindowExhausted, "no feasible grid contract inside the window");
  }
  return Contract(best);
}

}  // namespace detail

inline Contract grid_min_budget(const ContractSetting& setting, double grid_step) {
  return detail::grid_search(setting, grid_step, detail::GridObjective::Budget);
}

inline Contract grid_min_pay(const ContractSetting& setting, double grid_step) {
  return detail::grid_search(setting, grid_step, detail::GridObjective::Pay);
}

struct DeterministicTests {
  double best_sum_risk = 1.0;
  double best_ratio_risk = std::numeric_limits<double>::infinity();
  std::vector<double> sum_test;
  std::vector<double> ratio_test;
};

/// Exact minimax risks over all deterministic tests psi in {0,1}^m.
inline DeterministicTests enumerate_tests(const std::vector<OutcomeDistribution>& dists) {
  const std::size_t m = dists.back().size();
  if (m > 20) throw Error(ErrorCode::TooManyOutcomes, "enumeration supports at most 20 outcomes");
  DeterministicTests out;
  out.best_sum_risk = std::numeric_limits<double>::infinity();
  std::vector<double> psi(m);
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    for (std::size_t j = 0; j < m; ++j) psi[j] = (mask >> j) & 1u ? 1.0 : 0.0;
    const auto r = risk_report(dists, HypothesisTest(psi));
    if (r.sum_risk < out.best_sum_risk) {
      out.best_sum_risk = r.sum_risk;
      out.sum_test = psi;
    }
    if (!r.ratio_undefined && r.ratio_risk < out.best_ratio_risk) {
      out.best_ratio_risk = r.ratio_risk;
      out.ratio_test = psi;
    }
  }
  return out;
}

/// Nondecreasing cost vectors with c_n - c_1 <= b. The first two are always
/// (0,...,0,b) and (b,...,b); at least two vectors are returned.
inline std::vector<std::vector<double>> sample_cost_vectors(double b, std::size_t n,
                                                            std::size_t count,
                                                            std::uint64_t seed) {
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "count must be >= 1");
  if (!(b > 0.0)) throw Error(ErrorCode::InvalidArgument, "b must be > 0");
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "need at least two actions");
  std::vector<std::vector<double>> out;
  std::vector<double> corner(n, 0.0);
  corner.back() = b;
  out.push_back(corner);
  out.emplace_back(n, b);
  std::mt19937_64 rng(seed);
  // Bit-level conversion keeps the stream identical across standard libraries.
  auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  while (out.size() < count) {
    std::vector<double> c(n);
    const double low = b * unit();
    const double spread = b * unit();
    c.front() = low;
    c.back() = low + spread;
    for (std::size_t i = 1; i + 1 < n; ++i) c[i] = low + spread * unit();
    std::sort(c.begin() + 1, c.end() - 1);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace p4p::oracle
