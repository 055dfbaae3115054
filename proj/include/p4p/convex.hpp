#pragma once

// Dense linear and convex quadratic programming.
//
// solve_lp: two-phase tableau simplex with Bland's lowest-index rule. The
// final basis is re-factored with a full-pivot LU to recover primal values
// and row multipliers accurately.
//
// solve_qp: the KKT conditions of min x'Vx + c'x over a polyhedron form a
// monotone LCP, solved exactly by Lemke's complementary pivoting with the
// lexicographic ratio test. Singular V (for example a variance matrix, whose
// kernel contains the all-ones vector) is handled without regularization.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "p4p/core.hpp"

namespace p4p::convex {

inline constexpr double kFeasibilityTol = 1e-8;
inline constexpr double kOptimalityTol = 1e-7;
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class Sense { Minimize, Maximize };
enum class RowSense { LessEqual, GreaterEqual, Equal };
enum class Status { Optimal, Infeasible, Unbounded };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "Optimal";
    case Status::Infeasible: return "Infeasible";
    case Status::Unbounded: return "Unbounded";
  }
  return "?";
}

struct Row {
  std::vector<double> coeffs;
  RowSense sense = RowSense::LessEqual;
  double rhs = 0.0;
};

class LinearProgram {
 public:
  explicit LinearProgram(std::size_t variables, Sense sense = Sense::Minimize)
      : sense_(sense),
        objective_(variables, 0.0),
        lower_(variables, 0.0),
        upper_(variables, kInfinity) {}

  std::size_t variables() const noexcept { return objective_.size(); }
  Sense sense() const noexcept { return sense_; }

  void set_objective(std::vector<double> coeffs) {
    check_arity(coeffs.size());
    objective_ = std::move(coeffs);
  }

  std::size_t add_row(std::vector<double> coeffs, RowSense sense, double rhs) {
    check_arity(coeffs.size());
    rows_.push_back(Row{std::move(coeffs), sense, rhs});
    return rows_.size() - 1;
  }

  void set_bounds(std::size_t var, double lower, double upper) {
    if (var >= variables()) throw Error(ErrorCode::ArityMismatch, "variable index out of range");
    if (std::isnan(lower) || std::isnan(upper) || lower > upper || lower == kInfinity ||
        upper == -kInfinity) {
      throw Error(ErrorCode::InvalidArgument, "invalid variable bounds");
    }
    lower_[var] = lower;
    upper_[var] = upper;
  }

  const std::vector<double>& objective() const noexcept { return objective_; }
  const std::vector<Row>& rows() const noexcept { return rows_; }
  double lower(std::size_t j) const { return lower_[j]; }
  double upper(std::size_t j) const { return upper_[j]; }

 private:
  void check_arity(std::size_t k) const {
    if (k != objective_.size()) {
      throw Error(ErrorCode::ArityMismatch, "row arity differs from the objective");
    }
  }

  Sense sense_;
  std::vector<double> objective_;
  std::vector<Row> rows_;
  std::vector<double> lower_;
  std::vector<double> upper_;
};

/// Minimize x'Vx + c'x subject to the rows and bounds of `constraints`; the
/// linear term c is the objective of `constraints` (its sense is ignored).
struct QuadraticProgram {
  Eigen::MatrixXd psd_matrix;
  LinearProgram constraints;
};

struct SolveOutcome {
  Status status = Status::Infeasible;
  std::vector<double> primal;
  /// One multiplier per constraint row, with objective = A'y + reduced cost.
  std::vector<double> dual;
  std::vector<double> reduced_costs;
  double objective_value = 0.0;
  /// Infeasible: Farkas multipliers on the rows. Unbounded: a primal ray.
  std::vector<double> certificate;
  std::size_t iterations = 0;
};

struct KktResiduals {
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;
  double duality_gap = 0.0;
};

namespace detail {

// x = offset + transform * x', x' >= 0; rows are expressed in x'.
struct NonnegativeForm {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  std::vector<RowSense> senses;
  std::vector<int> origin;  // user row index, -1 for an upper-bound row
  Eigen::VectorXd offset;
  Eigen::MatrixXd transform;
};

inline NonnegativeForm to_nonnegative(const LinearProgram& lp) {
  const std::size_t n = lp.variables();
  std::vector<std::pair<std::size_t, double>> cols;  // (variable, sign)
  Eigen::VectorXd offset = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  std::vector<std::pair<std::size_t, double>> upper_rows;  // (column, limit)
  for (std::size_t j = 0; j < n; ++j) {
    const double lo = lp.lower(j);
    const double hi = lp.upper(j);
    if (std::isfinite(lo)) {
      offset[static_cast<Eigen::Index>(j)] = lo;
      cols.emplace_back(j, 1.0);
      if (std::isfinite(hi)) upper_rows.emplace_back(cols.size() - 1, hi - lo);
    } else if (std::isfinite(hi)) {
      offset[static_cast<Eigen::Index>(j)] = hi;
      cols.emplace_back(j, -1.0);
    } else {
      cols.emplace_back(j, 1.0);
      cols.emplace_back(j, -1.0);
    }
  }
  NonnegativeForm f;
  const auto nn = static_cast<Eigen::Index>(cols.size());
  f.offset = offset;
  f.transform = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), nn);
  for (Eigen::Index k = 0; k < nn; ++k) {
    f.transform(static_cast<Eigen::Index>(cols[k].first), k) = cols[k].second;
  }
  const auto& rows = lp.rows();
  const auto total = static_cast<Eigen::Index>(rows.size() + upper_rows.size());
  f.a = Eigen::MatrixXd::Zero(total, nn);
  f.b = Eigen::VectorXd::Zero(total);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    Eigen::Map<const Eigen::VectorXd> coeffs(rows[i].coeffs.data(),
                                             static_cast<Eigen::Index>(n));
    f.a.row(ii) = coeffs.transpose() * f.transform;
    f.b[ii] = rows[i].rhs - coeffs.dot(offset);
    f.senses.push_back(rows[i].sense);
    f.origin.push_back(static_cast<int>(i));
  }
  for (std::size_t k = 0; k < upper_rows.size(); ++k) {
    const auto ii = static_cast<Eigen::Index>(rows.size() + k);
    f.a(ii, static_cast<Eigen::Index>(upper_rows[k].first)) = 1.0;
    f.b[ii] = upper_rows[k].second;
    f.senses.push_back(RowSense::LessEqual);
    f.origin.push_back(-1);
  }
  return f;
}

inline std::size_t iteration_cap(std::size_t rows, std::size_t cols) {
  const std::size_t s = rows + cols;
  return 10 * s * s + 50;
}

inline constexpr double kPivotTol = 1e-9;
inline constexpr double kCostTol = 1e-10;

// Dense tableau for min c'x, Ax = b, x >= 0, b >= 0, in canonical form with
// respect to `basis`. The last row holds reduced costs, the last column the
// basic values.
class SimplexTableau {
 public:
  SimplexTableau(Eigen::MatrixXd t, std::vector<std::size_t> basis, std::size_t iteration_limit)
      : t_(std::move(t)), basis_(std::move(basis)), limit_(iteration_limit) {}

  Eigen::Index rows() const { return t_.rows() - 1; }
  Eigen::Index cols() const { return t_.cols() - 1; }
  const std::vector<std::size_t>& basis() const { return basis_; }
  std::size_t iterations() const { return iterations_; }
  double value(Eigen::Index i) const { return t_(i, cols()); }
  double entry(Eigen::Index i, Eigen::Index j) const { return t_(i, j); }
  double objective() const { return -t_(rows(), cols()); }

  // Loads cost vector c (length cols) and prices out the basis.
  void set_costs(const Eigen::VectorXd& c) {
    const Eigen::Index r = rows();
    t_.row(r).head(cols()) = c.transpose();
    t_(r, cols()) = 0.0;
    for (Eigen::Index i = 0; i < r; ++i) {
      const double cb = c[static_cast<Eigen::Index>(basis_[static_cast<std::size_t>(i)])];
      if (cb != 0.0) t_.row(r) -= cb * t_.row(i);
    }
  }

  void pivot(Eigen::Index row, Eigen::Index col) {
    t_.row(row) /= t_(row, col);
    for (Eigen::Index i = 0; i <= rows(); ++i) {
      if (i == row) continue;
      const double f = t_(i, col);
      if (f != 0.0) t_.row(i) -= f * t_.row(row);
    }
    t_(row, col) = 1.0;
    basis_[static_cast<std::size_t>(row)] = static_cast<std::size_t>(col);
    ++iterations_;
    if (iterations_ > limit_) {
      throw Error(ErrorCode::NumericalBreakdown, "simplex iteration limit exceeded");
    }
  }

  enum class Result { Optimal, Unbounded };

  // Bland's rule; columns >= `first_excluded` never enter.
  Result run(Eigen::Index first_excluded, Eigen::Index* unbounded_col = nullptr) {
    const Eigen::Index r = rows();
    for (;;) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < first_excluded; ++j) {
        if (t_(r, j) < -kCostTol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return Result::Optimal;
      Eigen::Index leave = -1;
      double best = kInfinity;
      for (Eigen::Index i = 0; i < r; ++i) {
        const double a = t_(i, enter);
        if (a <= kPivotTol) continue;
        const double ratio = std::max(t_(i, cols()), 0.0) / a;
        const double tie = 1e-12 * std::max(1.0, std::abs(best));
        if (leave < 0 || ratio < best - tie) {
          best = ratio;
          leave = i;
        } else if (ratio <= best + tie && basis_[static_cast<std::size_t>(i)] <
                                              basis_[static_cast<std::size_t>(leave)]) {
          leave = i;
        }
      }
      if (leave < 0) {
        if (unbounded_col) *unbounded_col = enter;
        return Result::Unbounded;
      }
      pivot(leave, enter);
    }
  }

 private:
  Eigen::MatrixXd t_;
  std::vector<std::size_t> basis_;
  std::size_t limit_;
  std::size_t iterations_ = 0;
};

}  // namespace detail

inline SolveOutcome solve_lp(const LinearProgram& lp) {
  using Eigen::Index;
  const detail::NonnegativeForm nf = detail::to_nonnegative(lp);
  const Index m = nf.a.rows();
  const Index nx = nf.a.cols();
  const double sgn_obj = lp.sense() == Sense::Maximize ? -1.0 : 1.0;
  Eigen::Map<const Eigen::VectorXd> c_user(lp.objective().data(),
                                           static_cast<Index>(lp.variables()));
  const Eigen::VectorXd c_x = sgn_obj * (nf.transform.transpose() * c_user);

  // Row scaling so that every right-hand side is nonnegative.
  std::vector<double> row_sign(static_cast<std::size_t>(m), 1.0);
  std::vector<RowSense> senses = nf.senses;
  for (Index i = 0; i < m; ++i) {
    if (nf.b[i] < 0.0) {
      row_sign[static_cast<std::size_t>(i)] = -1.0;
      auto& s = senses[static_cast<std::size_t>(i)];
      if (s == RowSense::LessEqual) s = RowSense::GreaterEqual;
      else if (s == RowSense::GreaterEqual) s = RowSense::LessEqual;
    }
  }
  Index n_slack = 0;
  Index n_art = 0;
  for (auto s : senses) {
    if (s != RowSense::Equal) ++n_slack;
    if (s != RowSense::LessEqual) ++n_art;
  }
  const Index n_cols = nx + n_slack + n_art;
  const Index art_begin = nx + n_slack;

  // Full standard-form matrix [A | slack | artificial] and rhs.
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(m, n_cols);
  Eigen::VectorXd rhs(m);
  std::vector<std::size_t> basis(static_cast<std::size_t>(m));
  {
    Index slack = nx;
    Index art = art_begin;
    for (Index i = 0; i < m; ++i) {
      const double s = row_sign[static_cast<std::size_t>(i)];
      full.row(i).head(nx) = s * nf.a.row(i);
      rhs[i] = s * nf.b[i];
      switch (senses[static_cast<std::size_t>(i)]) {
        case RowSense::LessEqual:
          full(i, slack) = 1.0;
          basis[static_cast<std::size_t>(i)] = static_cast<std::size_t>(slack++);
          break;
        case RowSense::GreaterEqual:
          full(i, slack++) = -1.0;
          full(i, art) = 1.0;
          basis[static_cast<std::size_t>(i)] = static_cast<std::size_t>(art++);
          break;
        case RowSense::Equal:
          full(i, art) = 1.0;
          basis[static_cast<std::size_t>(i)] = static_cast<std::size_t>(art++);
          break;
      }
    }
  }

  Eigen::MatrixXd tab = Eigen::MatrixXd::Zero(m + 1, n_cols + 1);
  tab.topLeftCorner(m, n_cols) = full;
  tab.topRightCorner(m, 1) = rhs;
  detail::SimplexTableau tableau(std::move(tab), basis,
                                 detail::iteration_cap(static_cast<std::size_t>(m),
                                                       static_cast<std::size_t>(n_cols)));

  SolveOutcome out;
  const auto n_user = lp.variables();
  const auto& user_rows = lp.rows();

  // Maps standard-form multipliers back to user rows.
  auto user_duals = [&](const Eigen::VectorXd& y_std, double scale) {
    std::vector<double> y(user_rows.size(), 0.0);
    for (Index i = 0; i < m; ++i) {
      const int o = nf.origin[static_cast<std::size_t>(i)];
      if (o >= 0) {
        y[static_cast<std::size_t>(o)] = scale * row_sign[static_cast<std::size_t>(i)] * y_std[i];
      }
    }
    return y;
  };
  auto basis_matrix = [&](const std::vector<std::size_t>& b) {
    Eigen::MatrixXd bm(m, m);
    for (Index k = 0; k < m; ++k) bm.col(k) = full.col(static_cast<Index>(b[static_cast<std::size_t>(k)]));
    return bm;
  };

  // Phase 1.
  if (n_art > 0) {
    Eigen::VectorXd c1 = Eigen::VectorXd::Zero(n_cols);
    c1.tail(n_art).setOnes();
    tableau.set_costs(c1);
    tableau.run(n_cols);
    const double infeas = tableau.objective();
    if (infeas > 1e-9 * std::max(1.0, rhs.cwiseAbs().maxCoeff())) {
      out.status = Status::Infeasible;
      out.iterations = tableau.iterations();
      const auto& b = tableau.basis();
      Eigen::VectorXd cb(m);
      for (Index k = 0; k < m; ++k) cb[k] = c1[static_cast<Index>(b[static_cast<std::size_t>(k)])];
      Eigen::FullPivLU<Eigen::MatrixXd> lu(basis_matrix(b).transpose());
      // Phase-1 multipliers w satisfy A'w <= 0 on structural columns,
      // b'w > 0, w <= 0 on <= rows and w >= 0 on >= rows (Farkas).
      out.certificate = user_duals(lu.solve(cb), 1.0);
      return out;
    }
    // Drive zero-level artificials out of the basis where possible; rows
    // where that fails are redundant and keep their artificial at zero.
    for (Index i = 0; i < m; ++i) {
      if (static_cast<Index>(tableau.basis()[static_cast<std::size_t>(i)]) < art_begin) continue;
      for (Index j = 0; j < art_begin; ++j) {
        if (std::abs(tableau.entry(i, j)) > detail::kPivotTol) {
          tableau.pivot(i, j);
          break;
        }
      }
    }
  }

  // Phase 2.
  Eigen::VectorXd c2 = Eigen::VectorXd::Zero(n_cols);
  c2.head(nx) = c_x;
  tableau.set_costs(c2);
  Index ray_col = -1;
  const auto result = tableau.run(art_begin, &ray_col);
  out.iterations = tableau.iterations();
  const auto& b = tableau.basis();

  if (result == detail::SimplexTableau::Result::Unbounded) {
    out.status = Status::Unbounded;
    Eigen::VectorXd dir = Eigen::VectorXd::Zero(n_cols);
    dir[ray_col] = 1.0;
    for (Index i = 0; i < m; ++i) {
      dir[static_cast<Index>(b[static_cast<std::size_t>(i)])] = -tableau.entry(i, ray_col);
    }
    const Eigen::VectorXd ray = nf.transform * dir.head(nx);
    out.certificate.assign(ray.data(), ray.data() + ray.size());
    return out;
  }

  // Re-factor the optimal basis for accurate primal and dual values.
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n_cols);
  Eigen::VectorXd y_std = Eigen::VectorXd::Zero(m);
  if (m > 0) {
    const Eigen::MatrixXd bm = basis_matrix(b);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(bm);
    Eigen::VectorXd xb;
    if (lu.isInvertible()) {
      xb = lu.solve(rhs);
    } else {
      xb.resize(m);
      for (Index i = 0; i < m; ++i) xb[i] = tableau.value(i);
    }
    for (Index i = 0; i < m; ++i) {
      double v = xb[i];
      if (v < 0.0 && v > -1e-9) v = 0.0;
      z[static_cast<Index>(b[static_cast<std::size_t>(i)])] = v;
    }
    Eigen::VectorXd cb(m);
    for (Index k = 0; k < m; ++k) cb[k] = c2[static_cast<Index>(b[static_cast<std::size_t>(k)])];
    Eigen::FullPivLU<Eigen::MatrixXd> lut(bm.transpose());
    y_std = lut.solve(cb);
  }

  const Eigen::VectorXd x = nf.offset + nf.transform * z.head(nx);
  out.status = Status::Optimal;
  out.primal.assign(x.data(), x.data() + x.size());
  out.dual = user_duals(y_std, sgn_obj);
  out.objective_value = c_user.dot(x);
  out.reduced_costs.assign(n_user, 0.0);
  for (std::size_t j = 0; j < n_user; ++j) {
    double d = lp.objective()[j];
    for (std::size_t i = 0; i < user_rows.size(); ++i) d -= user_rows[i].coeffs[j] * out.dual[i];
    out.reduced_costs[j] = d;
  }
  return out;
}

namespace detail {

// Shared residual computation; `gradient` is the objective gradient at x.
inline KktResiduals kkt_residuals(const LinearProgram& cons, const SolveOutcome& s,
                                  const std::vector<double>& gradient, bool maximize) {
  KktResiduals r;
  const auto& rows = cons.rows();
  const std::size_t n = cons.variables();
  const auto& x = s.primal;
  const double dir = maximize ? -1.0 : 1.0;
  double dual_obj = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double ax = 0.0;
    for (std::size_t j = 0; j < n; ++j) ax += rows[i].coeffs[j] * x[j];
    const double slack = ax - rows[i].rhs;
    const double y = s.dual[i] * dir;  // multiplier of the equivalent minimization
    switch (rows[i].sense) {
      case RowSense::LessEqual:
        r.primal = std::max(r.primal, slack);
        r.dual = std::max(r.dual, y);
        break;
      case RowSense::GreaterEqual:
        r.primal = std::max(r.primal, -slack);
        r.dual = std::max(r.dual, -y);
        break;
      case RowSense::Equal:
        r.primal = std::max(r.primal, std::abs(slack));
        break;
    }
    r.complementarity = std::max(r.complementarity, std::abs(y * slack));
    dual_obj += y * rows[i].rhs;
  }
  for (std::size_t j = 0; j < n; ++j) {
    double d = gradient[j] * dir;
    for (std::size_t i = 0; i < rows.size(); ++i) d -= rows[i].coeffs[j] * s.dual[i] * dir;
    const double lo = cons.lower(j);
    const double hi = cons.upper(j);
    r.primal = std::max(r.primal, std::max(lo - x[j], x[j] - hi));
    if (d > 0.0) {
      if (std::isfinite(lo)) {
        dual_obj += d * lo;
        r.complementarity = std::max(r.complementarity, std::abs(d * (x[j] - lo)));
      } else {
        r.dual = std::max(r.dual, d);
      }
    } else if (d < 0.0) {
      if (std::isfinite(hi)) {
        dual_obj += d * hi;
        r.complementarity = std::max(r.complementarity, std::abs(d * (x[j] - hi)));
      } else {
        r.dual = std::max(r.dual, -d);
      }
    }
  }
  double primal_obj = 0.0;
  for (std::size_t j = 0; j < n; ++j) primal_obj += cons.objective()[j] * x[j];
  r.duality_gap = std::abs(primal_obj * dir - dual_obj);
  return r;
}

}  // namespace detail

/// Primal feasibility, dual sign feasibility, complementary slackness and the
/// duality gap of an Optimal LP outcome.
inline KktResiduals kkt_residuals(const LinearProgram& lp, const SolveOutcome& s) {
  return detail::kkt_residuals(lp, s, lp.objective(), lp.sense() == Sense::Maximize);
}

/// KKT residuals for a QP outcome; the duality gap entry is not meaningful
/// for a quadratic objective and is reported as zero.
inline KktResiduals kkt_residuals(const QuadraticProgram& qp, const SolveOutcome& s) {
  const auto n = static_cast<Eigen::Index>(qp.constraints.variables());
  Eigen::Map<const Eigen::VectorXd> x(s.primal.data(), n);
  Eigen::Map<const Eigen::VectorXd> c(qp.constraints.objective().data(), n);
  const Eigen::VectorXd g = 2.0 * qp.psd_matrix * x + c;
  std::vector<double> grad(g.data(), g.data() + g.size());
  KktResiduals r = detail::kkt_residuals(qp.constraints, s, grad, false);
  r.duality_gap = 0.0;
  return r;
}

namespace detail {

struct LemkeResult {
  bool solved = false;
  Eigen::VectorXd w;
  Eigen::VectorXd z;
  std::size_t iterations = 0;
};

// Finds w = Mz + q, w, z >= 0, w'z = 0 for copositive-plus M.
inline LemkeResult lemke(const Eigen::MatrixXd& mat, const Eigen::VectorXd& q) {
  using Eigen::Index;
  const Index n = q.size();
  LemkeResult res;
  res.w = q;
  res.z = Eigen::VectorXd::Zero(n);
  if (n == 0 || q.minCoeff() >= 0.0) {
    res.solved = true;
    return res;
  }
  // Columns: w (0..n-1), z (n..2n-1), z0 (2n), rhs (2n+1).
  const Index z0 = 2 * n;
  const Index rc = 2 * n + 1;
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, 2 * n + 2);
  t.leftCols(n).setIdentity();
  t.middleCols(n, n) = -mat;
  t.col(z0).setConstant(-1.0);
  t.col(rc) = q;
  std::vector<Index> basis(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) basis[static_cast<std::size_t>(i)] = i;
  const std::size_t cap = iteration_cap(static_cast<std::size_t>(n), static_cast<std::size_t>(2 * n + 1));

  auto pivot = [&](Index row, Index col) {
    t.row(row) /= t(row, col);
    for (Index i = 0; i < n; ++i) {
      if (i == row) continue;
      const double f = t(i, col);
      if (f != 0.0) t.row(i) -= f * t.row(row);
    }
    t(row, col) = 1.0;
    basis[static_cast<std::size_t>(row)] = col;
    if (++res.iterations > cap) {
      throw Error(ErrorCode::NumericalBreakdown, "Lemke iteration limit exceeded");
    }
  };

  // First pivot: z0 replaces the most negative q (largest index on ties keeps
  // the tableau lexicographically positive).
  Index row = 0;
  for (Index i = 1; i < n; ++i) {
    if (q[i] <= q[row]) row = i;
  }
  Index leaving = basis[static_cast<std::size_t>(row)];
  pivot(row, z0);

  for (;;) {
    const Index enter = leaving < n ? leaving + n : leaving - n;
    // Lexicographic minimum ratio over (rhs, B^-1 row) / pivot entry.
    Index best = -1;
    for (Index i = 0; i < n; ++i) {
      const double a = t(i, enter);
      if (a <= kPivotTol) continue;
      if (best < 0) {
        best = i;
        continue;
      }
      const double ab = t(best, enter);
      const double ri = t(i, rc) / a;
      const double rb = t(best, rc) / ab;
      const double tie = 1e-11 * std::max(1.0, std::abs(rb));
      if (ri < rb - tie) {
        best = i;
      } else if (ri <= rb + tie) {
        if (basis[static_cast<std::size_t>(i)] == z0) {
          best = i;
        } else if (basis[static_cast<std::size_t>(best)] != z0) {
          for (Index k = 0; k < n; ++k) {
            const double vi = t(i, k) / a;
            const double vb = t(best, k) / ab;
            if (std::abs(vi - vb) <= 1e-12) continue;
            if (vi < vb) best = i;
            break;
          }
        }
      }
    }
    if (best < 0) {
      // Ray with z0 already at zero: the almost-complementary basis solves
      // the LCP.
      Index z0_row = -1;
      for (Index i = 0; i < n; ++i) {
        if (basis[static_cast<std::size_t>(i)] == z0) z0_row = i;
      }
      const double scale = std::max(1.0, q.cwiseAbs().maxCoeff());
      if (z0_row < 0 || t(z0_row, rc) > 1e-10 * scale) {
        res.solved = false;
        return res;
      }
      Eigen::VectorXd all = Eigen::VectorXd::Zero(2 * n);
      for (Index i = 0; i < n; ++i) {
        const Index var = basis[static_cast<std::size_t>(i)];
        if (var < 2 * n) all[var] = std::max(t(i, rc), 0.0);
      }
      res.w = all.head(n);
      res.z = all.tail(n);
      res.solved = true;
      return res;
    }
    leaving = basis[static_cast<std::size_t>(best)];
    pivot(best, enter);
    if (leaving == z0) break;
  }

  // Re-solve the final complementary basis directly.
  Eigen::MatrixXd full(n, 2 * n);
  full.leftCols(n).setIdentity();
  full.rightCols(n) = -mat;
  Eigen::MatrixXd bm(n, n);
  for (Index k = 0; k < n; ++k) bm.col(k) = full.col(basis[static_cast<std::size_t>(k)]);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(bm);
  Eigen::VectorXd vals(n);
  if (lu.isInvertible()) {
    vals = lu.solve(q);
  } else {
    vals = t.col(rc);
  }
  Eigen::VectorXd all = Eigen::VectorXd::Zero(2 * n);
  for (Index k = 0; k < n; ++k) {
    all[basis[static_cast<std::size_t>(k)]] = std::max(vals[k], 0.0);
  }
  res.w = all.head(n);
  res.z = all.tail(n);
  res.solved = true;
  return res;
}

}  // namespace detail

inline void check_psd(const Eigen::MatrixXd& v) {
  if (v.rows() != v.cols()) throw Error(ErrorCode::ArityMismatch, "QP matrix must be square");
  if (v.size() == 0) return;
  if ((v - v.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
    throw Error(ErrorCode::NotPSD, "QP matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(v, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-9) {
    throw Error(ErrorCode::NotPSD, "QP matrix has a negative eigenvalue");
  }
}

inline SolveOutcome solve_qp(const QuadraticProgram& qp) {
  using Eigen::Index;
  const LinearProgram& cons = qp.constraints;
  const auto n_user = static_cast<Index>(cons.variables());
  if (qp.psd_matrix.rows() != n_user) {
    throw Error(ErrorCode::ArityMismatch, "QP matrix size differs from variable count");
  }
  check_psd(qp.psd_matrix);

  const detail::NonnegativeForm nf = detail::to_nonnegative(cons);
  const Index nx = nf.a.cols();

  // All rows as A'x' >= b'; equalities become two opposite rows.
  std::vector<std::pair<Index, double>> ge_rows;  // (form row, sign)
  for (Index i = 0; i < nf.a.rows(); ++i) {
    switch (nf.senses[static_cast<std::size_t>(i)]) {
      case RowSense::GreaterEqual: ge_rows.emplace_back(i, 1.0); break;
      case RowSense::LessEqual: ge_rows.emplace_back(i, -1.0); break;
      case RowSense::Equal:
        ge_rows.emplace_back(i, 1.0);
        ge_rows.emplace_back(i, -1.0);
        break;
    }
  }
  const auto k = static_cast<Index>(ge_rows.size());
  Eigen::MatrixXd a(k, nx);
  Eigen::VectorXd b(k);
  for (Index r = 0; r < k; ++r) {
    a.row(r) = ge_rows[static_cast<std::size_t>(r)].second * nf.a.row(ge_rows[static_cast<std::size_t>(r)].first);
    b[r] = ge_rows[static_cast<std::size_t>(r)].second * nf.b[ge_rows[static_cast<std::size_t>(r)].first];
  }
  Eigen::Map<const Eigen::VectorXd> c_user(cons.objective().data(), n_user);
  const Eigen::MatrixXd v = nf.transform.transpose() * qp.psd_matrix * nf.transform;
  const Eigen::VectorXd c =
      nf.transform.transpose() * (c_user + 2.0 * qp.psd_matrix * nf.offset);

  Eigen::MatrixXd mat = Eigen::MatrixXd::Zero(nx + k, nx + k);
  mat.topLeftCorner(nx, nx) = 2.0 * v;
  mat.topRightCorner(nx, k) = -a.transpose();
  mat.bottomLeftCorner(k, nx) = a;
  Eigen::VectorXd q(nx + k);
  q.head(nx) = c;
  q.tail(k) = -b;

  const detail::LemkeResult lr = detail::lemke(mat, q);
  SolveOutcome out;
  out.iterations = lr.iterations;
  if (!lr.solved) {
    LinearProgram feas = cons;
    feas.set_objective(std::vector<double>(static_cast<std::size_t>(n_user), 0.0));
    const SolveOutcome f = solve_lp(feas);
    out.status = f.status == Status::Infeasible ? Status::Infeasible : Status::Unbounded;
    out.certificate = f.certificate;
    return out;
  }
  const Eigen::VectorXd x = nf.offset + nf.transform * lr.z.head(nx);
  out.status = Status::Optimal;
  out.primal.assign(x.data(), x.data() + x.size());
  out.dual.assign(cons.rows().size(), 0.0);
  for (Index r = 0; r < k; ++r) {
    const auto [form_row, sign] = ge_rows[static_cast<std::size_t>(r)];
    const int o = nf.origin[static_cast<std::size_t>(form_row)];
    if (o >= 0) out.dual[static_cast<std::size_t>(o)] += sign * lr.z[nx + r];
  }
  out.objective_value = x.dot(qp.psd_matrix * x) + c_user.dot(x);
  const Eigen::VectorXd g = 2.0 * qp.psd_matrix * x + c_user;
  out.reduced_costs.assign(static_cast<std::size_t>(n_user), 0.0);
  for (Index j = 0; j < n_user; ++j) {
    double d = g[j];
    for (std::size_t i = 0; i < cons.rows().size(); ++i) {
      d -= cons.rows()[i].coeffs[static_cast<std::size_t>(j)] * out.dual[i];
    }
    out.reduced_costs[static_cast<std::size_t>(j)] = d;
  }
  return out;
}

}  // namespace p4p::convex
