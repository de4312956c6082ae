#include "lateach/lp.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "lateach/errors.hpp"

namespace lateach {

const char* to_string(LpStatus status) {
  switch (status) {
    case LpStatus::Optimal:
      return "Optimal";
    case LpStatus::Infeasible:
      return "Infeasible";
    case LpStatus::Unbounded:
      return "Unbounded";
  }
  return "?";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPivotTol = 1e-9;
constexpr double kMinPivot = 1e-11;
constexpr double kCostTol = 1e-10;
constexpr int kReinvertEvery = 50;

// x_j = offset_j + sum over (column, sign) of sign * y_column.
struct VarMap {
  double offset = 0.0;
  int pos = -1;  // column with coefficient +1
  int neg = -1;  // column with coefficient -1
};

// Standard form: maximize c^T y, A y = b, y >= 0, b >= 0.
struct StandardForm {
  Matrix a;
  Vector b;
  Vector c;
  std::vector<int> slack_row;  // row in which column j is a +1 slack, or -1
  int n_struct = 0;
  std::vector<VarMap> vars;
};

StandardForm to_standard_form(const LinearProgram& lp) {
  const Eigen::Index n = lp.n_vars();
  const Vector lower = lp.lower.size() == 0 ? Vector(Vector::Zero(n)) : lp.lower;
  const Vector upper = lp.upper.size() == 0 ? Vector(Vector::Constant(n, kInf)) : lp.upper;

  StandardForm sf;
  sf.vars.resize(static_cast<std::size_t>(n));
  int col = 0;
  std::vector<std::pair<int, double>> bound_rows;  // (column, width)
  for (Eigen::Index j = 0; j < n; ++j) {
    VarMap& vm = sf.vars[static_cast<std::size_t>(j)];
    const double lo = lower[j];
    const double hi = upper[j];
    if (lo > hi) {
      // Reported as infeasible by the caller through an impossible row.
      vm.offset = lo;
      vm.pos = col++;
      bound_rows.emplace_back(vm.pos, hi - lo);
    } else if (std::isfinite(lo)) {
      vm.offset = lo;
      vm.pos = col++;
      if (std::isfinite(hi)) {
        bound_rows.emplace_back(vm.pos, hi - lo);
      }
    } else if (std::isfinite(hi)) {
      vm.offset = hi;
      vm.neg = col++;
    } else {
      vm.pos = col++;
      vm.neg = col++;
    }
  }
  sf.n_struct = col;

  // Expansion matrix: x = offset + M y.
  Matrix expand = Matrix::Zero(n, col);
  Vector offset(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const VarMap& vm = sf.vars[static_cast<std::size_t>(j)];
    offset[j] = vm.offset;
    if (vm.pos >= 0) expand(j, vm.pos) = 1.0;
    if (vm.neg >= 0) expand(j, vm.neg) = -1.0;
  }

  const Eigen::Index m_eq = lp.a_eq.rows();
  const Eigen::Index m_ub = lp.a_ub.rows();
  const auto m_bound = static_cast<Eigen::Index>(bound_rows.size());
  const Eigen::Index m = m_eq + m_ub + m_bound;
  const Eigen::Index n_slack = m_ub + m_bound;
  const Eigen::Index n_total = col + n_slack;

  sf.a = Matrix::Zero(m, n_total);
  sf.b = Vector::Zero(m);
  sf.c = Vector::Zero(n_total);
  sf.c.head(col) = expand.transpose() * lp.objective;
  sf.slack_row.assign(static_cast<std::size_t>(n_total), -1);

  if (m_eq > 0) {
    sf.a.block(0, 0, m_eq, col) = lp.a_eq * expand;
    sf.b.head(m_eq) = lp.b_eq - lp.a_eq * offset;
  }
  if (m_ub > 0) {
    sf.a.block(m_eq, 0, m_ub, col) = lp.a_ub * expand;
    sf.b.segment(m_eq, m_ub) = lp.b_ub - lp.a_ub * offset;
  }
  for (Eigen::Index k = 0; k < m_bound; ++k) {
    const auto& [column, width] = bound_rows[static_cast<std::size_t>(k)];
    sf.a(m_eq + m_ub + k, column) = 1.0;
    sf.b[m_eq + m_ub + k] = width;
  }
  for (Eigen::Index k = 0; k < n_slack; ++k) {
    sf.a(m_eq + k, col + k) = 1.0;
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (sf.b[i] < 0.0) {
      sf.a.row(i) *= -1.0;
      sf.b[i] *= -1.0;
    }
  }
  for (Eigen::Index k = 0; k < n_slack; ++k) {
    const Eigen::Index row = m_eq + k;
    if (sf.a(row, col + k) > 0.0) {
      sf.slack_row[static_cast<std::size_t>(col + k)] = static_cast<int>(row);
    }
  }
  return sf;
}

class Tableau {
 public:
  // Columns [0, n_real) are real, [n_real, n_real + n_art) artificial.
  Tableau(const StandardForm& sf, int& pivots) : pivots_(pivots) {
    const Eigen::Index m = sf.a.rows();
    n_real_ = sf.a.cols();
    basis_.assign(static_cast<std::size_t>(m), -1);
    std::vector<bool> covered(static_cast<std::size_t>(m), false);
    for (Eigen::Index j = 0; j < n_real_; ++j) {
      const int row = sf.slack_row[static_cast<std::size_t>(j)];
      if (row >= 0 && !covered[static_cast<std::size_t>(row)]) {
        covered[static_cast<std::size_t>(row)] = true;
        basis_[static_cast<std::size_t>(row)] = static_cast<int>(j);
      }
    }
    n_art_ = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!covered[static_cast<std::size_t>(i)]) ++n_art_;
    }
    rhs_col_ = n_real_ + n_art_;
    t_ = Matrix::Zero(m, rhs_col_ + 1);
    t_.leftCols(n_real_) = sf.a;
    t_.col(rhs_col_) = sf.b;
    Eigen::Index art = n_real_;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!covered[static_cast<std::size_t>(i)]) {
        t_(i, art) = 1.0;
        basis_[static_cast<std::size_t>(i)] = static_cast<int>(art);
        art_rows_.push_back(i);
        ++art;
      }
    }
    original_ = t_;
    // The starting basis is an identity, so its columns in the current table hold B^-1.
    identity_cols_ = basis_;
  }

  Eigen::Index n_art() const { return n_art_; }
  Eigen::Index rows() const { return t_.rows(); }
  const std::vector<int>& basis() const { return basis_; }
  const Matrix& table() const { return t_; }
  Eigen::Index rhs_col() const { return rhs_col_; }
  /// Row whose unit vector is artificial column n_real + k.
  Eigen::Index art_row(Eigen::Index k) const { return art_rows_[static_cast<std::size_t>(k)]; }

  // Reduced-cost row for cost vector `cost` over all columns.
  void set_cost(const Vector& cost) {
    cost_ = cost;
    d_ = Eigen::RowVectorXd::Zero(rhs_col_ + 1);
    d_.head(cost.size()) = cost.transpose();
    for (Eigen::Index i = 0; i < t_.rows(); ++i) {
      const double cb = cost[basis_[static_cast<std::size_t>(i)]];
      if (cb != 0.0) d_ -= cb * t_.row(i);
    }
  }

  double objective() const {
    double v = 0.0;
    for (Eigen::Index i = 0; i < t_.rows(); ++i) {
      v += cost_[basis_[static_cast<std::size_t>(i)]] * t_(i, rhs_col_);
    }
    return v;
  }

  enum class Outcome { Optimal, Unbounded };

  Outcome run(Eigen::Index n_enterable) {
    const int cap = 50 * static_cast<int>(t_.rows() + t_.cols()) + 1000;
    bool retried = false;
    for (int iter = 0; iter < cap; ++iter) {
      if (since_reinvert_ >= kReinvertEvery) reinvert();
      Eigen::Index enter = -1;
      double best = kCostTol;
      for (Eigen::Index j = 0; j < n_enterable; ++j) {
        if (d_[j] > best) {
          best = d_[j];
          enter = j;
        }
      }
      if (enter < 0) return Outcome::Optimal;

      const Eigen::Index leave = ratio_test(enter);
      if (leave < 0) {
        // Drift can hide a positive entry; confirm on a fresh factorization.
        if (!retried && since_reinvert_ > 0) {
          retried = true;
          reinvert();
          continue;
        }
        return Outcome::Unbounded;
      }
      retried = false;
      if (std::abs(t_(leave, enter)) < kMinPivot) {
        throw NumericalError("simplex pivot below 1e-11");
      }
      pivot(leave, enter);
    }
    throw NumericalError("simplex iteration cap reached");
  }

  // Minimum ratio with lexicographic tie-breaking on the rows of B^-1, which rules out cycling.
  Eigen::Index ratio_test(Eigen::Index enter) const {
    Eigen::Index leave = -1;
    double best_ratio = kInf;
    for (Eigen::Index i = 0; i < t_.rows(); ++i) {
      const double a = t_(i, enter);
      if (a <= kPivotTol) continue;
      const double ratio = std::max(t_(i, rhs_col_), 0.0) / a;
      const double eps = 1e-12 * (1.0 + std::abs(ratio));
      if (leave < 0 || ratio < best_ratio - eps) {
        leave = i;
        best_ratio = ratio;
      } else if (ratio <= best_ratio + eps && lex_less(i, leave, enter)) {
        leave = i;
        best_ratio = std::min(best_ratio, ratio);
      }
    }
    return leave;
  }

  bool lex_less(Eigen::Index i, Eigen::Index k, Eigen::Index enter) const {
    const double ai = t_(i, enter);
    const double ak = t_(k, enter);
    for (int col : identity_cols_) {
      const double vi = t_(i, col) / ai;
      const double vk = t_(k, col) / ak;
      if (std::abs(vi - vk) > 1e-12 * (1.0 + std::abs(vi) + std::abs(vk))) return vi < vk;
    }
    return basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(k)];
  }

  // Rebuilds the table as B^-1 [A | b] from the original data to shed accumulated error.
  void reinvert() {
    since_reinvert_ = 0;
    const Eigen::Index m = t_.rows();
    if (m == 0) return;
    Matrix b_mat(m, m);
    for (Eigen::Index i = 0; i < m; ++i) b_mat.col(i) = original_.col(basis_[static_cast<std::size_t>(i)]);
    Eigen::PartialPivLU<Matrix> lu(b_mat);
    Matrix fresh = lu.solve(original_);
    if (!fresh.allFinite()) return;
    double err = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      err = std::max(err, std::abs(fresh(i, basis_[static_cast<std::size_t>(i)]) - 1.0));
    }
    if (err > 1e-6) return;  // basis numerically singular: keep the updated table
    for (Eigen::Index i = 0; i < m; ++i) {
      const int bj = basis_[static_cast<std::size_t>(i)];
      fresh.col(bj).setZero();
      fresh(i, bj) = 1.0;
    }
    t_ = std::move(fresh);
    set_cost(cost_);
  }

  void pivot(Eigen::Index r, Eigen::Index c) {
    ++pivots_;
    ++since_reinvert_;
    t_.row(r) /= t_(r, c);
    const Vector column = t_.col(c);
    const Eigen::RowVectorXd prow = t_.row(r);
    for (Eigen::Index i = 0; i < t_.rows(); ++i) {
      if (i != r && column[i] != 0.0) t_.row(i).noalias() -= column[i] * prow;
    }
    t_.col(c).setZero();
    t_(r, c) = 1.0;
    const double dc = d_[c];
    if (dc != 0.0) d_.noalias() -= dc * prow;
    d_[c] = 0.0;
    basis_[static_cast<std::size_t>(r)] = static_cast<int>(c);
  }

  // Pivots basic artificials out where a real column allows it.
  void expel_artificials() {
    for (Eigen::Index i = 0; i < t_.rows(); ++i) {
      if (basis_[static_cast<std::size_t>(i)] < n_real_) continue;
      Eigen::Index best = -1;
      double best_abs = kPivotTol;
      for (Eigen::Index j = 0; j < n_real_; ++j) {
        const double a = std::abs(t_(i, j));
        if (a > best_abs) {
          best_abs = a;
          best = j;
        }
      }
      if (best >= 0) pivot(i, best);
    }
  }

 private:
  Matrix t_;
  Matrix original_;
  std::vector<int> identity_cols_;
  int since_reinvert_ = 0;
  Eigen::RowVectorXd d_;
  Vector cost_;
  std::vector<int> basis_;
  std::vector<Eigen::Index> art_rows_;
  Eigen::Index n_real_ = 0;
  Eigen::Index n_art_ = 0;
  Eigen::Index rhs_col_ = 0;
  int& pivots_;
};

double max_violation(const LinearProgram& lp, const Vector& x) {
  double worst = 0.0;
  if (lp.a_eq.rows() > 0) {
    worst = std::max(worst, (lp.a_eq * x - lp.b_eq).lpNorm<Eigen::Infinity>());
  }
  if (lp.a_ub.rows() > 0) {
    worst = std::max(worst, (lp.a_ub * x - lp.b_ub).maxCoeff());
  }
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double lo = lp.lower.size() == 0 ? 0.0 : lp.lower[j];
    const double hi = lp.upper.size() == 0 ? kInf : lp.upper[j];
    if (std::isfinite(lo)) worst = std::max(worst, lo - x[j]);
    if (std::isfinite(hi)) worst = std::max(worst, x[j] - hi);
  }
  return worst;
}

void check_shapes(const LinearProgram& lp) {
  const Eigen::Index n = lp.n_vars();
  auto fail = [](const char* what) { throw InvalidArgument(std::string("solve_lp: ") + what); };
  if (lp.a_eq.rows() != lp.b_eq.size() || (lp.a_eq.rows() > 0 && lp.a_eq.cols() != n)) {
    fail("equality block has inconsistent dimensions");
  }
  if (lp.a_ub.rows() != lp.b_ub.size() || (lp.a_ub.rows() > 0 && lp.a_ub.cols() != n)) {
    fail("inequality block has inconsistent dimensions");
  }
  if ((lp.lower.size() != 0 && lp.lower.size() != n) ||
      (lp.upper.size() != 0 && lp.upper.size() != n)) {
    fail("bound vectors must have one entry per variable");
  }
  if (!lp.b_eq.allFinite() || !lp.b_ub.allFinite() || !lp.objective.allFinite()) {
    fail("objective and right-hand sides must be finite");
  }
  for (Eigen::Index j = 0; j < lp.lower.size(); ++j) {
    if (lp.lower[j] == kInf) fail("lower bound of +inf");
  }
  for (Eigen::Index j = 0; j < lp.upper.size(); ++j) {
    if (lp.upper[j] == -kInf) fail("upper bound of -inf");
  }
}

}  // namespace

LpSolution solve_lp(const LinearProgram& lp) {
  check_shapes(lp);
  LpSolution out;
  const StandardForm sf = to_standard_form(lp);
  const Eigen::Index m = sf.a.rows();
  const Eigen::Index n_real = sf.a.cols();

  Tableau tab(sf, out.pivots);

  if (tab.n_art() > 0) {
    Vector phase1 = Vector::Zero(n_real + tab.n_art());
    phase1.tail(tab.n_art()).setConstant(-1.0);
    tab.set_cost(phase1);
    tab.run(n_real + tab.n_art());
    const double scale = 1.0 + sf.b.lpNorm<Eigen::Infinity>();
    if (tab.objective() < -1e-9 * scale) {
      out.status = LpStatus::Infeasible;
      return out;
    }
    tab.expel_artificials();
  }

  Vector cost = Vector::Zero(n_real + tab.n_art());
  cost.head(n_real) = sf.c;
  tab.set_cost(cost);
  if (tab.run(n_real) == Tableau::Outcome::Unbounded) {
    out.status = LpStatus::Unbounded;
    return out;
  }

  // Basic solution from the tableau, then re-solved from the original data.
  Vector y = Vector::Zero(n_real);
  const auto& basis = tab.basis();
  for (Eigen::Index i = 0; i < m; ++i) {
    const int j = basis[static_cast<std::size_t>(i)];
    if (j < n_real) y[j] = std::max(tab.table()(i, tab.rhs_col()), 0.0);
  }
  if (m > 0) {
    Matrix b_mat = Matrix::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const int j = basis[static_cast<std::size_t>(i)];
      if (j < n_real) {
        b_mat.col(i) = sf.a.col(j);
      } else {
        b_mat(tab.art_row(j - n_real), i) = 1.0;
      }
    }
    Eigen::PartialPivLU<Matrix> lu(b_mat);
    const Vector xb = lu.solve(sf.b);
    if (xb.allFinite() && (b_mat * xb - sf.b).lpNorm<Eigen::Infinity>() < 1e-9 &&
        xb.minCoeff() > -1e-9) {
      Vector refined = Vector::Zero(n_real);
      for (Eigen::Index i = 0; i < m; ++i) {
        const int j = basis[static_cast<std::size_t>(i)];
        if (j < n_real) refined[j] = std::max(xb[i], 0.0);
      }
      y = std::move(refined);
    }
  }

  out.x.resize(lp.n_vars());
  for (Eigen::Index j = 0; j < lp.n_vars(); ++j) {
    const VarMap& vm = sf.vars[static_cast<std::size_t>(j)];
    double v = vm.offset;
    if (vm.pos >= 0) v += y[vm.pos];
    if (vm.neg >= 0) v -= y[vm.neg];
    out.x[j] = v;
  }
  const double violation = max_violation(lp, out.x);
  if (violation > kLpFeasibilityTol) {
    throw NumericalError("solve_lp: solution violates constraints by " +
                         std::to_string(violation));
  }
  out.status = LpStatus::Optimal;
  out.objective_value = lp.objective.dot(out.x);
  return out;
}

}  // namespace lateach
