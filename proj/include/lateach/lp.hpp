#pragma once

#include "lateach/mdp.hpp"

namespace lateach {

/**
 * Dense linear program
 *
 *   maximize    c^T x
 *   subject to  A_eq x  = b_eq
 *               A_ub x <= b_ub
 *               lower <= x <= upper
 *
 * Empty `lower` / `upper` default to 0 and +inf. Infinite bounds are
 * written with std::numeric_limits<double>::infinity().
 */
struct LinearProgram {
  Vector objective;
  Matrix a_eq;
  Vector b_eq;
  Matrix a_ub;
  Vector b_ub;
  Vector lower;
  Vector upper;

  Eigen::Index n_vars() const { return objective.size(); }
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

const char* to_string(LpStatus status);

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  Vector x;                       // set when Optimal
  double objective_value = 0.0;   // set when Optimal
  int pivots = 0;
};

/// Absolute feasibility tolerance guaranteed for Optimal solutions.
inline constexpr double kLpFeasibilityTol = 1e-7;

/**
 * Two-phase primal simplex on a dense tableau.
 *
 * Entering columns are chosen by the largest reduced cost; ratio-test ties
 * are broken lexicographically on the rows of the basis inverse, which
 * rules out cycling on degenerate problems. The table is rebuilt from the
 * original data every 50 pivots, and the final basis is re-solved against
 * it to remove accumulated round-off. Infeasible and unbounded problems
 * are reported through the status; a solution that fails the feasibility
 * check after refinement raises NumericalError. Deterministic.
 */
LpSolution solve_lp(const LinearProgram& lp);

}  // namespace lateach
