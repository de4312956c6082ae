#pragma once

#include <vector>

#include "lateach/mdp.hpp"

namespace lateach {

/// Which block of mu a halfspace acts on.
enum class Scope { Reward, Constraint, Full };

/// <a, mu_scope> <= b, in mu (discounted-sum) units.
struct Halfspace {
  Vector a;
  double b = 0.0;
  Scope scope = Scope::Full;
};

class LinearConstraintSet {
 public:
  LinearConstraintSet() = default;
  explicit LinearConstraintSet(std::vector<Halfspace> halfspaces);

  /// mu_c[j] <= thresholds[j] for every j.
  static LinearConstraintSet box_upper(const Vector& thresholds);

  void add(Halfspace h);
  const std::vector<Halfspace>& halfspaces() const { return halfspaces_; }
  std::size_t size() const { return halfspaces_.size(); }
  bool empty() const { return halfspaces_.empty(); }

  /// Largest violation max(<a, mu> - b, 0) over all halfspaces.
  double max_violation(const FeatureExpectations& mu) const;

  /// Throws InvalidArgument when a halfspace does not fit the mdp's dimensions.
  void check_dimensions(const Mdp& mdp) const;

 private:
  std::vector<Halfspace> halfspaces_;
};

/// A member of the feature polytope with its occupancy and policy witnesses.
struct PolytopePoint {
  FeatureExpectations mu;
  OccupancyVector occupancy;
  Policy policy;
};

/**
 * Maximizes <direction, mu> over policies meeting `constraints`.
 *
 * A direction of length d_r acts on mu_r, one of length d on the full mu.
 * Uses the occupancy LP; without constraints exact policy iteration is used
 * instead. Throws InfeasibleError when no policy meets the constraints.
 */
PolytopePoint max_linear(const Mdp& mdp, const Vector& direction,
                         const LinearConstraintSet& constraints = {});

struct ProjectionResult {
  PolytopePoint point;
  double gap = 0.0;       // final Frank-Wolfe duality gap
  double distance = 0.0;  // ||mu_r - target||_2
  int iterations = 0;
  bool converged = false;
};

/**
 * Euclidean projection of `target` (mu_r space) onto the reward feature
 * polytope intersected with `constraints`.
 *
 * Wolfe's minimum-norm-point method: a fully corrective Frank-Wolfe variant
 * that keeps an active set of polytope vertices (each found by max_linear)
 * and re-solves for the best affine combination after every oracle call.
 * Stops when the duality gap drops to tol^2 (or to rounding level), which puts the iterate within
 * sqrt(2) * tol of the true projection. Returns the best iterate with
 * converged = false after max_iters.
 */
ProjectionResult project_l2(const Mdp& mdp, const Vector& target,
                            const LinearConstraintSet& constraints = {}, double tol = 1e-5,
                            int max_iters = 2000);

/// True when `point` lies within tol of the constrained reward polytope.
bool contains(const Mdp& mdp, const Vector& point, const LinearConstraintSet& constraints = {},
              double tol = 1e-5);

}  // namespace lateach
