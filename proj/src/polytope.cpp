#include "lateach/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/QR>

#include "lateach/errors.hpp"
#include "lateach/lp.hpp"

namespace lateach {

LinearConstraintSet::LinearConstraintSet(std::vector<Halfspace> halfspaces)
    : halfspaces_(std::move(halfspaces)) {
  for (const auto& h : halfspaces_) {
    if (!h.a.allFinite() || !std::isfinite(h.b)) {
      throw InvalidArgument("halfspace coefficients must be finite");
    }
  }
}

LinearConstraintSet LinearConstraintSet::box_upper(const Vector& thresholds) {
  LinearConstraintSet set;
  for (Eigen::Index j = 0; j < thresholds.size(); ++j) {
    Vector a = Vector::Zero(thresholds.size());
    a[j] = 1.0;
    set.add({std::move(a), thresholds[j], Scope::Constraint});
  }
  return set;
}

void LinearConstraintSet::add(Halfspace h) {
  if (!h.a.allFinite() || !std::isfinite(h.b)) {
    throw InvalidArgument("halfspace coefficients must be finite");
  }
  halfspaces_.push_back(std::move(h));
}

namespace {

const Vector& block_of(const FeatureExpectations& mu, Scope scope, Vector& scratch) {
  switch (scope) {
    case Scope::Reward:
      return mu.mu_r;
    case Scope::Constraint:
      return mu.mu_c;
    case Scope::Full:
      break;
  }
  scratch = mu.full();
  return scratch;
}

Eigen::Index scope_dim(const Mdp& mdp, Scope scope) {
  switch (scope) {
    case Scope::Reward:
      return mdp.d_r();
    case Scope::Constraint:
      return mdp.d_c();
    case Scope::Full:
      break;
  }
  return mdp.d();
}

// Per-state feature block a halfspace acts on.
Matrix features_of(const Mdp& mdp, Scope scope) {
  switch (scope) {
    case Scope::Reward:
      return mdp.reward_features();
    case Scope::Constraint:
      return mdp.constraint_features();
    case Scope::Full:
      break;
  }
  return mdp.features();
}

PolytopePoint point_from_policy(const Mdp& mdp, Policy policy) {
  PolytopePoint p;
  p.occupancy = occupancy_from_policy(mdp, policy);
  p.mu = mu_from_occupancy(mdp, p.occupancy);
  p.policy = std::move(policy);
  return p;
}

}  // namespace

double LinearConstraintSet::max_violation(const FeatureExpectations& mu) const {
  double worst = 0.0;
  Vector scratch;
  for (const auto& h : halfspaces_) {
    const Vector& x = block_of(mu, h.scope, scratch);
    worst = std::max(worst, h.a.dot(x) - h.b);
  }
  return worst;
}

void LinearConstraintSet::check_dimensions(const Mdp& mdp) const {
  for (const auto& h : halfspaces_) {
    if (h.a.size() != scope_dim(mdp, h.scope)) {
      throw InvalidArgument("halfspace dimension " + std::to_string(h.a.size()) +
                            " does not match its feature block (" +
                            std::to_string(scope_dim(mdp, h.scope)) + ")");
    }
  }
}

PolytopePoint max_linear(const Mdp& mdp, const Vector& direction,
                         const LinearConstraintSet& constraints) {
  constraints.check_dimensions(mdp);
  Vector state_score;
  if (direction.size() == mdp.d_r()) {
    state_score = mdp.reward_features() * direction;
  } else if (direction.size() == mdp.d()) {
    state_score = mdp.features() * direction;
  } else {
    throw InvalidArgument("max_linear: direction must have length d_r or d");
  }
  if (!direction.allFinite()) throw InvalidArgument("max_linear: direction must be finite");

  if (constraints.empty()) {
    return point_from_policy(mdp, solve_mdp(mdp, state_score).policy);
  }

  const int n_states = mdp.n_states();
  const int n_actions = mdp.n_actions();
  const double gamma = mdp.discount();
  const Eigen::Index n = static_cast<Eigen::Index>(n_states) * n_actions;

  LinearProgram lp;
  lp.objective.resize(n);
  for (int s = 0; s < n_states; ++s) {
    lp.objective.segment(static_cast<Eigen::Index>(s) * n_actions, n_actions)
        .setConstant(state_score[s]);
  }

  // Flow conservation: sum_a z(s', a) - gamma sum_{s,a} T(s'|s,a) z(s,a) = (1-gamma) P0(s').
  lp.a_eq = Matrix::Zero(n_states, n);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      const Eigen::Index col = static_cast<Eigen::Index>(s) * n_actions + a;
      lp.a_eq(s, col) += 1.0;
      for (Mdp::SparseRows::InnerIterator it(mdp.transitions(), col); it; ++it) {
        lp.a_eq(it.col(), col) -= gamma * it.value();
      }
    }
  }
  lp.b_eq = (1.0 - gamma) * mdp.initial_dist();

  const auto& hs = constraints.halfspaces();
  lp.a_ub.resize(static_cast<Eigen::Index>(hs.size()), n);
  lp.b_ub.resize(static_cast<Eigen::Index>(hs.size()));
  for (std::size_t k = 0; k < hs.size(); ++k) {
    const Vector per_state = features_of(mdp, hs[k].scope) * hs[k].a;
    for (int s = 0; s < n_states; ++s) {
      lp.a_ub.row(static_cast<Eigen::Index>(k))
          .segment(static_cast<Eigen::Index>(s) * n_actions, n_actions)
          .setConstant(per_state[s]);
    }
    lp.b_ub[static_cast<Eigen::Index>(k)] = (1.0 - gamma) * hs[k].b;
  }

  const LpSolution sol = solve_lp(lp);
  if (sol.status == LpStatus::Infeasible) {
    throw InfeasibleError("max_linear: constraint set admits no policy");
  }
  if (sol.status != LpStatus::Optimal) {
    throw NumericalError("max_linear: occupancy LP reported unbounded");
  }
  OccupancyVector z{Matrix(n_states, n_actions)};
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      z.z(s, a) = std::max(sol.x[static_cast<Eigen::Index>(s) * n_actions + a], 0.0);
    }
  }
  // Re-derive occupancy from the extracted policy so the three views agree exactly.
  return point_from_policy(mdp, policy_from_occupancy(z));
}

namespace {

struct Atom {
  Vector mu_r;
  OccupancyVector occupancy;
};

// Minimizes ||Y w|| subject to sum w = 1.
Vector affine_minimizer(const Matrix& y) {
  const Eigen::Index k = y.cols();
  Matrix kkt = Matrix::Zero(k + 1, k + 1);
  kkt.topLeftCorner(k, k) = y.transpose() * y;
  kkt.block(0, k, k, 1).setOnes();
  kkt.block(k, 0, 1, k).setOnes();
  Vector rhs = Vector::Zero(k + 1);
  rhs[k] = 1.0;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(kkt);
  return cod.solve(rhs).head(k);
}

ProjectionResult finish(const Mdp& mdp, const std::vector<Atom>& atoms, const Vector& weights,
                        const Vector& x, const Vector& target, double gap, int iterations,
                        bool converged) {
  ProjectionResult out;
  OccupancyVector z{Matrix::Zero(mdp.n_states(), mdp.n_actions())};
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    z.z += weights[static_cast<Eigen::Index>(i)] * atoms[i].occupancy.z;
  }
  out.point.policy = policy_from_occupancy(z);
  out.point.mu = mu_from_occupancy(mdp, z);
  out.point.mu.mu_r = x;
  out.point.occupancy = std::move(z);
  out.gap = gap;
  out.distance = (x - target).norm();
  out.iterations = iterations;
  out.converged = converged;
  return out;
}

}  // namespace

ProjectionResult project_l2(const Mdp& mdp, const Vector& target,
                            const LinearConstraintSet& constraints, double tol, int max_iters) {
  if (target.size() != mdp.d_r()) {
    throw InvalidArgument("project_l2: target must have length d_r");
  }
  if (!target.allFinite()) throw InvalidArgument("project_l2: target must be finite");
  if (!(tol > 0.0)) throw InvalidArgument("project_l2: tol must be positive");

  auto oracle = [&](const Vector& direction) {
    PolytopePoint p = max_linear(mdp, direction, constraints);
    return Atom{std::move(p.mu.mu_r), std::move(p.occupancy)};
  };

  std::vector<Atom> atoms;
  atoms.push_back(oracle(target));
  Vector weights = Vector::Ones(1);
  Vector x = atoms.front().mu_r;
  double gap = std::numeric_limits<double>::infinity();
  const double stop = tol * tol;
  const double drop_tol = 1e-12;

  auto current = [&] {
    Vector acc = Vector::Zero(x.size());
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      acc += weights[static_cast<Eigen::Index>(i)] * atoms[i].mu_r;
    }
    return acc;
  };
  auto prune = [&] {
    std::vector<Atom> kept;
    std::vector<double> w;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      if (weights[static_cast<Eigen::Index>(i)] > drop_tol) {
        kept.push_back(std::move(atoms[i]));
        w.push_back(weights[static_cast<Eigen::Index>(i)]);
      }
    }
    atoms = std::move(kept);
    weights = Eigen::Map<Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
    weights /= weights.sum();
  };

  for (int iter = 1; iter <= max_iters; ++iter) {
    Atom v = oracle(target - x);
    gap = (x - target).dot(x - v.mu_r);
    // Below this the gap is rounding noise from forming x.
    const double noise = 8.0 * std::numeric_limits<double>::epsilon() *
                         (x.norm() + target.norm() + 1.0) * (x - v.mu_r).norm();
    if (gap <= std::max(stop, noise)) {
      return finish(mdp, atoms, weights, x, target, std::max(gap, 0.0), iter, true);
    }
    const auto dup = std::find_if(atoms.begin(), atoms.end(), [&](const Atom& a) {
      return (a.mu_r - v.mu_r).lpNorm<Eigen::Infinity>() <= 1e-12;
    });
    if (dup != atoms.end()) {
      // Stalled on an active vertex: take a plain Frank-Wolfe step with exact line search.
      const auto idx = static_cast<Eigen::Index>(dup - atoms.begin());
      const Vector d = dup->mu_r - x;
      const double dd = d.squaredNorm();
      const double step = dd > 0.0 ? std::clamp((target - x).dot(d) / dd, 0.0, 1.0) : 0.0;
      if (step <= 1e-15) {
        return finish(mdp, atoms, weights, x, target, std::max(gap, 0.0), iter, false);
      }
      weights *= (1.0 - step);
      weights[idx] += step;
      prune();
      x = current();
      continue;
    }

    atoms.push_back(std::move(v));
    weights.conservativeResize(static_cast<Eigen::Index>(atoms.size()));
    weights[weights.size() - 1] = 0.0;

    // Minor cycles: move toward the affine minimizer until it is a convex combination.
    for (std::size_t minor = 0; minor <= atoms.size() + 1; ++minor) {
      Matrix y(x.size(), static_cast<Eigen::Index>(atoms.size()));
      for (std::size_t i = 0; i < atoms.size(); ++i) {
        y.col(static_cast<Eigen::Index>(i)) = atoms[i].mu_r - target;
      }
      const Vector alpha = affine_minimizer(y);
      if (!alpha.allFinite()) break;
      if (alpha.minCoeff() > drop_tol) {
        weights = alpha / alpha.sum();
        break;
      }
      double theta = 1.0;
      for (Eigen::Index i = 0; i < alpha.size(); ++i) {
        if (alpha[i] < weights[i]) {
          theta = std::min(theta, weights[i] / (weights[i] - alpha[i]));
        }
      }
      weights = (weights + theta * (alpha - weights)).cwiseMax(0.0);
      prune();
    }
    prune();
    x = current();
  }
  return finish(mdp, atoms, weights, x, target, std::max(gap, 0.0), max_iters, false);
}

bool contains(const Mdp& mdp, const Vector& point, const LinearConstraintSet& constraints,
              double tol) {
  if (point.size() != mdp.d_r() || !point.allFinite()) return false;
  const double hi = 1.0 / (1.0 - mdp.discount());
  if (point.minCoeff() < -tol || point.maxCoeff() > hi + tol) return false;
  const ProjectionResult p = project_l2(mdp, point, constraints, tol / 10.0);
  return p.distance <= tol;
}

}  // namespace lateach
