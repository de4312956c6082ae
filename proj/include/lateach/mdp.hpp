#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "json.hpp"

namespace lateach {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// One nonzero entry of T(. | s, a).
struct Successor {
  int state;
  double prob;
};

/**
 * Finite discounted MDP with state-based linear reward and preference features.
 *
 * Transitions are stored sparsely: row (s * n_actions + a) of the
 * transition matrix holds T(. | s, a). The reward of state s is
 * <reward_weights, reward_features.row(s)>; constraint features are the
 * learner's preference features (zero columns when d_c = 0).
 *
 * Construction validates every invariant (stochastic rows, initial
 * distribution, ||w||_1 <= 1, features in [0, 1]) and throws
 * InvalidArgument otherwise. Instances are immutable.
 */
class Mdp {
 public:
  using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  /// `successors[s * n_actions + a]` lists T(. | s, a).
  Mdp(int n_states, int n_actions,
      const std::vector<std::vector<Successor>>& successors,
      Vector initial_dist, double discount, Vector reward_weights,
      Matrix reward_features, Matrix constraint_features);

  /// Builds from a dense tensor indexed [s'][s][a].
  static Mdp from_dense(const std::vector<std::vector<std::vector<double>>>& transition,
                        Vector initial_dist, double discount, Vector reward_weights,
                        Matrix reward_features, Matrix constraint_features);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  int d_r() const { return static_cast<int>(reward_features_.cols()); }
  int d_c() const { return static_cast<int>(constraint_features_.cols()); }
  int d() const { return d_r() + d_c(); }
  double discount() const { return discount_; }

  const Vector& initial_dist() const { return initial_; }
  const Vector& reward_weights() const { return reward_weights_; }
  const Matrix& reward_features() const { return reward_features_; }
  const Matrix& constraint_features() const { return constraint_features_; }

  /// [phi_r | phi_c], one row per state.
  const Matrix& features() const { return features_; }

  /// (S*A) x S row-major matrix of transition probabilities.
  const SparseRows& transitions() const { return transitions_; }

  double transition(int next, int state, int action) const;

  /// R(s) = <w*, phi_r(s)>.
  Vector state_rewards() const { return reward_features_ * reward_weights_; }

  /// Same dynamics and features with a different reward weight vector.
  Mdp with_reward_weights(Vector weights) const;

  /// Same dynamics and reward features with replaced preference features.
  Mdp with_constraint_features(Matrix constraint_features) const;

 private:
  int n_states_;
  int n_actions_;
  SparseRows transitions_;
  Vector initial_;
  double discount_;
  Vector reward_weights_;
  Matrix reward_features_;
  Matrix constraint_features_;
  Matrix features_;
};

/// Stationary stochastic policy, probs(s, a) = pi(a | s).
struct Policy {
  Matrix probs;
};

/// Discounted feature counts, in units of discounted sums (entries in [0, 1/(1-gamma)]).
struct FeatureExpectations {
  Vector mu_r;
  Vector mu_c;

  /// Concatenation [mu_r, mu_c].
  Vector full() const;
};

/// Normalized discounted state-action frequencies: z >= 0, sum z = 1.
struct OccupancyVector {
  Matrix z;
};

/// Throws InvalidArgument unless `policy` is a stochastic S x A matrix.
void validate_policy(const Mdp& mdp, const Policy& policy);

/// Uniform policy pi(a | s) = 1 / |A|.
Policy uniform_policy(const Mdp& mdp);

/// Deterministic policy from one action per state.
Policy deterministic_policy(const Mdp& mdp, const std::vector<int>& actions);

/// S x S matrix P_pi(s, s') = sum_a pi(a | s) T(s' | s, a).
Eigen::SparseMatrix<double> policy_transition(const Mdp& mdp, const Policy& policy);

/// Discounted state visitation d(s) = sum_t gamma^t Pr(s_t = s); sums to 1/(1-gamma).
Vector state_visitation(const Mdp& mdp, const Policy& policy, double tol = 1e-10);

/// Exact value of a per-state reward under `policy`: V = (I - gamma P_pi)^-1 r.
Vector evaluate_policy(const Mdp& mdp, const Policy& policy, const Vector& state_reward,
                       double tol = 1e-10);

FeatureExpectations feature_expectations(const Mdp& mdp, const Policy& policy,
                                         double tol = 1e-10);

OccupancyVector occupancy_from_policy(const Mdp& mdp, const Policy& policy);

/// pi(a | s) = z(s, a) / sum_a' z(s, a'); uniform on states with no mass.
Policy policy_from_occupancy(const OccupancyVector& occupancy);

/// mu = z^T phi / (1 - gamma).
FeatureExpectations mu_from_occupancy(const Mdp& mdp, const OccupancyVector& occupancy);

/// Max over s' of the flow-conservation violation.
double flow_residual(const Mdp& mdp, const OccupancyVector& occupancy);

/// <w*, mu_r>.
double reward_of(const Mdp& mdp, const Vector& mu_r);

/// Optimal deterministic policy and its values for a per-state reward.
struct PlanningResult {
  Policy policy;
  Vector values;
  std::vector<int> actions;
};

/// Exact planning by policy iteration. Ties go to the lowest action index.
PlanningResult solve_mdp(const Mdp& mdp, const Vector& state_reward);

/// Deterministic policy maximizing <w*, mu_r(pi)>; ties broken by lowest action index.
Policy optimal_policy(const Mdp& mdp, double tol = 1e-10);

struct SoftValueResult {
  Policy policy;
  Vector values;   // V(s) = log sum_a exp Q(s, a)
  Matrix q;        // Q(s, a)
  int iterations = 0;
  double residual = 0.0;
};

/**
 * Soft (maximum causal entropy) value iteration for the state reward
 * <weights, phi(s)>, weights of length d_r + d_c.
 *
 * Solves Q = r + gamma T V, V = logsumexp_a Q with softmax policy
 * pi = exp(Q - V). Each sweep is followed by an exact soft policy
 * evaluation (soft policy iteration), so convergence is quadratic near
 * the fixed point. Stops once the Bellman residual is <= tol.
 * `warm_start` seeds V. Throws ConvergenceError after max_iters.
 */
SoftValueResult soft_value_iteration(const Mdp& mdp, const Vector& weights, double tol = 1e-10,
                                     int max_iters = 500,
                                     const Vector* warm_start = nullptr);

/// Discounted causal entropy sum_t gamma^t E[-log pi(a_t | s_t)].
double causal_entropy(const Mdp& mdp, const Policy& policy);

using Trajectory = std::vector<int>;

/// n state sequences of length `horizon`, deterministic in `seed`.
std::vector<Trajectory> sample_trajectories(const Mdp& mdp, const Policy& policy, int n,
                                            int horizon, std::uint64_t seed);

/// Average discounted feature sum over trajectories. Throws on an empty list.
FeatureExpectations empirical_feature_expectations(const std::vector<Trajectory>& trajectories,
                                                   const Mdp& mdp);

nlohmann::json mdp_to_json(const Mdp& mdp);
Mdp mdp_from_json(const nlohmann::json& j);

}  // namespace lateach
