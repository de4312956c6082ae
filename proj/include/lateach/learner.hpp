#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "lateach/mdp.hpp"
#include "lateach/polytope.hpp"

namespace lateach {

/// How the reward-mismatch slack is penalized.
enum class MismatchPenalty {
  L1,  // C_r * ||delta_r||_1: duals alpha_low, alpha_up in [0, C_r]
  L2,  // C_r * ||delta_r||_2: reward dual in the L2 ball of radius C_r
};

struct SoftLearnerConfig {
  double c_r = 5.0;
  /// Penalty on preference violations; +infinity turns them into hard constraints.
  double c_c = 10.0;
  Vector delta_hard_c;  // length d_c; empty means all zeros
  MismatchPenalty penalty = MismatchPenalty::L1;
  double step_size = 0.1;
  /// Barzilai-Borwein trial steps instead of min(step_size, 2 * previous).
  bool spectral_steps = true;
  int max_iters = 3000;
  double grad_tol = 1e-3;
  double svi_tol = 1e-10;
};

/// lambda = (alpha_low, alpha_up, beta); the learner's reward is [alpha_low - alpha_up, -beta].
struct DualVariables {
  Vector alpha_low;
  Vector alpha_up;
  Vector beta;

  static DualVariables zeros(int d_r, int d_c);
  Vector reward_weights() const;
};

enum class HardMode { ExactFrankWolfe, SoftApprox };

struct HardLearnerConfig {
  LinearConstraintSet constraints;
  double projection_tol = 1e-6;
  int max_iters = 2000;
  HardMode mode = HardMode::ExactFrankWolfe;
  double soft_c_r = 20.0;  // used by SoftApprox
};

struct LearnerResponse {
  Policy policy;
  FeatureExpectations mu;
  std::optional<DualVariables> duals;
  int iterations = 0;
  double residual = 0.0;  // projected-gradient norm or Frank-Wolfe gap
  bool converged = false;
  std::vector<double> dual_objective;  // accepted iterates only (soft learner)
};

/**
 * Soft-constraint maximum-causal-entropy learner, solved in the dual.
 *
 * Projected gradient ascent on
 *   g(lambda) = -P0 . V_lambda + (alpha_low - alpha_up) . target - beta . delta
 * where V_lambda is the soft value for reward w_lambda. Each step starts at
 * a Barzilai-Borwein estimate (or min(step_size, 2 * previous step)) and is
 * halved until g does not decrease. Stops when
 * ||P(lambda + grad) - lambda|| <= grad_tol.
 */
LearnerResponse soft_learner_respond(const Mdp& mdp, const Vector& target_mu_r,
                                     const SoftLearnerConfig& config,
                                     const DualVariables* init = nullptr);

/// Dual objective g(lambda) for the given target, as maximized above.
double soft_learner_dual_objective(const Mdp& mdp, const Vector& target_mu_r,
                                   const SoftLearnerConfig& config, const DualVariables& duals);

/**
 * Hard-constraint learner: the policy whose mu_r is closest in L2 to the
 * target among policies meeting the constraints. SoftApprox runs the soft
 * learner with an L2 mismatch penalty (weight soft_c_r) and hard preference
 * constraints instead of projecting exactly; it needs box constraints on mu_c.
 */
LearnerResponse hard_learner_respond(const Mdp& mdp, const Vector& target_mu_r,
                                     const HardLearnerConfig& config);

/// Extracts per-coordinate thresholds from a set of mu_c[j] <= delta_j halfspaces.
Vector box_thresholds(const LinearConstraintSet& constraints, int d_c);

}  // namespace lateach
