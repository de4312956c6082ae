#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "lateach/learner.hpp"
#include "lateach/polytope.hpp"
#include "lateach/teachers.hpp"

namespace lateach {

enum class Strategy { Greedy, Line };

std::string to_string(Strategy s);

struct InteractionConfig {
  int max_rounds = 50;
  double epsilon_stop = 0.05;
  /// Line stops once successive learner responses move by at most this much.
  double epsilon_line_stop = 1e-3;
  double eta_shift = 0.9;
  double alpha_min = 0.01;
  /// Upper end of the line-search segment; <= 0 selects 2 / ((1 - gamma) ||w*||_2).
  double alpha_max = 0.0;
  double epsilon_alpha = 1e-3;
  double epsilon_mu = 1e-3;
  double projection_tol = 1e-7;
};

/// Teacher's outer estimate of the learner's reachable mu_r set: the reward polytope
/// intersected with accumulated halfspaces in mu_r space.
struct HalfspaceEstimate {
  LinearConstraintSet halfspaces;
};

/// The learner as seen by the teacher: demonstrated mu_r in, response out.
using LearnerFn = std::function<LearnerResponse(const Vector& target_mu_r)>;

struct RoundRecord {
  int round = 0;
  Vector mu_teacher;
  Vector mu_learner;
  double teacher_reward = 0.0;  // <w*, mu_teacher>
  double learner_reward = 0.0;  // <w*, mu_learner>
  double distance = 0.0;        // ||mu_learner - mu_teacher||_2
  bool fallback_used = false;   // Line: the signal came from the alpha_min fallback
  double alpha = 0.0;           // Line: step that produced this round's signal
};

struct InteractionLog {
  Strategy strategy = Strategy::Greedy;
  std::vector<RoundRecord> rounds;
  /// Greedy: estimate after each round's cut (same length as rounds, minus the stopping round).
  std::vector<HalfspaceEstimate> estimates;
  bool stopped_by_criterion = false;

  /// Header: round,teacher_reward,learner_reward,distance,strategy,fallback_used.
  /// Rewards are multiplied by `reward_scale`.
  void write_csv(std::ostream& out, double reward_scale = 1.0, bool header = true) const;

  /// Record of round `r`, or the last one when the run ended earlier.
  const RoundRecord& at_round(int r) const;
};

/**
 * Repeated teaching with unknown learner constraints. Round 0 demonstrates
 * the unconstrained optimum. Greedy then cuts the estimate with a shifted
 * halfspace and re-plans until ||mu_L - mu_T|| <= epsilon_stop; Line
 * searches along mu_L + alpha w* until successive learner responses move
 * by at most epsilon_line_stop.
 */
InteractionLog interact(const Mdp& mdp, Strategy strategy, const LearnerFn& learner,
                        const InteractionConfig& cfg);

/// Adds <mu_T - mu_L, mu> <= <mu_T - mu_L, mu_L + (1 - eta)(mu_T - mu_L)>.
HalfspaceEstimate greedy_update(const HalfspaceEstimate& est, const Vector& mu_t,
                                const Vector& mu_l, double eta);

/// Best policy under the current estimate. Throws InfeasibleError if over-cut.
TeachingSignal greedy_next_signal(const Mdp& mdp, const HalfspaceEstimate& est);

struct LineSearchResult {
  TeachingSignal signal;
  double alpha = 0.0;
  bool fallback_used = false;
  int evaluations = 0;
};

/// alpha_max actually used for this mdp.
double effective_alpha_max(const Mdp& mdp, const InteractionConfig& cfg);

/**
 * Binary search for the largest alpha in [alpha_min, alpha_max] such that
 * mu_L + alpha w* is realizable (projection distance <= epsilon_mu). Falls
 * back to the projection of mu_L + alpha_min w* when no alpha qualifies.
 */
LineSearchResult line_search_signal(const Mdp& mdp, const Vector& mu_l,
                                    const InteractionConfig& cfg);

/// Learner reward never drops by more than tol after a round whose line search succeeded.
bool verify_theorem3_monotonicity(const InteractionLog& log, double tol);

/// Largest diameter of the reward polytope along `n_directions` random directions.
double estimate_diameter(const Mdp& mdp, int n_directions, std::uint64_t seed);

}  // namespace lateach
