#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lateach/learner.hpp"
#include "lateach/mdp.hpp"
#include "lateach/polytope.hpp"

namespace lateach {

enum class TeacherKind { Agn, Con, AwareCMDP, AwareBiLevel, Adaptive };

std::string to_string(TeacherKind kind);

/// Feature expectations the teacher demonstrates, with a witness policy.
struct TeachingSignal {
  Vector mu_r;
  Policy policy;
  TeacherKind source = TeacherKind::Agn;
};

/// Demonstrates the unconstrained optimal policy.
TeachingSignal teach_agnostic(const Mdp& mdp);

/// Best policy within the learner's constraints. Throws InfeasibleError.
TeachingSignal teach_aware_cmdp(const Mdp& mdp, const LinearConstraintSet& learner_constraints);

/// teach_aware_cmdp with the largest constraint set, whatever the learner.
TeachingSignal teach_conservative(const Mdp& mdp, const LinearConstraintSet& full_constraints);

/**
 * max <w*, mu_r> over the constrained polytope minus <w*, P(mu_r(pi*))>,
 * where P is the Euclidean projection onto that polytope.
 */
double teaching_value_gap(const Mdp& mdp, const LinearConstraintSet& learner_constraints,
                          double tol = 1e-7);

enum class BiLevelInit { Zeros, FromAgnostic };

struct BiLevelConfig {
  double c_r = 5.0;
  double c_c = 10.0;
  Vector delta_hard_c;  // empty means zeros
  double fd_step = 1e-3;
  int fw_iters = 30;
  double fw_tol = 1e-5;  // relative improvement below which Frank-Wolfe stops
  int line_evals = 30;
  /// Initial points to try; the best final objective wins.
  std::vector<BiLevelInit> inits{BiLevelInit::Zeros, BiLevelInit::FromAgnostic};
  /// Learner duals after agnostic teaching, used by FromAgnostic (computed when absent).
  std::optional<DualVariables> agnostic_duals;
  double svi_tol = 1e-10;
};

struct BiLevelRun {
  int step = 0;  // 1: mu_c <= delta, 2: beta = C_c and mu_c >= delta
  BiLevelInit init = BiLevelInit::Zeros;
  bool feasible = false;
  double objective = 0.0;  // <w*, mu_r(pi_lambda)>
  DualVariables lambda;
  std::vector<double> objective_trace;  // accepted iterates
  int iterations = 0;
  bool restoration_used = false;
};

struct BiLevelResult {
  TeachingSignal signal;
  DualVariables lambda;
  double objective = 0.0;
  std::vector<BiLevelRun> runs;
};

/**
 * Learner-aware teaching for the soft-constraint learner.
 *
 * Optimizes R(pi_lambda) over the learner's dual variables, in two
 * branches (beta free with mu_c <= delta, or beta = C_c with
 * mu_c >= delta), each from every configured initial point. Every branch
 * runs Frank-Wolfe with finite-difference gradients, a linearized
 * direction LP and a golden-section line search; the best feasible result
 * is demonstrated.
 */
BiLevelResult teach_aware_bilevel(const Mdp& mdp, const BiLevelConfig& cfg);

/// R(pi_lambda) and mu_c(pi_lambda) for the softmax policy of lambda.
struct LambdaEvaluation {
  double objective = 0.0;
  FeatureExpectations mu;
  Policy policy;
};

LambdaEvaluation evaluate_lambda(const Mdp& mdp, const DualVariables& lambda,
                                 double svi_tol = 1e-10);

/// Central finite-difference gradient of R(pi_lambda) in the flattened lambda.
Vector bilevel_objective_gradient(const Mdp& mdp, const DualVariables& lambda, double h,
                                  double svi_tol = 1e-10);

}  // namespace lateach
