#include "lateach/teachers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lateach/errors.hpp"
#include "lateach/lp.hpp"

namespace lateach {

std::string to_string(TeacherKind kind) {
  switch (kind) {
    case TeacherKind::Agn:
      return "Agn";
    case TeacherKind::Con:
      return "Con";
    case TeacherKind::AwareCMDP:
      return "AwareCMDP";
    case TeacherKind::AwareBiLevel:
      return "AwareBiLevel";
    case TeacherKind::Adaptive:
      return "Adaptive";
  }
  return "?";
}

TeachingSignal teach_agnostic(const Mdp& mdp) {
  PolytopePoint p = max_linear(mdp, mdp.reward_weights());
  return {std::move(p.mu.mu_r), std::move(p.policy), TeacherKind::Agn};
}

TeachingSignal teach_aware_cmdp(const Mdp& mdp, const LinearConstraintSet& learner_constraints) {
  PolytopePoint p = max_linear(mdp, mdp.reward_weights(), learner_constraints);
  return {std::move(p.mu.mu_r), std::move(p.policy), TeacherKind::AwareCMDP};
}

TeachingSignal teach_conservative(const Mdp& mdp, const LinearConstraintSet& full_constraints) {
  TeachingSignal s = teach_aware_cmdp(mdp, full_constraints);
  s.source = TeacherKind::Con;
  return s;
}

double teaching_value_gap(const Mdp& mdp, const LinearConstraintSet& learner_constraints,
                          double tol) {
  const TeachingSignal aware = teach_aware_cmdp(mdp, learner_constraints);
  const TeachingSignal agn = teach_agnostic(mdp);
  const ProjectionResult proj = project_l2(mdp, agn.mu_r, learner_constraints, tol);
  return reward_of(mdp, aware.mu_r) - reward_of(mdp, proj.point.mu.mu_r);
}

LambdaEvaluation evaluate_lambda(const Mdp& mdp, const DualVariables& lambda, double svi_tol) {
  SoftValueResult svi = soft_value_iteration(mdp, lambda.reward_weights(), svi_tol);
  LambdaEvaluation e;
  e.mu = feature_expectations(mdp, svi.policy);
  e.objective = reward_of(mdp, e.mu.mu_r);
  e.policy = std::move(svi.policy);
  return e;
}

namespace {

constexpr double kFeasTol = 1e-9;

Vector flatten(const DualVariables& d) {
  Vector x(d.alpha_low.size() * 2 + d.beta.size());
  x << d.alpha_low, d.alpha_up, d.beta;
  return x;
}

DualVariables unflatten(const Vector& x, Eigen::Index d_r, Eigen::Index d_c) {
  return {x.head(d_r), x.segment(d_r, d_r), x.tail(d_c)};
}

Vector weights_of(const Vector& x, Eigen::Index d_r, Eigen::Index d_c) {
  Vector w(d_r + d_c);
  w << x.head(d_r) - x.segment(d_r, d_r), -x.tail(d_c);
  return w;
}

struct Probe {
  double objective = 0.0;
  Vector mu_c;
  Vector values;  // soft values, reused as a warm start
};

class LambdaProblem {
 public:
  LambdaProblem(const Mdp& mdp, double svi_tol) : mdp_(mdp), svi_tol_(svi_tol) {}

  Probe at_weights(const Vector& w, const Vector* warm = nullptr) const {
    SoftValueResult svi = soft_value_iteration(mdp_, w, svi_tol_, 500, warm);
    const FeatureExpectations mu = feature_expectations(mdp_, svi.policy);
    return {reward_of(mdp_, mu.mu_r), mu.mu_c, std::move(svi.values)};
  }

  /// Gradient of R and Jacobian of mu_c in w, central differences on the listed coordinates.
  void differentiate(const Vector& w, double h, const std::vector<Eigen::Index>& coords,
                     const Vector* warm, Vector& grad_w, Matrix& jac_w) const {
    grad_w = Vector::Zero(w.size());
    jac_w = Matrix::Zero(mdp_.d_c(), w.size());
    for (Eigen::Index i : coords) {
      Vector plus = w, minus = w;
      plus[i] += h;
      minus[i] -= h;
      const Probe p = at_weights(plus, warm);
      const Probe m = at_weights(minus, warm);
      grad_w[i] = (p.objective - m.objective) / (2.0 * h);
      if (mdp_.d_c() > 0) jac_w.col(i) = (p.mu_c - m.mu_c) / (2.0 * h);
    }
  }

 private:
  const Mdp& mdp_;
  double svi_tol_;
};

// Chain rule from w = [alpha_low - alpha_up, -beta] back to lambda.
Vector to_lambda_gradient(const Vector& g_w, Eigen::Index d_r, Eigen::Index d_c) {
  Vector g(2 * d_r + d_c);
  g << g_w.head(d_r), -g_w.head(d_r), -g_w.tail(d_c);
  return g;
}

Matrix to_lambda_jacobian(const Matrix& j_w, Eigen::Index d_r, Eigen::Index d_c) {
  Matrix j(j_w.rows(), 2 * d_r + d_c);
  j << j_w.leftCols(d_r), -j_w.leftCols(d_r), -j_w.rightCols(d_c);
  return j;
}

struct Candidate {
  Vector x;
  Probe probe;
  double violation = 0.0;
};

// Feasible beats infeasible; among feasible, higher objective; otherwise lower violation.
bool better(const Candidate& a, const Candidate& b) {
  const bool fa = a.violation <= kFeasTol;
  const bool fb = b.violation <= kFeasTol;
  if (fa != fb) return fa;
  if (fa) return a.probe.objective > b.probe.objective;
  return a.violation < b.violation;
}

BiLevelRun run_branch(const Mdp& mdp, const BiLevelConfig& cfg, const Vector& delta, int step,
                      BiLevelInit init_kind, const DualVariables& init) {
  const Eigen::Index d_r = mdp.d_r();
  const Eigen::Index d_c = mdp.d_c();
  const Eigen::Index n = 2 * d_r + d_c;
  LambdaProblem problem(mdp, cfg.svi_tol);

  BiLevelRun run;
  run.step = step;
  run.init = init_kind;

  Vector lo = Vector::Zero(n);
  Vector hi(n);
  hi.head(2 * d_r).setConstant(cfg.c_r);
  hi.tail(d_c).setConstant(cfg.c_c);
  if (step == 2) lo.tail(d_c).setConstant(cfg.c_c);

  auto violation = [&](const Vector& mu_c) {
    if (d_c == 0) return 0.0;
    const Vector v = step == 1 ? Vector(mu_c - delta) : Vector(delta - mu_c);
    return std::max(v.maxCoeff(), 0.0);
  };
  auto make = [&](Vector x, const Vector* warm) {
    Candidate c;
    c.probe = problem.at_weights(weights_of(x, d_r, d_c), warm);
    c.violation = violation(c.probe.mu_c);
    c.x = std::move(x);
    return c;
  };

  Candidate cur = make(flatten(init).cwiseMax(lo).cwiseMin(hi), nullptr);
  if (cur.violation <= kFeasTol) run.objective_trace.push_back(cur.probe.objective);

  std::vector<Eigen::Index> coords;
  for (Eigen::Index i = 0; i < d_r; ++i) coords.push_back(i);
  if (step == 1) {
    for (Eigen::Index j = 0; j < d_c; ++j) coords.push_back(d_r + j);
  }

  const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
  int iter = 0;
  for (; iter < cfg.fw_iters; ++iter) {
    const Vector w = weights_of(cur.x, d_r, d_c);
    Vector g_w;
    Matrix j_w;
    problem.differentiate(w, cfg.fd_step, coords, &cur.probe.values, g_w, j_w);
    const Vector grad = to_lambda_gradient(g_w, d_r, d_c);
    const Matrix jac = to_lambda_jacobian(j_w, d_r, d_c);

    // Direction subproblem over the box with linearized preference constraints.
    LinearProgram lp;
    lp.objective = grad;
    lp.lower = lo;
    lp.upper = hi;
    if (d_c > 0) {
      // step 1: mu_c + J (s - x) <= delta; step 2: mu_c + J (s - x) >= delta
      const double sign = step == 1 ? 1.0 : -1.0;
      lp.a_ub = sign * jac;
      lp.b_ub = sign * (delta - cur.probe.mu_c + jac * cur.x);
    }
    LpSolution sol = solve_lp(lp);
    if (sol.status != LpStatus::Optimal) {
      // Feasibility restoration: minimize the total linearized violation.
      run.restoration_used = true;
      LinearProgram rest;
      rest.objective = Vector::Zero(n + d_c);
      rest.objective.tail(d_c).setConstant(-1.0);
      rest.lower = Vector::Zero(n + d_c);
      rest.lower.head(n) = lo;
      rest.upper = Vector::Constant(n + d_c, std::numeric_limits<double>::infinity());
      rest.upper.head(n) = hi;
      rest.a_ub = Matrix::Zero(d_c, n + d_c);
      rest.a_ub.leftCols(n) = lp.a_ub;
      rest.a_ub.rightCols(d_c) = -Matrix::Identity(d_c, d_c);
      rest.b_ub = lp.b_ub;
      sol = solve_lp(rest);
      if (sol.status != LpStatus::Optimal) break;
      sol.x = Vector(sol.x.head(n));
    }
    const Vector direction = sol.x - cur.x;
    if (direction.lpNorm<Eigen::Infinity>() <= 1e-12) break;

    // Golden-section search on t in [0, 1] for the merit R - M * violation.
    constexpr double kPenalty = 1e3;
    auto merit = [&](const Candidate& c) { return c.probe.objective - kPenalty * c.violation; };
    Candidate best = cur;
    auto consider = [&](double t) {
      Candidate c = make(cur.x + t * direction, &cur.probe.values);
      const double m = merit(c);
      if (better(c, best)) best = c;
      return m;
    };
    double a = 0.0, b = 1.0;
    double t1 = b - golden * (b - a), t2 = a + golden * (b - a);
    double m1 = consider(t1), m2 = consider(t2);
    for (int k = 2; k < cfg.line_evals; ++k) {
      if (m1 >= m2) {
        b = t2;
        t2 = t1;
        m2 = m1;
        t1 = b - golden * (b - a);
        m1 = consider(t1);
      } else {
        a = t1;
        t1 = t2;
        m1 = m2;
        t2 = a + golden * (b - a);
        m2 = consider(t2);
      }
    }
    // Backtrack toward the current iterate when the search found nothing better.
    if (!better(best, cur)) {
      for (double t = 0.5; t > 1e-4 && !better(best, cur); t *= 0.5) consider(t);
    }
    if (!better(best, cur)) break;

    const double before = cur.probe.objective;
    const bool was_feasible = cur.violation <= kFeasTol;
    cur = std::move(best);
    if (cur.violation <= kFeasTol) run.objective_trace.push_back(cur.probe.objective);
    if (was_feasible &&
        cur.probe.objective - before <= cfg.fw_tol * std::max(1.0, std::abs(before))) {
      ++iter;
      break;
    }
  }

  run.iterations = iter;
  run.feasible = cur.violation <= kFeasTol;
  run.objective = cur.probe.objective;
  run.lambda = unflatten(cur.x, d_r, d_c);
  return run;
}

}  // namespace

Vector bilevel_objective_gradient(const Mdp& mdp, const DualVariables& lambda, double h,
                                  double svi_tol) {
  if (!(h > 0.0)) throw InvalidArgument("finite-difference step must be positive");
  const Eigen::Index d_r = mdp.d_r();
  const Eigen::Index d_c = mdp.d_c();
  LambdaProblem problem(mdp, svi_tol);
  std::vector<Eigen::Index> coords;
  for (Eigen::Index i = 0; i < d_r + d_c; ++i) coords.push_back(i);
  Vector g_w;
  Matrix j_w;
  problem.differentiate(lambda.reward_weights(), h, coords, nullptr, g_w, j_w);
  return to_lambda_gradient(g_w, d_r, d_c);
}

BiLevelResult teach_aware_bilevel(const Mdp& mdp, const BiLevelConfig& cfg) {
  if (!(cfg.fd_step > 0.0)) throw InvalidArgument("fd_step must be positive");
  if (!(cfg.c_r >= 0.0) || !(cfg.c_c >= 0.0) || !std::isfinite(cfg.c_c)) {
    throw InvalidArgument("bilevel teacher: c_r, c_c must be finite and non-negative");
  }
  if (cfg.inits.empty()) throw InvalidArgument("bilevel teacher: no initial points");
  const Eigen::Index d_r = mdp.d_r();
  const Eigen::Index d_c = mdp.d_c();
  const Vector delta = cfg.delta_hard_c.size() == 0 ? Vector(Vector::Zero(d_c)) : cfg.delta_hard_c;
  if (delta.size() != d_c) throw InvalidArgument("delta_hard_c must have length d_c");

  std::optional<DualVariables> agn = cfg.agnostic_duals;
  auto init_for = [&](BiLevelInit kind) {
    if (kind == BiLevelInit::Zeros) return DualVariables::zeros(static_cast<int>(d_r), static_cast<int>(d_c));
    if (!agn) {
      SoftLearnerConfig lc;
      lc.c_r = cfg.c_r;
      lc.c_c = cfg.c_c;
      lc.delta_hard_c = delta;
      agn = soft_learner_respond(mdp, teach_agnostic(mdp).mu_r, lc).duals;
    }
    const Vector w = agn->alpha_low - agn->alpha_up;
    return DualVariables{w.cwiseMax(0.0), (-w).cwiseMax(0.0), Vector::Zero(d_c)};
  };

  // With delta_j = 0, every softmax policy reaches the same states as the uniform
  // policy, so mu_c[j] <= 0 is unattainable whenever the uniform policy has mu_c[j] > 0.
  bool step1_possible = true;
  if (d_c > 0) {
    const Vector mu_c = feature_expectations(mdp, uniform_policy(mdp)).mu_c;
    for (Eigen::Index j = 0; j < d_c; ++j) {
      if (delta[j] <= 0.0 && mu_c[j] > 0.0) step1_possible = false;
    }
  }

  BiLevelResult result;
  std::vector<int> steps;
  if (d_c == 0) {
    steps = {1};
  } else {
    if (step1_possible) steps.push_back(1);
    steps.push_back(2);
  }
  for (int step : steps) {
    for (BiLevelInit kind : cfg.inits) {
      result.runs.push_back(run_branch(mdp, cfg, delta, step, kind, init_for(kind)));
    }
  }
  if (d_c > 0 && !step1_possible) {
    BiLevelRun skipped;
    skipped.step = 1;
    skipped.feasible = false;
    skipped.lambda = DualVariables::zeros(static_cast<int>(d_r), static_cast<int>(d_c));
    result.runs.insert(result.runs.begin(), skipped);
  }

  const BiLevelRun* best = nullptr;
  for (const auto& r : result.runs) {
    if (r.feasible && (!best || r.objective > best->objective)) best = &r;
  }
  if (!best) throw InfeasibleError("bilevel teacher: no branch reached a feasible point");

  LambdaEvaluation e = evaluate_lambda(mdp, best->lambda, cfg.svi_tol);
  result.lambda = best->lambda;
  result.objective = best->objective;
  result.signal = {std::move(e.mu.mu_r), std::move(e.policy), TeacherKind::AwareBiLevel};
  return result;
}

}  // namespace lateach
