#include "lateach/learner.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lateach/errors.hpp"

namespace lateach {

DualVariables DualVariables::zeros(int d_r, int d_c) {
  return {Vector::Zero(d_r), Vector::Zero(d_r), Vector::Zero(d_c)};
}

Vector DualVariables::reward_weights() const {
  Vector w(alpha_low.size() + beta.size());
  w << alpha_low - alpha_up, -beta;
  return w;
}

namespace {

// Flat parameter vector: L1 -> [alpha_low, alpha_up, beta], L2 -> [w_r, beta].
class DualSpace {
 public:
  DualSpace(const Mdp& mdp, const SoftLearnerConfig& cfg) : cfg_(cfg) {
    d_r_ = mdp.d_r();
    d_c_ = mdp.d_c();
    delta_ = cfg.delta_hard_c.size() == 0 ? Vector(Vector::Zero(d_c_)) : cfg.delta_hard_c;
    if (delta_.size() != d_c_) {
      throw InvalidArgument("soft learner: delta_hard_c must have length d_c");
    }
  }

  Eigen::Index reward_block() const { return cfg_.penalty == MismatchPenalty::L1 ? 2 * d_r_ : d_r_; }
  Eigen::Index size() const { return reward_block() + d_c_; }
  const Vector& delta() const { return delta_; }

  Vector pack(const DualVariables& d) const {
    Vector theta(size());
    if (cfg_.penalty == MismatchPenalty::L1) {
      theta << d.alpha_low, d.alpha_up, d.beta;
    } else {
      theta << d.alpha_low - d.alpha_up, d.beta;
    }
    return project(theta);
  }

  DualVariables unpack(const Vector& theta) const {
    DualVariables d;
    if (cfg_.penalty == MismatchPenalty::L1) {
      d.alpha_low = theta.head(d_r_);
      d.alpha_up = theta.segment(d_r_, d_r_);
    } else {
      const Vector w = theta.head(d_r_);
      d.alpha_low = w.cwiseMax(0.0);
      d.alpha_up = (-w).cwiseMax(0.0);
    }
    d.beta = theta.tail(d_c_);
    return d;
  }

  Vector weights(const Vector& theta) const {
    Vector w(d_r_ + d_c_);
    if (cfg_.penalty == MismatchPenalty::L1) {
      w.head(d_r_) = theta.head(d_r_) - theta.segment(d_r_, d_r_);
    } else {
      w.head(d_r_) = theta.head(d_r_);
    }
    w.tail(d_c_) = -theta.tail(d_c_);
    return w;
  }

  /// Reward part of the dual objective, w_r . target.
  double linear_reward(const Vector& theta, const Vector& target) const {
    return weights(theta).head(d_r_).dot(target);
  }

  Vector gradient(const Vector& target, const FeatureExpectations& mu) const {
    Vector g(size());
    const Vector diff = target - mu.mu_r;
    if (cfg_.penalty == MismatchPenalty::L1) {
      g << diff, -diff, mu.mu_c - delta_;
    } else {
      g << diff, mu.mu_c - delta_;
    }
    return g;
  }

  Vector project(Vector theta) const {
    if (cfg_.penalty == MismatchPenalty::L1) {
      theta.head(2 * d_r_) = theta.head(2 * d_r_).cwiseMax(0.0).cwiseMin(cfg_.c_r);
    } else {
      const double n = theta.head(d_r_).norm();
      if (n > cfg_.c_r) theta.head(d_r_) *= cfg_.c_r / n;
    }
    theta.tail(d_c_) = theta.tail(d_c_).cwiseMax(0.0).cwiseMin(cfg_.c_c);
    return theta;
  }

 private:
  const SoftLearnerConfig& cfg_;
  Eigen::Index d_r_ = 0;
  Eigen::Index d_c_ = 0;
  Vector delta_;
};

struct Evaluation {
  SoftValueResult svi;
  FeatureExpectations mu;
  double objective = 0.0;
};

void check_config(const SoftLearnerConfig& c) {
  if (!(c.c_r >= 0.0) || !(c.c_c >= 0.0)) {
    throw InvalidArgument("soft learner: c_r and c_c must be non-negative");
  }
  if (!(c.step_size > 0.0) || c.max_iters < 0 || !(c.grad_tol > 0.0)) {
    throw InvalidArgument("soft learner: step_size, grad_tol must be positive");
  }
  if (c.delta_hard_c.size() > 0 && c.delta_hard_c.minCoeff() < 0.0) {
    throw InvalidArgument("soft learner: delta_hard_c must be non-negative");
  }
}

}  // namespace

double soft_learner_dual_objective(const Mdp& mdp, const Vector& target_mu_r,
                                   const SoftLearnerConfig& config, const DualVariables& duals) {
  DualSpace space(mdp, config);
  const Vector theta = space.pack(duals);
  const SoftValueResult svi = soft_value_iteration(mdp, space.weights(theta), config.svi_tol);
  const double beta_delta =
      space.delta().size() ? theta.tail(space.delta().size()).dot(space.delta()) : 0.0;
  return -mdp.initial_dist().dot(svi.values) + space.linear_reward(theta, target_mu_r) -
         beta_delta;
}

LearnerResponse soft_learner_respond(const Mdp& mdp, const Vector& target_mu_r,
                                     const SoftLearnerConfig& config, const DualVariables* init) {
  check_config(config);
  if (target_mu_r.size() != mdp.d_r() || !target_mu_r.allFinite()) {
    throw InvalidArgument("soft learner: target must be a finite vector of length d_r");
  }
  DualSpace space(mdp, config);
  const Eigen::Index d_c = mdp.d_c();

  auto evaluate = [&](const Vector& theta, const Vector* warm) {
    Evaluation e;
    e.svi = soft_value_iteration(mdp, space.weights(theta), config.svi_tol, 500, warm);
    e.mu = feature_expectations(mdp, e.svi.policy);
    const double beta_delta = d_c ? theta.tail(d_c).dot(space.delta()) : 0.0;
    e.objective = -mdp.initial_dist().dot(e.svi.values) +
                  space.linear_reward(theta, target_mu_r) - beta_delta;
    return e;
  };

  Vector theta = init ? space.pack(*init) : Vector(Vector::Zero(space.size()));
  Evaluation cur = evaluate(theta, nullptr);

  LearnerResponse out;
  out.dual_objective.push_back(cur.objective);
  double step = config.step_size;
  double pg_norm = 0.0;
  Vector prev_theta, prev_grad;
  int iter = 0;
  for (; iter < config.max_iters; ++iter) {
    const Vector grad = space.gradient(target_mu_r, cur.mu);
    pg_norm = (space.project(theta + grad) - theta).norm();
    if (pg_norm <= config.grad_tol) {
      out.converged = true;
      break;
    }
    if (config.spectral_steps && prev_theta.size() > 0) {
      // Barzilai-Borwein step for ascent: s = dtheta, y = -(dgrad).
      const Vector ds = theta - prev_theta;
      const Vector dy = prev_grad - grad;
      const double sy = ds.dot(dy);
      step = sy > 0.0 ? std::clamp(ds.squaredNorm() / sy, 1e-8, 1e4) : config.step_size;
    } else {
      step = std::min(config.step_size, 2.0 * step);
    }
    bool accepted = false;
    while (step > 1e-14) {
      const Vector trial = space.project(theta + step * grad);
      if ((trial - theta).lpNorm<Eigen::Infinity>() == 0.0) break;
      Evaluation next = evaluate(trial, &cur.svi.values);
      if (next.objective >= cur.objective) {
        prev_theta = theta;
        prev_grad = grad;
        theta = trial;
        cur = std::move(next);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no ascent possible at working precision
    out.dual_objective.push_back(cur.objective);
  }

  out.iterations = iter;
  out.residual = pg_norm;
  out.policy = std::move(cur.svi.policy);
  out.mu = std::move(cur.mu);
  out.duals = space.unpack(theta);
  return out;
}

Vector box_thresholds(const LinearConstraintSet& constraints, int d_c) {
  Vector delta = Vector::Constant(d_c, std::numeric_limits<double>::infinity());
  for (const auto& h : constraints.halfspaces()) {
    Eigen::Index j = -1;
    const bool unit = h.scope == Scope::Constraint && h.a.size() == d_c &&
                      (h.a.array() == 0.0).count() == d_c - 1 && h.a.maxCoeff(&j) == 1.0;
    if (!unit) {
      throw InvalidArgument("expected box constraints of the form mu_c[j] <= delta_j");
    }
    delta[j] = std::min(delta[j], h.b);
  }
  for (Eigen::Index j = 0; j < d_c; ++j) {
    if (!std::isfinite(delta[j])) {
      throw InvalidArgument("box constraints must bound every preference feature");
    }
  }
  return delta;
}

LearnerResponse hard_learner_respond(const Mdp& mdp, const Vector& target_mu_r,
                                     const HardLearnerConfig& config) {
  if (config.mode == HardMode::ExactFrankWolfe) {
    ProjectionResult p = project_l2(mdp, target_mu_r, config.constraints, config.projection_tol,
                                    config.max_iters);
    LearnerResponse out;
    out.policy = std::move(p.point.policy);
    out.mu = std::move(p.point.mu);
    out.iterations = p.iterations;
    out.residual = p.gap;
    out.converged = p.converged;
    return out;
  }
  SoftLearnerConfig soft;
  soft.c_r = config.soft_c_r;
  soft.c_c = std::numeric_limits<double>::infinity();
  soft.penalty = MismatchPenalty::L2;
  soft.delta_hard_c = mdp.d_c() > 0 ? box_thresholds(config.constraints, mdp.d_c()) : Vector();
  return soft_learner_respond(mdp, target_mu_r, soft);
}

}  // namespace lateach
