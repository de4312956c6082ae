#include "lateach/adaptive.hpp"

#include <cmath>
#include <iomanip>
#include <optional>
#include <ostream>
#include <random>

#include "lateach/errors.hpp"

namespace lateach {

std::string to_string(Strategy s) { return s == Strategy::Greedy ? "Greedy" : "Line"; }

void InteractionLog::write_csv(std::ostream& out, double reward_scale, bool header) const {
  if (header) out << "round,teacher_reward,learner_reward,distance,strategy,fallback_used\n";
  const auto old_flags = out.flags();
  const auto old_prec = out.precision();
  out << std::setprecision(12);
  for (const RoundRecord& r : rounds) {
    out << r.round << ',' << reward_scale * r.teacher_reward << ','
        << reward_scale * r.learner_reward << ',' << r.distance << ',' << to_string(strategy)
        << ',' << (r.fallback_used ? 1 : 0) << '\n';
  }
  out.flags(old_flags);
  out.precision(old_prec);
}

const RoundRecord& InteractionLog::at_round(int r) const {
  if (rounds.empty()) throw InvalidArgument("empty interaction log");
  if (r < 0) throw InvalidArgument("round index must be non-negative");
  return r < static_cast<int>(rounds.size()) ? rounds[static_cast<std::size_t>(r)] : rounds.back();
}

namespace {

void check_config(const InteractionConfig& c) {
  if (c.max_rounds < 1) throw InvalidArgument("max_rounds must be at least 1");
  if (!(c.epsilon_stop > 0.0) || !(c.epsilon_line_stop > 0.0)) {
    throw InvalidArgument("stopping thresholds must be positive");
  }
  if (!(c.eta_shift > 0.0 && c.eta_shift <= 1.0)) throw InvalidArgument("eta_shift must be in (0, 1]");
  if (!(c.alpha_min > 0.0)) throw InvalidArgument("alpha_min must be positive");
  if (c.alpha_max > 0.0 && !(c.alpha_max > c.alpha_min)) {
    throw InvalidArgument("alpha_max must exceed alpha_min");
  }
  if (!(c.epsilon_alpha > 0.0) || !(c.epsilon_mu > 0.0) || !(c.projection_tol > 0.0)) {
    throw InvalidArgument("line-search tolerances must be positive");
  }
}

RoundRecord make_record(const Mdp& mdp, int round, const Vector& mu_t, const Vector& mu_l) {
  RoundRecord r;
  r.round = round;
  r.mu_teacher = mu_t;
  r.mu_learner = mu_l;
  r.teacher_reward = reward_of(mdp, mu_t);
  r.learner_reward = reward_of(mdp, mu_l);
  r.distance = (mu_l - mu_t).norm();
  return r;
}

InteractionLog run_greedy(const Mdp& mdp, const LearnerFn& learner, const InteractionConfig& cfg) {
  InteractionLog log;
  log.strategy = Strategy::Greedy;
  HalfspaceEstimate est;
  TeachingSignal signal = teach_agnostic(mdp);
  for (int round = 0; round < cfg.max_rounds; ++round) {
    const LearnerResponse resp = learner(signal.mu_r);
    log.rounds.push_back(make_record(mdp, round, signal.mu_r, resp.mu.mu_r));
    if (log.rounds.back().distance <= cfg.epsilon_stop) {
      log.stopped_by_criterion = true;
      break;
    }
    if (round + 1 == cfg.max_rounds) break;
    est = greedy_update(est, signal.mu_r, resp.mu.mu_r, cfg.eta_shift);
    log.estimates.push_back(est);
    signal = greedy_next_signal(mdp, est);
  }
  return log;
}

InteractionLog run_line(const Mdp& mdp, const LearnerFn& learner, const InteractionConfig& cfg) {
  InteractionLog log;
  log.strategy = Strategy::Line;
  TeachingSignal signal = teach_agnostic(mdp);
  bool fallback = false;
  double alpha = 0.0;
  for (int round = 0; round < cfg.max_rounds; ++round) {
    const LearnerResponse resp = learner(signal.mu_r);
    RoundRecord rec = make_record(mdp, round, signal.mu_r, resp.mu.mu_r);
    rec.fallback_used = fallback;
    rec.alpha = alpha;
    log.rounds.push_back(std::move(rec));
    if (round > 0) {
      const auto& prev = log.rounds[log.rounds.size() - 2].mu_learner;
      if ((resp.mu.mu_r - prev).norm() <= cfg.epsilon_line_stop) {
        log.stopped_by_criterion = true;
        break;
      }
    }
    if (round + 1 == cfg.max_rounds) break;
    LineSearchResult ls = line_search_signal(mdp, resp.mu.mu_r, cfg);
    signal = std::move(ls.signal);
    fallback = ls.fallback_used;
    alpha = ls.alpha;
  }
  return log;
}

}  // namespace

InteractionLog interact(const Mdp& mdp, Strategy strategy, const LearnerFn& learner,
                        const InteractionConfig& cfg) {
  check_config(cfg);
  if (!learner) throw InvalidArgument("interact: learner callback is empty");
  return strategy == Strategy::Greedy ? run_greedy(mdp, learner, cfg) : run_line(mdp, learner, cfg);
}

HalfspaceEstimate greedy_update(const HalfspaceEstimate& est, const Vector& mu_t,
                                const Vector& mu_l, double eta) {
  if (mu_t.size() != mu_l.size()) throw InvalidArgument("greedy_update: size mismatch");
  const Vector normal = mu_t - mu_l;
  const Vector anchor = mu_l + (1.0 - eta) * normal;
  HalfspaceEstimate out = est;
  out.halfspaces.add(Halfspace{normal, normal.dot(anchor), Scope::Reward});
  return out;
}

TeachingSignal greedy_next_signal(const Mdp& mdp, const HalfspaceEstimate& est) {
  PolytopePoint p;
  try {
    p = max_linear(mdp, mdp.reward_weights(), est.halfspaces);
  } catch (const InfeasibleError& e) {
    throw InfeasibleError("halfspace estimate is empty after " +
                          std::to_string(est.halfspaces.size()) + " cuts: " + e.what());
  }
  return TeachingSignal{std::move(p.mu.mu_r), std::move(p.policy), TeacherKind::Adaptive};
}

double effective_alpha_max(const Mdp& mdp, const InteractionConfig& cfg) {
  if (cfg.alpha_max > 0.0) return cfg.alpha_max;
  const double wn = mdp.reward_weights().norm();
  if (!(wn > 0.0)) throw InvalidArgument("reward weights are zero");
  return 2.0 / ((1.0 - mdp.discount()) * wn);
}

LineSearchResult line_search_signal(const Mdp& mdp, const Vector& mu_l,
                                    const InteractionConfig& cfg) {
  check_config(cfg);
  if (mu_l.size() != mdp.d_r() || !mu_l.allFinite()) {
    throw InvalidArgument("line_search_signal: mu_L must be a finite vector of length d_r");
  }
  const Vector& w = mdp.reward_weights();
  LineSearchResult out;
  auto attempt = [&](double alpha) {
    ++out.evaluations;
    return project_l2(mdp, mu_l + alpha * w, {}, cfg.projection_tol);
  };

  double lo = cfg.alpha_min;
  double hi = effective_alpha_max(mdp, cfg);
  std::optional<ProjectionResult> best;
  while (hi - lo > cfg.epsilon_alpha) {
    const double mid = 0.5 * (lo + hi);
    ProjectionResult p = attempt(mid);
    if (p.distance > cfg.epsilon_mu) {
      hi = mid;
    } else {
      lo = mid;
      best = std::move(p);
    }
  }
  if (!best) {
    // lo never moved: the candidate is alpha_min, whose projection doubles as the fallback.
    best = attempt(cfg.alpha_min);
    out.fallback_used = best->distance > cfg.epsilon_mu;
  }
  out.alpha = lo;
  out.signal = TeachingSignal{std::move(best->point.mu.mu_r), std::move(best->point.policy),
                              TeacherKind::Adaptive};
  return out;
}

bool verify_theorem3_monotonicity(const InteractionLog& log, double tol) {
  for (std::size_t i = 1; i < log.rounds.size(); ++i) {
    if (log.rounds[i].fallback_used) continue;
    if (log.rounds[i].learner_reward < log.rounds[i - 1].learner_reward - tol) return false;
  }
  return true;
}

double estimate_diameter(const Mdp& mdp, int n_directions, std::uint64_t seed) {
  if (n_directions < 1) throw InvalidArgument("estimate_diameter: need at least one direction");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  double diam = 0.0;
  for (int k = 0; k < n_directions; ++k) {
    Vector u(mdp.d_r());
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = normal(rng);
    if (!(u.norm() > 0.0)) continue;
    u.normalize();
    const Vector a = max_linear(mdp, u).mu.mu_r;
    const Vector b = max_linear(mdp, -u).mu.mu_r;
    diam = std::max(diam, (a - b).norm());
  }
  return diam;
}

}  // namespace lateach
