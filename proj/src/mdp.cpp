#include "lateach/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <Eigen/SparseLU>

#include "lateach/errors.hpp"

namespace lateach {

namespace {

constexpr double kStochasticTol = 1e-12;

void check_features(const Matrix& features, int n_states, const char* name) {
  if (features.rows() != n_states) {
    throw InvalidArgument(std::string(name) + ": expected one row per state");
  }
  for (Eigen::Index i = 0; i < features.size(); ++i) {
    const double v = features.data()[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw InvalidArgument(std::string(name) + ": entries must lie in [0, 1]");
    }
  }
}

// Solves (I - gamma * M) x = b by sparse LU, falling back to fixed-point
// iteration when the factorization fails.
Vector solve_discounted(const Eigen::SparseMatrix<double>& m, double gamma, const Vector& b,
                        double tol) {
  const Eigen::Index n = b.size();
  Eigen::SparseMatrix<double> a(n, n);
  a.setIdentity();
  a -= gamma * m;
  a.makeCompressed();

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() == Eigen::Success) {
    Vector x = lu.solve(b);
    if (lu.info() == Eigen::Success && x.allFinite()) {
      return x;
    }
  }

  const int cap = static_cast<int>(
      std::ceil(10.0 * std::log(std::max(tol, 1e-300)) / std::log(gamma)));
  Vector x = b;
  double change = std::numeric_limits<double>::infinity();
  for (int it = 0; it < cap; ++it) {
    Vector next = b + gamma * (m * x);
    change = (next - x).lpNorm<Eigen::Infinity>();
    x = std::move(next);
    if (change <= tol) {
      return x;
    }
  }
  throw NumericalError("discounted linear solve did not reach tolerance, residual " +
                       std::to_string(change));
}

double log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& q) {
  const double m = q.maxCoeff();
  return m + std::log((q.array() - m).exp().sum());
}

}  // namespace

Mdp::Mdp(int n_states, int n_actions, const std::vector<std::vector<Successor>>& successors,
         Vector initial_dist, double discount, Vector reward_weights, Matrix reward_features,
         Matrix constraint_features)
    : n_states_(n_states),
      n_actions_(n_actions),
      initial_(std::move(initial_dist)),
      discount_(discount),
      reward_weights_(std::move(reward_weights)),
      reward_features_(std::move(reward_features)),
      constraint_features_(std::move(constraint_features)) {
  if (n_states <= 0 || n_actions <= 0) {
    throw InvalidArgument("Mdp: state and action counts must be positive");
  }
  if (!(discount > 0.0 && discount < 1.0)) {
    throw InvalidArgument("Mdp: discount must lie in (0, 1)");
  }
  const auto n_rows = static_cast<std::size_t>(n_states) * static_cast<std::size_t>(n_actions);
  if (successors.size() != n_rows) {
    throw InvalidArgument("Mdp: need one successor list per state-action pair");
  }

  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t row = 0; row < n_rows; ++row) {
    double total = 0.0;
    for (const Successor& succ : successors[row]) {
      if (succ.state < 0 || succ.state >= n_states) {
        throw InvalidArgument("Mdp: successor state out of range");
      }
      if (!(succ.prob >= 0.0 && succ.prob <= 1.0)) {
        throw InvalidArgument("Mdp: transition probabilities must lie in [0, 1]");
      }
      total += succ.prob;
      if (succ.prob > 0.0) {
        triplets.emplace_back(static_cast<int>(row), succ.state, succ.prob);
      }
    }
    if (std::abs(total - 1.0) > kStochasticTol) {
      throw InvalidArgument("Mdp: T(. | s, a) must sum to 1 (row " + std::to_string(row) + ")");
    }
  }
  transitions_.resize(static_cast<Eigen::Index>(n_rows), n_states);
  transitions_.setFromTriplets(triplets.begin(), triplets.end());
  transitions_.makeCompressed();

  if (initial_.size() != n_states || (initial_.array() < 0.0).any() ||
      std::abs(initial_.sum() - 1.0) > kStochasticTol) {
    throw InvalidArgument("Mdp: initial distribution must be a probability vector");
  }
  if (reward_weights_.size() != reward_features_.cols()) {
    throw InvalidArgument("Mdp: reward weight length must equal d_r");
  }
  if (!reward_weights_.allFinite() || reward_weights_.lpNorm<1>() > 1.0 + 1e-12) {
    throw InvalidArgument("Mdp: reward weights must satisfy ||w||_1 <= 1");
  }
  if (constraint_features_.size() == 0) {
    constraint_features_.resize(n_states, 0);
  }
  check_features(reward_features_, n_states, "reward_features");
  check_features(constraint_features_, n_states, "constraint_features");

  features_.resize(n_states, d_r() + d_c());
  features_ << reward_features_, constraint_features_;
}

Mdp Mdp::from_dense(const std::vector<std::vector<std::vector<double>>>& transition,
                    Vector initial_dist, double discount, Vector reward_weights,
                    Matrix reward_features, Matrix constraint_features) {
  const int n_states = static_cast<int>(transition.size());
  if (n_states == 0 || transition[0].size() != static_cast<std::size_t>(n_states) ||
      transition[0][0].empty()) {
    throw InvalidArgument("Mdp: transition tensor must be [S][S][A]");
  }
  const int n_actions = static_cast<int>(transition[0][0].size());
  std::vector<std::vector<Successor>> successors(static_cast<std::size_t>(n_states) *
                                                 n_actions);
  for (int next = 0; next < n_states; ++next) {
    if (transition[next].size() != static_cast<std::size_t>(n_states)) {
      throw InvalidArgument("Mdp: ragged transition tensor");
    }
    for (int s = 0; s < n_states; ++s) {
      if (transition[next][s].size() != static_cast<std::size_t>(n_actions)) {
        throw InvalidArgument("Mdp: ragged transition tensor");
      }
      for (int a = 0; a < n_actions; ++a) {
        const double p = transition[next][s][a];
        if (p != 0.0) {
          successors[static_cast<std::size_t>(s) * n_actions + a].push_back({next, p});
        }
      }
    }
  }
  return Mdp(n_states, n_actions, successors, std::move(initial_dist), discount,
             std::move(reward_weights), std::move(reward_features),
             std::move(constraint_features));
}

double Mdp::transition(int next, int state, int action) const {
  return transitions_.coeff(static_cast<Eigen::Index>(state) * n_actions_ + action, next);
}

namespace {

std::vector<std::vector<Successor>> successor_lists(const Mdp& mdp) {
  const auto& p = mdp.transitions();
  std::vector<std::vector<Successor>> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index row = 0; row < p.rows(); ++row) {
    for (Mdp::SparseRows::InnerIterator it(p, row); it; ++it) {
      out[static_cast<std::size_t>(row)].push_back({static_cast<int>(it.col()), it.value()});
    }
  }
  return out;
}

}  // namespace

Mdp Mdp::with_reward_weights(Vector weights) const {
  return Mdp(n_states_, n_actions_, successor_lists(*this), initial_, discount_,
             std::move(weights), reward_features_, constraint_features_);
}

Mdp Mdp::with_constraint_features(Matrix constraint_features) const {
  return Mdp(n_states_, n_actions_, successor_lists(*this), initial_, discount_,
             reward_weights_, reward_features_, std::move(constraint_features));
}

Vector FeatureExpectations::full() const {
  Vector out(mu_r.size() + mu_c.size());
  out << mu_r, mu_c;
  return out;
}

void validate_policy(const Mdp& mdp, const Policy& policy) {
  if (policy.probs.rows() != mdp.n_states() || policy.probs.cols() != mdp.n_actions()) {
    throw InvalidArgument("policy shape does not match the MDP");
  }
  for (int s = 0; s < mdp.n_states(); ++s) {
    const auto row = policy.probs.row(s);
    if ((row.array() < 0.0).any() || (row.array() > 1.0).any() || !row.allFinite() ||
        std::abs(row.sum() - 1.0) > kStochasticTol) {
      throw InvalidArgument("policy row " + std::to_string(s) + " is not a distribution");
    }
  }
}

Policy uniform_policy(const Mdp& mdp) {
  return {Matrix::Constant(mdp.n_states(), mdp.n_actions(), 1.0 / mdp.n_actions())};
}

Policy deterministic_policy(const Mdp& mdp, const std::vector<int>& actions) {
  if (actions.size() != static_cast<std::size_t>(mdp.n_states())) {
    throw InvalidArgument("deterministic_policy: need one action per state");
  }
  Policy pi{Matrix::Zero(mdp.n_states(), mdp.n_actions())};
  for (int s = 0; s < mdp.n_states(); ++s) {
    const int a = actions[static_cast<std::size_t>(s)];
    if (a < 0 || a >= mdp.n_actions()) throw InvalidArgument("deterministic_policy: action out of range");
    pi.probs(s, a) = 1.0;
  }
  return pi;
}

Eigen::SparseMatrix<double> policy_transition(const Mdp& mdp, const Policy& policy) {
  const int n_actions = mdp.n_actions();
  const auto& p = mdp.transitions();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(p.nonZeros()));
  for (int s = 0; s < mdp.n_states(); ++s) {
    for (int a = 0; a < n_actions; ++a) {
      const double w = policy.probs(s, a);
      if (w == 0.0) {
        continue;
      }
      for (Mdp::SparseRows::InnerIterator it(p, static_cast<Eigen::Index>(s) * n_actions + a);
           it; ++it) {
        triplets.emplace_back(s, static_cast<int>(it.col()), w * it.value());
      }
    }
  }
  Eigen::SparseMatrix<double> out(mdp.n_states(), mdp.n_states());
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

Vector state_visitation(const Mdp& mdp, const Policy& policy, double tol) {
  validate_policy(mdp, policy);
  const Eigen::SparseMatrix<double> pt = policy_transition(mdp, policy).transpose();
  return solve_discounted(pt, mdp.discount(), mdp.initial_dist(), tol);
}

Vector evaluate_policy(const Mdp& mdp, const Policy& policy, const Vector& state_reward,
                       double tol) {
  return solve_discounted(policy_transition(mdp, policy), mdp.discount(), state_reward, tol);
}

FeatureExpectations feature_expectations(const Mdp& mdp, const Policy& policy, double tol) {
  const Vector d = state_visitation(mdp, policy, tol);
  return {mdp.reward_features().transpose() * d, mdp.constraint_features().transpose() * d};
}

OccupancyVector occupancy_from_policy(const Mdp& mdp, const Policy& policy) {
  const Vector d = state_visitation(mdp, policy);
  Matrix z = (1.0 - mdp.discount()) * d.asDiagonal() * policy.probs;
  z = z.cwiseMax(0.0);
  return {z};
}

Policy policy_from_occupancy(const OccupancyVector& occupancy) {
  const Matrix& z = occupancy.z;
  Policy pi{Matrix(z.rows(), z.cols())};
  for (Eigen::Index s = 0; s < z.rows(); ++s) {
    const double mass = z.row(s).sum();
    if (mass > 0.0) {
      pi.probs.row(s) = z.row(s).cwiseMax(0.0) / z.row(s).cwiseMax(0.0).sum();
    } else {
      pi.probs.row(s).setConstant(1.0 / static_cast<double>(z.cols()));
    }
  }
  return pi;
}

FeatureExpectations mu_from_occupancy(const Mdp& mdp, const OccupancyVector& occupancy) {
  const Vector state_mass = occupancy.z.rowwise().sum() / (1.0 - mdp.discount());
  return {mdp.reward_features().transpose() * state_mass,
          mdp.constraint_features().transpose() * state_mass};
}

double flow_residual(const Mdp& mdp, const OccupancyVector& occupancy) {
  const Matrix& z = occupancy.z;
  // z flattened in (s * A + a) order.
  Vector flat(z.size());
  for (Eigen::Index s = 0; s < z.rows(); ++s) {
    flat.segment(s * z.cols(), z.cols()) = z.row(s).transpose();
  }
  const Vector inflow = mdp.transitions().transpose() * flat;
  const Vector outflow = z.rowwise().sum();
  const Vector residual =
      outflow - (1.0 - mdp.discount()) * mdp.initial_dist() - mdp.discount() * inflow;
  return residual.lpNorm<Eigen::Infinity>();
}

double reward_of(const Mdp& mdp, const Vector& mu_r) { return mdp.reward_weights().dot(mu_r); }

PlanningResult solve_mdp(const Mdp& mdp, const Vector& state_reward) {
  const int n_states = mdp.n_states();
  const int n_actions = mdp.n_actions();
  const double gamma = mdp.discount();
  constexpr double kTieTol = 1e-11;

  std::vector<int> actions(static_cast<std::size_t>(n_states), 0);
  Vector values;
  Vector q(static_cast<Eigen::Index>(n_states) * n_actions);

  auto compute_q = [&] { q = gamma * (mdp.transitions() * values); };
  auto is_tie = [](double a, double best) {
    return a >= best - kTieTol * (1.0 + std::abs(best));
  };

  const int max_rounds = 10 * n_states + 100;
  bool stable = false;
  for (int round = 0; round < max_rounds && !stable; ++round) {
    values = evaluate_policy(mdp, deterministic_policy(mdp, actions), state_reward);
    compute_q();
    stable = true;
    for (int s = 0; s < n_states; ++s) {
      const auto row = q.segment(static_cast<Eigen::Index>(s) * n_actions, n_actions);
      const double best = row.maxCoeff();
      const double current = row[actions[static_cast<std::size_t>(s)]];
      if (!is_tie(current, best)) {
        int a = 0;
        while (!is_tie(row[a], best)) {
          ++a;
        }
        actions[static_cast<std::size_t>(s)] = a;
        stable = false;
      }
    }
  }
  if (!stable) {
    throw ConvergenceError("policy iteration did not stabilize", 0.0);
  }

  // Canonical tie-breaking: lowest index among greedy actions.
  for (int s = 0; s < n_states; ++s) {
    const auto row = q.segment(static_cast<Eigen::Index>(s) * n_actions, n_actions);
    const double best = row.maxCoeff();
    int a = 0;
    while (!is_tie(row[a], best)) {
      ++a;
    }
    actions[static_cast<std::size_t>(s)] = a;
  }
  Policy policy = deterministic_policy(mdp, actions);
  values = evaluate_policy(mdp, policy, state_reward);
  return {std::move(policy), std::move(values), std::move(actions)};
}

Policy optimal_policy(const Mdp& mdp, double /*tol*/) {
  return solve_mdp(mdp, mdp.state_rewards()).policy;
}

SoftValueResult soft_value_iteration(const Mdp& mdp, const Vector& weights, double tol,
                                     int max_iters, const Vector* warm_start) {
  if (weights.size() != mdp.d()) {
    throw InvalidArgument("soft_value_iteration: weights must have length d_r + d_c");
  }
  if (!weights.allFinite()) {
    throw InvalidArgument("soft_value_iteration: weights must be finite");
  }
  const int n_states = mdp.n_states();
  const int n_actions = mdp.n_actions();
  const double gamma = mdp.discount();
  const Vector reward = mdp.features() * weights;

  SoftValueResult out;
  out.values = (warm_start != nullptr && warm_start->size() == n_states)
                   ? *warm_start
                   : Vector(Vector::Zero(n_states));
  out.q.resize(n_states, n_actions);
  out.policy.probs.resize(n_states, n_actions);

  Vector backup(n_states);
  Vector entropy(n_states);
  // One soft Bellman backup of out.values into backup, policy and entropy.
  auto sweep = [&] {
    const Vector future = gamma * (mdp.transitions() * out.values);
    for (int s = 0; s < n_states; ++s) {
      for (int a = 0; a < n_actions; ++a) {
        out.q(s, a) = reward[s] + future[static_cast<Eigen::Index>(s) * n_actions + a];
      }
      const double v = log_sum_exp(out.q.row(s));
      backup[s] = v;
      auto probs = out.policy.probs.row(s);
      probs = (out.q.row(s).array() - v).exp().matrix();
      const double mass = probs.sum();
      probs /= mass;
      entropy[s] = v - probs.dot(out.q.row(s));
    }
  };

  for (int it = 1; it <= max_iters; ++it) {
    sweep();
    out.residual = (backup - out.values).lpNorm<Eigen::Infinity>();
    out.iterations = it;
    if (out.residual <= tol) {
      out.values = backup;
      return out;
    }
    // Exact soft evaluation of the current softmax policy (Newton step).
    Vector evaluated = evaluate_policy(mdp, out.policy, reward + entropy);
    if (!evaluated.allFinite()) {
      evaluated = backup;
    }
    out.values = std::move(evaluated);
  }
  sweep();
  out.residual = (backup - out.values).lpNorm<Eigen::Infinity>();
  if (out.residual <= tol) {
    out.values = backup;
    return out;
  }
  throw ConvergenceError("soft value iteration did not converge", out.residual);
}

double causal_entropy(const Mdp& mdp, const Policy& policy) {
  validate_policy(mdp, policy);
  Vector h(mdp.n_states());
  for (int s = 0; s < mdp.n_states(); ++s) {
    double acc = 0.0;
    for (int a = 0; a < mdp.n_actions(); ++a) {
      const double p = policy.probs(s, a);
      if (p > 0.0) {
        acc -= p * std::log(p);
      }
    }
    h[s] = acc;
  }
  return state_visitation(mdp, policy).dot(h);
}

std::vector<Trajectory> sample_trajectories(const Mdp& mdp, const Policy& policy, int n,
                                            int horizon, std::uint64_t seed) {
  if (horizon < 1) {
    throw InvalidArgument("sample_trajectories: horizon must be >= 1");
  }
  if (n < 0) {
    throw InvalidArgument("sample_trajectories: n must be >= 0");
  }
  validate_policy(mdp, policy);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto& p = mdp.transitions();
  const int n_actions = mdp.n_actions();

  auto draw = [&](auto weight_at, int count) {
    const double u = unif(rng);
    double acc = 0.0;
    int last = 0;
    for (int i = 0; i < count; ++i) {
      const double w = weight_at(i);
      if (w <= 0.0) {
        continue;
      }
      acc += w;
      last = i;
      if (u < acc) {
        return i;
      }
    }
    return last;
  };

  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Trajectory traj;
    traj.reserve(static_cast<std::size_t>(horizon));
    int s = draw([&](int k) { return mdp.initial_dist()[k]; }, mdp.n_states());
    traj.push_back(s);
    for (int t = 1; t < horizon; ++t) {
      const int a = draw([&](int k) { return policy.probs(s, k); }, n_actions);
      const Eigen::Index row = static_cast<Eigen::Index>(s) * n_actions + a;
      const double u = unif(rng);
      double acc = 0.0;
      int next = -1;
      for (Mdp::SparseRows::InnerIterator it(p, row); it; ++it) {
        acc += it.value();
        next = static_cast<int>(it.col());
        if (u < acc) {
          break;
        }
      }
      s = next;
      traj.push_back(s);
    }
    out.push_back(std::move(traj));
  }
  return out;
}

FeatureExpectations empirical_feature_expectations(const std::vector<Trajectory>& trajectories,
                                                   const Mdp& mdp) {
  if (trajectories.empty()) {
    throw InvalidArgument("empirical_feature_expectations: empty trajectory list");
  }
  Vector state_weight = Vector::Zero(mdp.n_states());
  for (const Trajectory& traj : trajectories) {
    double discount = 1.0;
    for (int s : traj) {
      if (s < 0 || s >= mdp.n_states()) {
        throw InvalidArgument("empirical_feature_expectations: state out of range");
      }
      state_weight[s] += discount;
      discount *= mdp.discount();
    }
  }
  state_weight /= static_cast<double>(trajectories.size());
  return {mdp.reward_features().transpose() * state_weight,
          mdp.constraint_features().transpose() * state_weight};
}

nlohmann::json mdp_to_json(const Mdp& mdp) {
  using nlohmann::json;
  const int n = mdp.n_states();
  const int m = mdp.n_actions();
  std::vector<std::vector<std::vector<double>>> dense(
      static_cast<std::size_t>(n),
      std::vector<std::vector<double>>(static_cast<std::size_t>(n),
                                       std::vector<double>(static_cast<std::size_t>(m), 0.0)));
  const auto& p = mdp.transitions();
  for (Eigen::Index row = 0; row < p.rows(); ++row) {
    const auto s = static_cast<std::size_t>(row / m);
    const auto a = static_cast<std::size_t>(row % m);
    for (Mdp::SparseRows::InnerIterator it(p, row); it; ++it) {
      dense[static_cast<std::size_t>(it.col())][s][a] = it.value();
    }
  }
  auto rows_of = [](const Matrix& mat) {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(mat.rows()));
    for (Eigen::Index r = 0; r < mat.rows(); ++r) {
      out[static_cast<std::size_t>(r)].resize(static_cast<std::size_t>(mat.cols()));
      for (Eigen::Index c = 0; c < mat.cols(); ++c) {
        out[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = mat(r, c);
      }
    }
    return out;
  };
  auto vec_of = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };

  json j;
  j["n_states"] = n;
  j["n_actions"] = m;
  j["transition"] = dense;
  j["initial_dist"] = vec_of(mdp.initial_dist());
  j["discount"] = mdp.discount();
  j["reward_weights"] = vec_of(mdp.reward_weights());
  j["reward_features"] = rows_of(mdp.reward_features());
  j["constraint_features"] = rows_of(mdp.constraint_features());
  return j;
}

Mdp mdp_from_json(const nlohmann::json& j) {
  try {
    const int n = j.at("n_states").get<int>();
    const int m = j.at("n_actions").get<int>();
    auto dense = j.at("transition").get<std::vector<std::vector<std::vector<double>>>>();
    if (dense.size() != static_cast<std::size_t>(n)) {
      throw InvalidArgument("mdp json: transition tensor does not match n_states");
    }
    if (!dense.empty() && !dense[0].empty() && dense[0][0].size() != static_cast<std::size_t>(m)) {
      throw InvalidArgument("mdp json: transition tensor does not match n_actions");
    }
    auto to_vec = [](const std::vector<double>& v) {
      return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
    auto to_mat = [n](const std::vector<std::vector<double>>& rows) {
      if (rows.size() != static_cast<std::size_t>(n)) {
        throw InvalidArgument("mdp json: feature matrix needs one row per state");
      }
      const std::size_t cols = rows.empty() ? 0 : rows[0].size();
      Matrix mat(n, static_cast<Eigen::Index>(cols));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != cols) {
          throw InvalidArgument("mdp json: ragged feature matrix");
        }
        for (std::size_t c = 0; c < cols; ++c) {
          mat(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
      }
      return mat;
    };
    return Mdp::from_dense(dense, to_vec(j.at("initial_dist").get<std::vector<double>>()),
                           j.at("discount").get<double>(),
                           to_vec(j.at("reward_weights").get<std::vector<double>>()),
                           to_mat(j.at("reward_features").get<std::vector<std::vector<double>>>()),
                           to_mat(j.at("constraint_features")
                                      .get<std::vector<std::vector<double>>>()));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("mdp json: ") + e.what());
  }
}

}  // namespace lateach
