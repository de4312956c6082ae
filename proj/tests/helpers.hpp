#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "lateach/lp.hpp"
#include "lateach/mdp.hpp"
#include "lateach/objectworld.hpp"

namespace testing {

using lateach::Matrix;
using lateach::Mdp;
using lateach::Vector;

/// Random MDP with dense-ish transitions, a random start distribution and 0/1-ish features.
inline Mdp random_mdp(std::mt19937_64& rng, int n_states, int n_actions, int d_r, int d_c,
                      double gamma = 0.9) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::vector<lateach::Successor>> succ(static_cast<std::size_t>(n_states) * n_actions);
  for (auto& row : succ) {
    double total = 0.0;
    std::vector<double> p(static_cast<std::size_t>(n_states));
    for (int t = 0; t < n_states; ++t) {
      p[static_cast<std::size_t>(t)] = unif(rng) < 0.4 ? unif(rng) : 0.0;
      total += p[static_cast<std::size_t>(t)];
    }
    if (total == 0.0) {
      std::uniform_int_distribution<int> pick(0, n_states - 1);
      p[static_cast<std::size_t>(pick(rng))] = 1.0;
      total = 1.0;
    }
    for (int t = 0; t < n_states; ++t) {
      if (p[static_cast<std::size_t>(t)] > 0.0) row.push_back({t, p[static_cast<std::size_t>(t)] / total});
    }
  }
  Vector p0 = Vector::Zero(n_states);
  for (int s = 0; s < n_states; ++s) p0[s] = unif(rng) < 0.5 ? unif(rng) : 0.0;
  if (p0.sum() == 0.0) p0[0] = 1.0;
  p0 /= p0.sum();
  Matrix phi_r(n_states, d_r);
  for (int s = 0; s < n_states; ++s) {
    for (int k = 0; k < d_r; ++k) phi_r(s, k) = unif(rng);
  }
  Matrix phi_c = Matrix::Zero(n_states, d_c);
  for (int s = 0; s < n_states; ++s) {
    for (int k = 0; k < d_c; ++k) phi_c(s, k) = unif(rng) < 0.3 ? 1.0 : 0.0;
  }
  Vector w(d_r);
  for (int k = 0; k < d_r; ++k) w[k] = unif(rng) - 0.3;
  if (w.lpNorm<1>() > 0.0) w /= w.lpNorm<1>();
  return Mdp(n_states, n_actions, succ, p0, gamma, w, phi_r, phi_c);
}

/// Random stochastic policy, optionally with deterministic rows.
inline lateach::Policy random_policy(std::mt19937_64& rng, const Mdp& mdp) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  lateach::Policy pi{Matrix::Zero(mdp.n_states(), mdp.n_actions())};
  for (int s = 0; s < mdp.n_states(); ++s) {
    if (unif(rng) < 0.2) {
      pi.probs(s, static_cast<int>(unif(rng) * mdp.n_actions()) % mdp.n_actions()) = 1.0;
    } else {
      for (int a = 0; a < mdp.n_actions(); ++a) pi.probs(s, a) = 0.05 + unif(rng);
      pi.probs.row(s) /= pi.probs.row(s).sum();
    }
  }
  return pi;
}

/// Small seeded object world on a `grid` x `grid` board.
inline lateach::World small_world(int grid, std::uint64_t seed, lateach::LearnerId learner) {
  lateach::WorldConfig cfg;
  cfg.rows = grid;
  cfg.cols = grid;
  cfg.seed = seed;
  return lateach::generate_world(cfg, learner);
}

/// Calls fn on every subset of {0..n-1} of size k.
inline void for_each_subset(int n, int k, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> idx(static_cast<std::size_t>(k));
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == k) {
      fn(idx);
      return;
    }
    for (int i = start; i < n; ++i) {
      idx[static_cast<std::size_t>(depth)] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
}

struct VertexOracleResult {
  bool feasible = false;
  double best = -std::numeric_limits<double>::infinity();
};

/**
 * Brute-force optimum of max c.x s.t. A x <= b, x >= 0 (n small): every
 * vertex is the solution of n active constraints taken from the stacked
 * system [A; -I] x <= [b; 0].
 */
inline VertexOracleResult vertex_enumeration(const Vector& c, const Matrix& a, const Vector& b) {
  const Eigen::Index n = c.size();
  const Eigen::Index m = a.rows();
  Matrix g(m + n, n);
  Vector h(m + n);
  g.topRows(m) = a;
  h.head(m) = b;
  g.bottomRows(n) = -Matrix::Identity(n, n);
  h.tail(n).setZero();
  VertexOracleResult out;
  for_each_subset(static_cast<int>(m + n), static_cast<int>(n), [&](const std::vector<int>& rows) {
    Matrix sub(n, n);
    Vector rhs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      sub.row(i) = g.row(rows[static_cast<std::size_t>(i)]);
      rhs[i] = h[rows[static_cast<std::size_t>(i)]];
    }
    Eigen::FullPivLU<Matrix> lu(sub);
    if (lu.rank() < n) return;
    const Vector x = lu.solve(rhs);
    if (((g * x) - h).maxCoeff() > 1e-9) return;
    out.feasible = true;
    out.best = std::max(out.best, c.dot(x));
  });
  return out;
}

}  // namespace testing
