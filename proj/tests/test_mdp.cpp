#include "doctest.h"
#include "helpers.hpp"
#include "lateach/errors.hpp"
#include "lateach/mdp.hpp"

using namespace lateach;

namespace {

// Two-state chain: action 0 stays, action 1 switches. Start in state 0.
Mdp two_state(double gamma) {
  std::vector<std::vector<Successor>> succ{{{0, 1.0}}, {{1, 1.0}}, {{1, 1.0}}, {{0, 1.0}}};
  Vector p0(2);
  p0 << 1.0, 0.0;
  Vector w(1);
  w << 1.0;
  Matrix phi(2, 1);
  phi << 0.0, 1.0;
  return Mdp(2, 2, succ, p0, gamma, w, phi, Matrix::Zero(2, 0));
}

}  // namespace

TEST_CASE("construction rejects malformed inputs") {
  std::vector<std::vector<Successor>> succ{{{0, 0.5}}, {{0, 1.0}}};
  Vector p0 = Vector::Ones(1);
  Vector w = Vector::Ones(1);
  Matrix phi = Matrix::Ones(1, 1);
  CHECK_THROWS_AS(Mdp(1, 2, succ, p0, 0.9, w, phi, Matrix::Zero(1, 0)), InvalidArgument);
  succ[0][0].prob = 1.0;
  CHECK_NOTHROW(Mdp(1, 2, succ, p0, 0.9, w, phi, Matrix::Zero(1, 0)));
  CHECK_THROWS_AS(Mdp(1, 2, succ, p0, 1.0, w, phi, Matrix::Zero(1, 0)), InvalidArgument);
  CHECK_THROWS_AS(Mdp(1, 2, succ, p0, 0.9, Vector::Constant(1, 2.0), phi, Matrix::Zero(1, 0)),
                  InvalidArgument);
  CHECK_THROWS_AS(Mdp(1, 2, succ, p0, 0.9, w, Matrix::Constant(1, 1, 1.5), Matrix::Zero(1, 0)),
                  InvalidArgument);
  CHECK_THROWS_AS(Mdp(1, 2, succ, Vector::Constant(1, 0.5), 0.9, w, phi, Matrix::Zero(1, 0)),
                  InvalidArgument);
}

TEST_CASE("closed-form values on a two-state chain") {
  const Mdp mdp = two_state(0.9);
  // Always switch: visits 0,1,0,1,... so mu = gamma / (1 - gamma^2).
  const Policy flip = deterministic_policy(mdp, {1, 1});
  CHECK(feature_expectations(mdp, flip).mu_r[0] == doctest::Approx(0.9 / (1 - 0.81)).epsilon(1e-10));
  // Switch once then stay: gamma / (1 - gamma).
  const Policy go = deterministic_policy(mdp, {1, 0});
  CHECK(feature_expectations(mdp, go).mu_r[0] == doctest::Approx(9.0).epsilon(1e-10));
  const PlanningResult best = solve_mdp(mdp, mdp.state_rewards());
  CHECK(best.actions == std::vector<int>{1, 0});
  CHECK(best.values[0] == doctest::Approx(9.0).epsilon(1e-10));
  CHECK(best.values[1] == doctest::Approx(10.0).epsilon(1e-10));
}

TEST_CASE("state visitation sums to the horizon") {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 10; ++k) {
    const Mdp mdp = testing::random_mdp(rng, 8, 3, 2, 1, 0.95);
    const Policy pi = testing::random_policy(rng, mdp);
    CHECK(state_visitation(mdp, pi).sum() == doctest::Approx(1.0 / 0.05).epsilon(1e-9));
  }
}

TEST_CASE("flow conservation of occupancy measures") {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 100; ++k) {
    std::uniform_int_distribution<int> ns(2, 20), na(1, 4);
    const Mdp mdp = testing::random_mdp(rng, ns(rng), na(rng), 2, 1, 0.9);
    const OccupancyVector occ = occupancy_from_policy(mdp, testing::random_policy(rng, mdp));
    CHECK(flow_residual(mdp, occ) <= 1e-8);
    CHECK(occ.z.minCoeff() >= 0.0);
    CHECK(occ.z.sum() == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("policy to occupancy to policy is the identity on reachable states") {
  std::mt19937_64 rng(12);
  for (int k = 0; k < 100; ++k) {
    const Mdp mdp = testing::random_mdp(rng, 2 + k % 19, 1 + k % 4, 2, 1, 0.9);
    const Policy pi = testing::random_policy(rng, mdp);
    const OccupancyVector occ = occupancy_from_policy(mdp, pi);
    const Policy back = policy_from_occupancy(occ);
    const Vector d = state_visitation(mdp, pi);
    for (int s = 0; s < mdp.n_states(); ++s) {
      if (d[s] > 1e-12) CHECK((back.probs.row(s) - pi.probs.row(s)).cwiseAbs().maxCoeff() <= 1e-8);
    }
  }
}

TEST_CASE("feature expectations are linear in the occupancy") {
  std::mt19937_64 rng(13);
  const Mdp mdp = testing::random_mdp(rng, 10, 3, 3, 2);
  const OccupancyVector a = occupancy_from_policy(mdp, testing::random_policy(rng, mdp));
  const OccupancyVector b = occupancy_from_policy(mdp, testing::random_policy(rng, mdp));
  for (double t : {0.0, 0.25, 0.6, 1.0}) {
    const OccupancyVector mix{t * a.z + (1 - t) * b.z};
    const Vector expected =
        t * mu_from_occupancy(mdp, a).full() + (1 - t) * mu_from_occupancy(mdp, b).full();
    CHECK((mu_from_occupancy(mdp, mix).full() - expected).norm() <= 1e-8);
    CHECK(flow_residual(mdp, mix) <= 1e-8);
  }
}

TEST_CASE("occupancy and direct feature expectations agree") {
  std::mt19937_64 rng(14);
  for (int k = 0; k < 20; ++k) {
    const Mdp mdp = testing::random_mdp(rng, 12, 3, 2, 2);
    const Policy pi = testing::random_policy(rng, mdp);
    const Vector direct = feature_expectations(mdp, pi).full();
    const Vector via = mu_from_occupancy(mdp, occupancy_from_policy(mdp, pi)).full();
    CHECK((direct - via).norm() <= 1e-8);
  }
}

TEST_CASE("Monte Carlo feature expectations match the exact solve") {
  std::mt19937_64 rng(15);
  const Mdp mdp = testing::random_mdp(rng, 6, 2, 2, 1, 0.8);
  const Policy pi = testing::random_policy(rng, mdp);
  const auto traj = sample_trajectories(mdp, pi, 20000, 80, 99);
  const Vector mc = empirical_feature_expectations(traj, mdp).full();
  const Vector exact = feature_expectations(mdp, pi).full();
  // Per-episode sums are bounded by 1/(1-gamma) = 5, so 4 sigma is at most 0.15; truncation adds 0.8^80 * 5.
  CHECK((mc - exact).cwiseAbs().maxCoeff() <= 0.15);
  CHECK(sample_trajectories(mdp, pi, 3, 10, 7) == sample_trajectories(mdp, pi, 3, 10, 7));
  CHECK_THROWS_AS(empirical_feature_expectations({}, mdp), InvalidArgument);
}

TEST_CASE("policy iteration matches brute force over deterministic policies") {
  std::mt19937_64 rng(16);
  for (int k = 0; k < 20; ++k) {
    const Mdp mdp = testing::random_mdp(rng, 4, 3, 2, 0);
    double best = -1e300;
    std::vector<int> acts(4);
    for (int code = 0; code < 81; ++code) {
      int c = code;
      for (int s = 0; s < 4; ++s) {
        acts[static_cast<std::size_t>(s)] = c % 3;
        c /= 3;
      }
      best = std::max(best, reward_of(mdp, feature_expectations(mdp, deterministic_policy(mdp, acts)).mu_r));
    }
    const double got = reward_of(mdp, feature_expectations(mdp, optimal_policy(mdp)).mu_r);
    CHECK(got == doctest::Approx(best).epsilon(1e-9));
  }
}

TEST_CASE("soft value iteration limits") {
  std::mt19937_64 rng(17);
  const Mdp mdp = testing::random_mdp(rng, 10, 4, 2, 1);
  SUBCASE("zero reward gives the uniform policy and log|A| / (1 - gamma) values") {
    const SoftValueResult r = soft_value_iteration(mdp, Vector::Zero(mdp.d()));
    CHECK((r.policy.probs.array() - 0.25).abs().maxCoeff() <= 1e-9);
    CHECK((r.values.array() - std::log(4.0) / 0.1).abs().maxCoeff() <= 1e-7);
    CHECK(causal_entropy(mdp, r.policy) == doctest::Approx(std::log(4.0) / 0.1).epsilon(1e-9));
  }
  SUBCASE("large weights approach the optimal deterministic policy") {
    Vector w = Vector::Zero(mdp.d());
    w.head(mdp.d_r()) = mdp.reward_weights();
    const double opt = reward_of(mdp, feature_expectations(mdp, optimal_policy(mdp)).mu_r);
    double prev_gap = 1e300;
    for (double scale : {10.0, 100.0, 1000.0}) {
      const SoftValueResult r = soft_value_iteration(mdp, scale * w);
      const double gap = opt - reward_of(mdp, feature_expectations(mdp, r.policy).mu_r);
      CHECK(gap >= -1e-9);
      CHECK(gap <= prev_gap + 1e-9);
      prev_gap = gap;
    }
    CHECK(prev_gap <= 1e-2);
  }
  SUBCASE("the fixed point satisfies the soft Bellman equations") {
    Vector w = Vector::Zero(mdp.d());
    w[0] = 0.7;
    w[mdp.d() - 1] = -0.5;
    const SoftValueResult r = soft_value_iteration(mdp, w);
    CHECK(r.residual <= 1e-10);
    for (int s = 0; s < mdp.n_states(); ++s) {
      const double lse = std::log(r.q.row(s).array().exp().sum());
      CHECK(r.values[s] == doctest::Approx(lse).epsilon(1e-9));
      CHECK(r.policy.probs.row(s).sum() == doctest::Approx(1.0));
    }
  }
  SUBCASE("wrong weight length is rejected") {
    CHECK_THROWS_AS(soft_value_iteration(mdp, Vector::Zero(1)), InvalidArgument);
  }
}

TEST_CASE("json round trip") {
  std::mt19937_64 rng(18);
  const Mdp mdp = testing::random_mdp(rng, 5, 2, 2, 1);
  const Mdp back = mdp_from_json(mdp_to_json(mdp));
  CHECK(back.n_states() == 5);
  CHECK(back.d_c() == 1);
  CHECK((Matrix(back.transitions()) - Matrix(mdp.transitions())).norm() == 0.0);
  CHECK((back.features() - mdp.features()).norm() == 0.0);
  CHECK_THROWS_AS(mdp_from_json(nlohmann::json{{"n_states", 2}}), InvalidArgument);
}

TEST_CASE("policy validation") {
  const Mdp mdp = two_state(0.9);
  Policy bad{Matrix::Constant(2, 2, 0.7)};
  CHECK_THROWS_AS(validate_policy(mdp, bad), InvalidArgument);
  CHECK_THROWS_AS(deterministic_policy(mdp, {0, 5}), InvalidArgument);
  CHECK_NOTHROW(validate_policy(mdp, uniform_policy(mdp)));
}
