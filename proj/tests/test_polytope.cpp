#include "doctest.h"
#include "helpers.hpp"
#include "lateach/errors.hpp"
#include "lateach/polytope.hpp"

using namespace lateach;

namespace {

// Start state with one action per corner; each action jumps to an absorbing state with features
// corners.col(a). The reward polytope is exactly conv{gamma / (1 - gamma) * corners.col(a)}.
Mdp fan(const Matrix& corners, double gamma) {
  const int k = static_cast<int>(corners.cols());
  const int d = static_cast<int>(corners.rows());
  const int n = k + 1;
  std::vector<std::vector<Successor>> succ(static_cast<std::size_t>(n) * k);
  for (int a = 0; a < k; ++a) succ[static_cast<std::size_t>(a)] = {{a + 1, 1.0}};
  for (int s = 1; s < n; ++s) {
    for (int a = 0; a < k; ++a) succ[static_cast<std::size_t>(s) * k + a] = {{s, 1.0}};
  }
  Vector p0 = Vector::Zero(n);
  p0[0] = 1.0;
  Matrix phi = Matrix::Zero(n, d);
  for (int a = 0; a < k; ++a) phi.row(a + 1) = corners.col(a).transpose();
  Matrix phi_c = Matrix::Zero(n, 1);
  phi_c(1, 0) = 1.0;  // first corner is the "constrained" one
  Vector w = Vector::Constant(d, 1.0 / d);
  if (d == 2) w << 0.6, 0.4;
  return Mdp(n, k, succ, p0, gamma, w, phi, phi_c);
}

double best_deterministic(const Mdp& mdp, const Vector& dir) {
  const int s = mdp.n_states();
  const int a = mdp.n_actions();
  double best = -1e300;
  std::vector<int> acts(static_cast<std::size_t>(s), 0);
  long total = 1;
  for (int i = 0; i < s; ++i) total *= a;
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int i = 0; i < s; ++i) {
      acts[static_cast<std::size_t>(i)] = static_cast<int>(c % a);
      c /= a;
    }
    best = std::max(best, dir.dot(feature_expectations(mdp, deterministic_policy(mdp, acts)).mu_r));
  }
  return best;
}

}  // namespace

TEST_CASE("max_linear finds the best vertex") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> normal;
  for (int k = 0; k < 15; ++k) {
    const Mdp mdp = testing::random_mdp(rng, 5, 3, 3, 1);
    Vector dir(3);
    for (int i = 0; i < 3; ++i) dir[i] = normal(rng);
    const PolytopePoint p = max_linear(mdp, dir);
    CHECK(dir.dot(p.mu.mu_r) == doctest::Approx(best_deterministic(mdp, dir)).epsilon(1e-9));
    // Unconstrained and LP paths agree once a slack constraint forces the LP.
    LinearConstraintSet slack({Halfspace{Vector::Ones(1), 1e6, Scope::Constraint}});
    const PolytopePoint q = max_linear(mdp, dir, slack);
    CHECK(dir.dot(q.mu.mu_r) == doctest::Approx(dir.dot(p.mu.mu_r)).epsilon(1e-7));
    CHECK(flow_residual(mdp, q.occupancy) <= 1e-8);
  }
}

TEST_CASE("constraints are in discounted-sum units and bind") {
  Matrix corners(2, 3);
  corners << 1, 0, 0.5, 0, 1, 0.5;
  const Mdp mdp = fan(corners, 0.9);  // corner scale 9
  const Vector dir = Vector::Unit(2, 0);
  CHECK(max_linear(mdp, dir).mu.mu_r[0] == doctest::Approx(9.0));
  const LinearConstraintSet box = LinearConstraintSet::box_upper(Vector::Constant(1, 2.0));
  const PolytopePoint p = max_linear(mdp, dir, box);
  CHECK(p.mu.mu_c[0] == doctest::Approx(2.0).epsilon(1e-7));
  // 2/9 of the mass on corner 0, the rest on the (0.5, 0.5) corner.
  CHECK(p.mu.mu_r[0] == doctest::Approx(2.0 + 7.0 * 0.5).epsilon(1e-7));
  CHECK(box.max_violation(p.mu) <= 1e-7);
}

TEST_CASE("removing a halfspace never lowers the optimum") {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int k = 0; k < 10; ++k) {
    const Mdp mdp = testing::random_mdp(rng, 8, 3, 2, 2);
    const Vector dir = Vector::Random(2);
    Vector th(2);
    th << 1.0 + 5 * unif(rng), 1.0 + 5 * unif(rng);
    std::vector<Halfspace> hs{Halfspace{Vector::Unit(2, 0), th[0], Scope::Constraint},
                              Halfspace{Vector::Unit(2, 1), th[1], Scope::Constraint}};
    double both, one, none;
    try {
      both = dir.dot(max_linear(mdp, dir, LinearConstraintSet(hs)).mu.mu_r);
    } catch (const InfeasibleError&) {
      continue;
    }
    one = dir.dot(max_linear(mdp, dir, LinearConstraintSet({hs[0]})).mu.mu_r);
    none = dir.dot(max_linear(mdp, dir).mu.mu_r);
    CHECK(one >= both - 1e-7);
    CHECK(none >= one - 1e-7);
  }
}

TEST_CASE("infeasible constraint sets throw") {
  Matrix corners(2, 2);
  corners << 1, 0, 0, 1;
  const Mdp mdp = fan(corners, 0.9);
  LinearConstraintSet impossible({Halfspace{Vector::Ones(2), -1.0, Scope::Reward}});
  CHECK_THROWS_AS(max_linear(mdp, Vector::Ones(2), impossible), InfeasibleError);
  LinearConstraintSet wrong({Halfspace{Vector::Ones(5), 1.0, Scope::Reward}});
  CHECK_THROWS_AS(max_linear(mdp, Vector::Ones(2), wrong), InvalidArgument);
}

TEST_CASE("projection onto a segment matches the closed form") {
  Matrix corners(2, 2);
  corners << 1, 0, 0, 1;
  const Mdp mdp = fan(corners, 0.5);  // segment from (1,0) to (0,1)
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> unif(-1.0, 2.0);
  const Vector a(Vector::Unit(2, 0)), b(Vector::Unit(2, 1));
  for (int k = 0; k < 50; ++k) {
    Vector y(2);
    y << unif(rng), unif(rng);
    const double t = std::clamp((y - a).dot(b - a) / (b - a).squaredNorm(), 0.0, 1.0);
    const Vector expected = a + t * (b - a);
    const ProjectionResult p = project_l2(mdp, y, {}, 1e-8);
    CHECK(p.converged);
    CHECK((p.point.mu.mu_r - expected).norm() <= 1e-7);
    CHECK(p.distance == doctest::Approx((y - expected).norm()).epsilon(1e-7));
    // The witness policy reproduces the point.
    CHECK((feature_expectations(mdp, p.point.policy).mu_r - p.point.mu.mu_r).norm() <= 1e-7);
  }
}

TEST_CASE("projection idempotence and obtuse-angle certificate") {
  std::mt19937_64 rng(34);
  std::normal_distribution<double> normal;
  const Mdp mdp = testing::random_mdp(rng, 10, 3, 3, 1);
  std::vector<Vector> feasible;
  for (int i = 0; i < 100; ++i) {
    Vector dir(3);
    for (int j = 0; j < 3; ++j) dir[j] = normal(rng);
    feasible.push_back(max_linear(mdp, dir).mu.mu_r);
  }
  const double tol = 1e-6;
  const double scale = 1.0 / (1.0 - mdp.discount());
  for (int k = 0; k < 100; ++k) {
    Vector target(3);
    for (int j = 0; j < 3; ++j) target[j] = scale * (0.5 + 0.6 * normal(rng));
    const ProjectionResult p = project_l2(mdp, target, {}, tol);
    REQUIRE(p.converged);
    const Vector& x = p.point.mu.mu_r;
    for (const Vector& y : feasible) {
      CHECK((target - x).dot(y - x) <= tol * (y - x).norm() + 1e-9);
    }
    const ProjectionResult again = project_l2(mdp, x, {}, tol);
    CHECK((again.point.mu.mu_r - x).norm() <= 2 * tol);
  }
}

TEST_CASE("contains") {
  std::mt19937_64 rng(35);
  const Mdp mdp = testing::random_mdp(rng, 8, 3, 2, 1);
  const Vector v = max_linear(mdp, Vector::Ones(2)).mu.mu_r;
  CHECK(contains(mdp, v, {}, 1e-5));
  const Vector u = feature_expectations(mdp, uniform_policy(mdp)).mu_r;
  CHECK(contains(mdp, 0.5 * (u + v), {}, 1e-5));
  CHECK_FALSE(contains(mdp, v + 0.1 * Vector::Ones(2), {}, 1e-5));
  CHECK_FALSE(contains(mdp, Vector::Constant(2, -1.0), {}, 1e-5));
}

TEST_CASE("constrained projection lands on the constrained face") {
  Matrix corners(2, 3);
  corners << 1, 0, 0.5, 0, 1, 0.5;
  const Mdp mdp = fan(corners, 0.9);
  const LinearConstraintSet forbid = LinearConstraintSet::box_upper(Vector::Zero(1));
  const Vector target = 9.0 * Vector::Unit(2, 0);
  const ProjectionResult p = project_l2(mdp, target, forbid, 1e-8);
  CHECK((p.point.mu.mu_r - Vector::Constant(2, 4.5)).norm() <= 1e-6);
  CHECK(p.point.mu.mu_c[0] <= 1e-7);
  CHECK(reward_of(mdp, p.point.mu.mu_r) <
        reward_of(mdp, max_linear(mdp, mdp.reward_weights()).mu.mu_r) - 0.5);
  CHECK(reward_of(mdp, p.point.mu.mu_r) ==
        doctest::Approx(reward_of(mdp, max_linear(mdp, mdp.reward_weights(), forbid).mu.mu_r)));
}
