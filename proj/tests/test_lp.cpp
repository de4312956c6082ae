#include "doctest.h"
#include "helpers.hpp"
#include "lateach/errors.hpp"
#include "lateach/lp.hpp"

using namespace lateach;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("small textbook problem") {
  LinearProgram lp;
  lp.objective = vec({3, 5});
  lp.a_ub.resize(3, 2);
  lp.a_ub << 1, 0, 0, 2, 3, 2;
  lp.b_ub = vec({4, 12, 18});
  const LpSolution s = solve_lp(lp);
  REQUIRE(s.status == LpStatus::Optimal);
  CHECK(s.objective_value == doctest::Approx(36.0));
  CHECK(s.x[0] == doctest::Approx(2.0));
  CHECK(s.x[1] == doctest::Approx(6.0));
}

TEST_CASE("degenerate problem that cycles under naive pivoting") {
  LinearProgram lp;
  lp.objective = vec({0.75, -20, 0.5, -6});
  lp.a_ub.resize(3, 4);
  lp.a_ub << 0.25, -8, -1, 9, 0.5, -12, -0.5, 3, 0, 0, 1, 0;
  lp.b_ub = vec({0, 0, 1});
  const LpSolution s = solve_lp(lp);
  REQUIRE(s.status == LpStatus::Optimal);
  CHECK(s.objective_value == doctest::Approx(1.25));
}

TEST_CASE("equalities, free variables and finite bounds") {
  LinearProgram lp;
  lp.objective = vec({1, 1});
  lp.a_eq.resize(1, 2);
  lp.a_eq << 1, -1;
  lp.b_eq = vec({1});
  lp.lower = vec({-kInf, -kInf});
  lp.upper = vec({3, kInf});
  const LpSolution s = solve_lp(lp);
  REQUIRE(s.status == LpStatus::Optimal);
  CHECK(s.x[0] == doctest::Approx(3.0));
  CHECK(s.x[1] == doctest::Approx(2.0));

  LinearProgram neg;
  neg.objective = vec({-1});
  neg.lower = vec({-5});
  neg.upper = vec({-2});
  const LpSolution t = solve_lp(neg);
  REQUIRE(t.status == LpStatus::Optimal);
  CHECK(t.x[0] == doctest::Approx(-5.0));
}

TEST_CASE("infeasible and unbounded problems are reported") {
  LinearProgram inf;
  inf.objective = vec({1, 1});
  inf.a_ub.resize(2, 2);
  inf.a_ub << 1, 1, -1, -1;
  inf.b_ub = vec({1, -2});
  CHECK(solve_lp(inf).status == LpStatus::Infeasible);

  LinearProgram crossed;
  crossed.objective = vec({1});
  crossed.lower = vec({2});
  crossed.upper = vec({1});
  CHECK(solve_lp(crossed).status == LpStatus::Infeasible);

  LinearProgram unb;
  unb.objective = vec({1, 0});
  unb.a_ub.resize(1, 2);
  unb.a_ub << -1, 1;
  unb.b_ub = vec({1});
  CHECK(solve_lp(unb).status == LpStatus::Unbounded);
}

TEST_CASE("shape errors") {
  LinearProgram lp;
  lp.objective = vec({1, 2});
  lp.a_ub = Matrix::Ones(1, 3);
  lp.b_ub = vec({1});
  CHECK_THROWS_AS(solve_lp(lp), InvalidArgument);
  lp.a_ub = Matrix::Ones(1, 2);
  lp.b_ub = vec({kInf});
  CHECK_THROWS_AS(solve_lp(lp), InvalidArgument);
}

TEST_CASE("agrees with vertex enumeration on random small LPs") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  int infeasible = 0;
  for (int k = 0; k < 50; ++k) {
    const int n = 2 + k % 3;
    const int m = 2 + k % 4;
    Matrix a(m + 1, n);
    Vector b(m + 1);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) a(i, j) = unif(rng);
      b[i] = (k % 5 == 4) ? unif(rng) - 0.6 : 0.1 + std::abs(unif(rng));
    }
    a.row(m).setOnes();  // keeps every instance bounded
    b[m] = 10.0;
    Vector c(n);
    for (int j = 0; j < n; ++j) c[j] = unif(rng);

    LinearProgram lp;
    lp.objective = c;
    lp.a_ub = a;
    lp.b_ub = b;
    const LpSolution s = solve_lp(lp);
    const auto oracle = testing::vertex_enumeration(c, a, b);
    CAPTURE(k);
    if (!oracle.feasible) {
      ++infeasible;
      CHECK(s.status == LpStatus::Infeasible);
      continue;
    }
    REQUIRE(s.status == LpStatus::Optimal);
    CHECK(std::abs(s.objective_value - oracle.best) <= 1e-7);
    CHECK((a * s.x - b).maxCoeff() <= 1e-7);
    CHECK(s.x.minCoeff() >= -1e-7);
  }
  CHECK(infeasible < 50);
}

TEST_CASE("deterministic") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  LinearProgram lp;
  lp.objective = Vector::NullaryExpr(6, [&] { return unif(rng); });
  lp.a_ub = Matrix::NullaryExpr(4, 6, [&] { return unif(rng); });
  lp.b_ub = Vector::Ones(4);
  const LpSolution a = solve_lp(lp);
  const LpSolution b = solve_lp(lp);
  CHECK(a.x == b.x);
  CHECK(a.pivots == b.pivots);
}
