#include "doctest.h"
#include "helpers.hpp"
#include "lateach/errors.hpp"
#include "lateach/objectworld.hpp"

using namespace lateach;

TEST_CASE("layout rules hold for many seeds") {
  const Cell start{0, 0};
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    WorldConfig cfg;
    cfg.seed = seed;
    const WorldLayout l = generate_layout(cfg);
    CAPTURE(seed);
    std::vector<Cell> all;
    for (const auto& group : l.objects) {
      REQUIRE(group.size() == 2);
      all.insert(all.end(), group.begin(), group.end());
    }
    for (std::size_t i = 0; i < all.size(); ++i) {
      CHECK_FALSE(all[i] == start);
      for (std::size_t j = i + 1; j < all.size(); ++j) CHECK_FALSE(all[i] == all[j]);
    }
    REQUIRE(l.green.size() == 2);
    REQUIRE(l.yellow.size() == 2);
    CHECK(l.green[0] == l.objects[0][0]);
    CHECK(cell_distance(l.green[1], l.objects[0][1]) == 1);
    CHECK(cell_distance(l.yellow[0], l.objects[1][0]) == 1);
    CHECK(cell_distance(l.yellow[1], l.objects[1][1]) == 2);
    for (const Cell& c : {l.green[0], l.green[1], l.yellow[0], l.yellow[1]}) {
      CHECK(cell_distance(c, start) > 2);
      CHECK(c.row >= 0);
      CHECK(c.col >= 0);
      CHECK(c.row < cfg.rows);
      CHECK(c.col < cfg.cols);
    }
    for (const Cell& g : l.green) {
      for (std::size_t k = 1; k < 3; ++k) {
        for (const Cell& o : l.objects[k]) CHECK(cell_distance(g, o) > 1);
      }
    }
  }
}

TEST_CASE("layouts are deterministic in the seed") {
  WorldConfig cfg;
  cfg.seed = 17;
  const WorldLayout a = generate_layout(cfg);
  const WorldLayout b = generate_layout(cfg);
  CHECK(a.objects == b.objects);
  CHECK(a.green == b.green);
  CHECK(a.yellow == b.yellow);
  cfg.seed = 18;
  const WorldLayout c = generate_layout(cfg);
  CHECK_FALSE((a.objects == c.objects && a.green == c.green));
}

TEST_CASE("preference features are nested zones") {
  WorldConfig cfg;
  cfg.seed = 4;
  const WorldLayout l = generate_layout(cfg);
  const Matrix phi = preference_features(l, LearnerId::L5);
  REQUIRE(phi.cols() == 6);
  REQUIRE(phi.rows() == cfg.rows * cfg.cols + 1);
  CHECK(phi.row(phi.rows() - 1).isZero());
  for (Eigen::Index s = 0; s + 1 < phi.rows(); ++s) {
    CHECK(phi(s, 0) <= phi(s, 1));
    CHECK(phi(s, 1) <= phi(s, 2));
    CHECK(phi(s, 3) <= phi(s, 4));
    CHECK(phi(s, 4) <= phi(s, 5));
  }
  // The 3x3 zone around a green cell in the grid interior has 9 cells per distractor at most.
  CHECK(phi.col(0).sum() == 2.0);
  CHECK(phi.col(1).sum() <= 18.0);
  CHECK(phi.row(0).isZero());
  for (LearnerId id : {LearnerId::L1, LearnerId::L2, LearnerId::L3, LearnerId::L4}) {
    const Matrix sub = preference_features(l, id);
    CHECK(sub.cols() == constraint_dim(id));
    CHECK(sub == phi.leftCols(sub.cols()));
  }
}

TEST_CASE("world dynamics") {
  WorldConfig cfg;
  cfg.seed = 2;
  const World w = generate_world(cfg, LearnerId::L3);
  const Mdp& m = w.mdp;
  CHECK(m.n_states() == 101);
  CHECK(m.n_actions() == 5);
  CHECK(m.d_r() == 3);
  CHECK(m.d_c() == 4);
  CHECK(m.discount() == doctest::Approx(0.99));
  CHECK(w.reward_scale == doctest::Approx(2.1));
  CHECK(m.reward_weights().sum() == doctest::Approx(1.0));
  CHECK(w.object_reward(Vector::Unit(3, 0)) == doctest::Approx(1.0));
  // Every object cell leaks to the terminal state with probability 0.1.
  const Cell star = w.layout.objects[0][0];
  const int s = star.row * cfg.cols + star.col;
  CHECK(m.transition(100, s, kStay) == doctest::Approx(0.1));
  CHECK(m.transition(s, s, kStay) == doctest::Approx(0.9));
  // The corner start cannot move up or left.
  CHECK(m.transition(0, 0, kUp) == 1.0);
  CHECK(m.transition(0, 0, kLeft) == 1.0);
  CHECK(m.transition(1, 0, kRight) == 1.0);
  CHECK(m.transition(cfg.cols, 0, kDown) == 1.0);
  // Values stay within the discounted bound.
  const FeatureExpectations mu = feature_expectations(m, optimal_policy(m));
  CHECK(mu.mu_r.sum() <= 1.0 / (1 - m.discount()));
  CHECK(w.object_reward(mu.mu_r) > 0.0);
}

TEST_CASE("learner names and dimensions") {
  CHECK(constraint_dim(LearnerId::L1) == 0);
  CHECK(constraint_dim(LearnerId::L2) == 2);
  CHECK(constraint_dim(LearnerId::L3) == 4);
  CHECK(constraint_dim(LearnerId::L4) == 5);
  CHECK(constraint_dim(LearnerId::L5) == 6);
  CHECK(parse_learner("L4") == LearnerId::L4);
  CHECK(to_string(LearnerId::L2) == "L2");
  CHECK_THROWS_AS(parse_learner("L9"), InvalidArgument);
}

TEST_CASE("layout json round trip") {
  const World w = testing::small_world(8, 5, LearnerId::L2);
  const WorldLayout back = layout_from_json(world_meta_to_json(w));
  CHECK(back.objects == w.layout.objects);
  CHECK(back.green == w.layout.green);
  CHECK(back.yellow == w.layout.yellow);
  CHECK(back.config.seed == w.layout.config.seed);
  CHECK(back.config.rows == 8);
}

TEST_CASE("bad world configurations") {
  WorldConfig cfg;
  cfg.rows = 2;
  cfg.cols = 2;
  CHECK_THROWS_AS(generate_layout(cfg), InvalidArgument);
  cfg = WorldConfig{};
  cfg.discount = 1.0;
  CHECK_THROWS_AS(generate_layout(cfg), InvalidArgument);
  cfg = WorldConfig{};
  cfg.objects_per_type = 3;
  CHECK_THROWS_AS(generate_layout(cfg), InvalidArgument);
}
