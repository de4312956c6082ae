#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lateach/mdp.hpp"
#include "lateach/polytope.hpp"

namespace lateach {

enum class LearnerId { L1, L2, L3, L4, L5 };

/// Number of preference features of a learner: 0, 2, 4, 5, 6.
int constraint_dim(LearnerId id);
std::string to_string(LearnerId id);
/// Parses "L1".."L5"; throws InvalidArgument otherwise.
LearnerId parse_learner(const std::string& name);

struct WorldConfig {
  int rows = 10;
  int cols = 10;
  double star_reward = 1.0;
  double plus_reward = 0.9;
  double dot_reward = 0.2;
  int objects_per_type = 2;
  double discount = 0.99;
  double terminal_prob = 0.1;
  std::uint64_t seed = 0;
};

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Chebyshev distance.
int cell_distance(const Cell& a, const Cell& b);

/// Object and distractor coordinates. Object types are ordered star, plus, dot.
struct WorldLayout {
  WorldConfig config;
  std::array<std::vector<Cell>, 3> objects;
  std::vector<Cell> green;   // green[0] on star 0, green[1] next to star 1
  std::vector<Cell> yellow;  // yellow[0] one cell from plus 0, yellow[1] two cells from plus 1
};

/// Actions in the order used by the transition model.
enum Action : int { kLeft = 0, kUp = 1, kRight = 2, kDown = 3, kStay = 4 };

/**
 * Places objects and distractors uniformly at random (deterministic in the
 * seed). The start cell stays free. Throws InvalidArgument when no valid
 * placement is found within 1000 attempts.
 */
WorldLayout generate_layout(const WorldConfig& config);

/// Preference features of every state for a learner (terminal row is zero).
Matrix preference_features(const WorldLayout& layout, LearnerId learner);

/// Gridworld Mdp for a layout; states are r * cols + c plus a final terminal state.
Mdp build_world(const WorldLayout& layout, LearnerId learner);

/// Divisor applied to the object rewards so that ||w*||_1 = 1.
double reward_scale(const WorldConfig& config);

struct World {
  WorldLayout layout;
  LearnerId learner = LearnerId::L1;
  Mdp mdp;
  double reward_scale = 1.0;

  /// Reward of mu_r in the original object-reward units.
  double object_reward(const Vector& mu_r) const;
};

World generate_world(const WorldConfig& config, LearnerId learner);

/// mu_c[j] <= delta for every preference feature of the learner.
LinearConstraintSet learner_constraints(const Mdp& mdp, double delta);

nlohmann::json world_meta_to_json(const World& world);
WorldLayout layout_from_json(const nlohmann::json& meta);

}  // namespace lateach
