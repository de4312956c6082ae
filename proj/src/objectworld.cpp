#include "lateach/objectworld.hpp"

#include <algorithm>
#include <cstdlib>
#include <random>

#include "lateach/errors.hpp"

namespace lateach {

int constraint_dim(LearnerId id) {
  switch (id) {
    case LearnerId::L1:
      return 0;
    case LearnerId::L2:
      return 2;
    case LearnerId::L3:
      return 4;
    case LearnerId::L4:
      return 5;
    case LearnerId::L5:
      return 6;
  }
  return 0;
}

std::string to_string(LearnerId id) {
  return "L" + std::to_string(static_cast<int>(id) + 1);
}

LearnerId parse_learner(const std::string& name) {
  if (name.size() == 2 && (name[0] == 'L' || name[0] == 'l') && name[1] >= '1' &&
      name[1] <= '5') {
    return static_cast<LearnerId>(name[1] - '1');
  }
  throw InvalidArgument("unknown learner '" + name + "' (expected L1..L5)");
}

int cell_distance(const Cell& a, const Cell& b) {
  return std::max(std::abs(a.row - b.row), std::abs(a.col - b.col));
}

namespace {

void check_config(const WorldConfig& c) {
  if (c.rows < 1 || c.cols < 1) throw InvalidArgument("grid must have at least one cell");
  if (c.objects_per_type != 2) {
    throw InvalidArgument("the distractor layout needs exactly two objects per type");
  }
  if (c.rows * c.cols < 3 * c.objects_per_type + 4 + 1) {
    throw InvalidArgument("grid too small for objects and distractors");
  }
  if (!(c.discount > 0.0 && c.discount < 1.0)) throw InvalidArgument("discount must be in (0, 1)");
  if (!(c.terminal_prob >= 0.0 && c.terminal_prob <= 1.0)) {
    throw InvalidArgument("terminal_prob must be in [0, 1]");
  }
  if (!(c.star_reward >= 0.0 && c.plus_reward >= 0.0 && c.dot_reward >= 0.0) ||
      c.star_reward + c.plus_reward + c.dot_reward <= 0.0) {
    throw InvalidArgument("object rewards must be non-negative and not all zero");
  }
}

bool occupied(const std::vector<Cell>& used, const Cell& c) {
  return std::find(used.begin(), used.end(), c) != used.end();
}

// Uniform pick among free in-grid cells at exactly `dist` from `center`.
bool pick_at(const WorldConfig& cfg, const Cell& center, int dist, std::vector<Cell>& used,
             std::mt19937_64& rng, Cell& out) {
  std::vector<Cell> options;
  for (int r = center.row - dist; r <= center.row + dist; ++r) {
    for (int c = center.col - dist; c <= center.col + dist; ++c) {
      const Cell cell{r, c};
      if (r < 0 || c < 0 || r >= cfg.rows || c >= cfg.cols) continue;
      if (cell_distance(cell, center) != dist || occupied(used, cell)) continue;
      options.push_back(cell);
    }
  }
  if (options.empty()) return false;
  std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
  out = options[pick(rng)];
  used.push_back(out);
  return true;
}

}  // namespace

WorldLayout generate_layout(const WorldConfig& config) {
  check_config(config);
  std::mt19937_64 rng(config.seed);
  const Cell start{0, 0};
  std::vector<Cell> cells;
  for (int r = 0; r < config.rows; ++r) {
    for (int c = 0; c < config.cols; ++c) {
      if (!(Cell{r, c} == start)) cells.push_back({r, c});
    }
  }

  for (int attempt = 0; attempt < 1000; ++attempt) {
    WorldLayout layout;
    layout.config = config;
    std::vector<Cell> pool = cells;
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<Cell> used{start};
    std::size_t next = 0;
    for (auto& group : layout.objects) {
      for (int k = 0; k < config.objects_per_type; ++k) {
        group.push_back(pool[next]);
        used.push_back(pool[next]);
        ++next;
      }
    }
    // The first green distractor shares the first star's cell.
    layout.green.push_back(layout.objects[0][0]);
    std::vector<Cell> taken = used;
    Cell g1, y0, y1;
    if (!pick_at(config, layout.objects[0][1], 1, taken, rng, g1)) continue;
    if (!pick_at(config, layout.objects[1][0], 1, taken, rng, y0)) continue;
    if (!pick_at(config, layout.objects[1][1], 2, taken, rng, y1)) continue;
    layout.green.push_back(g1);
    layout.yellow = {y0, y1};
    // Keep every preference zone off the start cell so staying put is always feasible.
    const bool start_clear = std::none_of(taken.begin() + static_cast<long>(used.size()),
                                          taken.end(), [&](const Cell& c) {
                                            return cell_distance(c, start) <= 2;
                                          }) &&
                             cell_distance(layout.green[0], start) > 2;
    if (!start_clear) continue;
    // Green distractors only guard stars: other objects stay out of their 3x3 neighborhoods.
    const bool others_clear = std::none_of(layout.green.begin(), layout.green.end(), [&](const Cell& g) {
      for (std::size_t k = 1; k < 3; ++k) {
        for (const Cell& o : layout.objects[k]) {
          if (cell_distance(g, o) <= 1) return true;
        }
      }
      return false;
    });
    if (!others_clear) continue;
    return layout;
  }
  throw InvalidArgument("no valid object placement found after 1000 attempts");
}

Matrix preference_features(const WorldLayout& layout, LearnerId learner) {
  const WorldConfig& cfg = layout.config;
  const int n_cells = cfg.rows * cfg.cols;
  const int d_c = constraint_dim(learner);
  Matrix phi = Matrix::Zero(n_cells + 1, d_c);
  auto within = [](const std::vector<Cell>& group, const Cell& c, int d) {
    return std::any_of(group.begin(), group.end(),
                       [&](const Cell& g) { return cell_distance(g, c) <= d; });
  };
  for (int r = 0; r < cfg.rows; ++r) {
    for (int c = 0; c < cfg.cols; ++c) {
      const Cell cell{r, c};
      const double all[6] = {
          within(layout.green, cell, 0) ? 1.0 : 0.0, within(layout.green, cell, 1) ? 1.0 : 0.0,
          within(layout.green, cell, 2) ? 1.0 : 0.0, within(layout.yellow, cell, 0) ? 1.0 : 0.0,
          within(layout.yellow, cell, 1) ? 1.0 : 0.0, within(layout.yellow, cell, 2) ? 1.0 : 0.0};
      for (int j = 0; j < d_c; ++j) phi(r * cfg.cols + c, j) = all[j];
    }
  }
  return phi;
}

double reward_scale(const WorldConfig& config) {
  return config.star_reward + config.plus_reward + config.dot_reward;
}

Mdp build_world(const WorldLayout& layout, LearnerId learner) {
  const WorldConfig& cfg = layout.config;
  check_config(cfg);
  const int n_cells = cfg.rows * cfg.cols;
  const int terminal = n_cells;
  const int n_states = n_cells + 1;
  constexpr int kActions = 5;

  Matrix phi_r = Matrix::Zero(n_states, 3);
  for (int k = 0; k < 3; ++k) {
    for (const Cell& c : layout.objects[static_cast<std::size_t>(k)]) {
      phi_r(c.row * cfg.cols + c.col, k) = 1.0;
    }
  }

  std::vector<std::vector<Successor>> succ(static_cast<std::size_t>(n_states) * kActions);
  for (int r = 0; r < cfg.rows; ++r) {
    for (int c = 0; c < cfg.cols; ++c) {
      const int s = r * cfg.cols + c;
      const bool object = phi_r.row(s).sum() > 0.0;
      for (int a = 0; a < kActions; ++a) {
        int nr = r, nc = c;
        switch (a) {
          case kLeft: nc = std::max(c - 1, 0); break;
          case kUp: nr = std::max(r - 1, 0); break;
          case kRight: nc = std::min(c + 1, cfg.cols - 1); break;
          case kDown: nr = std::min(r + 1, cfg.rows - 1); break;
          default: break;
        }
        auto& row = succ[static_cast<std::size_t>(s) * kActions + a];
        if (object && cfg.terminal_prob > 0.0) {
          row.push_back({terminal, cfg.terminal_prob});
          if (cfg.terminal_prob < 1.0) row.push_back({nr * cfg.cols + nc, 1.0 - cfg.terminal_prob});
        } else {
          row.push_back({nr * cfg.cols + nc, 1.0});
        }
      }
    }
  }
  for (int a = 0; a < kActions; ++a) {
    succ[static_cast<std::size_t>(terminal) * kActions + a].push_back({terminal, 1.0});
  }

  Vector p0 = Vector::Zero(n_states);
  p0[0] = 1.0;
  Vector w(3);
  w << cfg.star_reward, cfg.plus_reward, cfg.dot_reward;
  w /= reward_scale(cfg);
  return Mdp(n_states, kActions, succ, std::move(p0), cfg.discount, std::move(w),
             std::move(phi_r), preference_features(layout, learner));
}

double World::object_reward(const Vector& mu_r) const {
  return reward_scale * reward_of(mdp, mu_r);
}

World generate_world(const WorldConfig& config, LearnerId learner) {
  WorldLayout layout = generate_layout(config);
  Mdp mdp = build_world(layout, learner);
  return World{std::move(layout), learner, std::move(mdp), reward_scale(config)};
}

LinearConstraintSet learner_constraints(const Mdp& mdp, double delta) {
  return LinearConstraintSet::box_upper(Vector::Constant(mdp.d_c(), delta));
}

namespace {

nlohmann::json cells_to_json(const std::vector<Cell>& cells) {
  nlohmann::json out = nlohmann::json::array();
  for (const Cell& c : cells) out.push_back({c.row, c.col});
  return out;
}

std::vector<Cell> cells_from_json(const nlohmann::json& j) {
  std::vector<Cell> out;
  for (const auto& c : j) out.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
  return out;
}

}  // namespace

nlohmann::json world_meta_to_json(const World& world) {
  const WorldConfig& c = world.layout.config;
  nlohmann::json j;
  j["rows"] = c.rows;
  j["cols"] = c.cols;
  j["seed"] = c.seed;
  j["discount"] = c.discount;
  j["terminal_prob"] = c.terminal_prob;
  j["object_rewards"] = {{"star", c.star_reward}, {"plus", c.plus_reward}, {"dot", c.dot_reward}};
  j["objects"] = {{"star", cells_to_json(world.layout.objects[0])},
                  {"plus", cells_to_json(world.layout.objects[1])},
                  {"dot", cells_to_json(world.layout.objects[2])}};
  j["distractors"] = {{"green", cells_to_json(world.layout.green)},
                      {"yellow", cells_to_json(world.layout.yellow)}};
  j["learner"] = to_string(world.learner);
  j["reward_scale"] = world.reward_scale;
  return j;
}

WorldLayout layout_from_json(const nlohmann::json& meta) {
  try {
    WorldLayout layout;
    WorldConfig& c = layout.config;
    c.rows = meta.at("rows").get<int>();
    c.cols = meta.at("cols").get<int>();
    c.seed = meta.value("seed", std::uint64_t{0});
    c.discount = meta.value("discount", 0.99);
    c.terminal_prob = meta.value("terminal_prob", 0.1);
    if (meta.contains("object_rewards")) {
      const auto& r = meta["object_rewards"];
      c.star_reward = r.value("star", 1.0);
      c.plus_reward = r.value("plus", 0.9);
      c.dot_reward = r.value("dot", 0.2);
    }
    layout.objects[0] = cells_from_json(meta.at("objects").at("star"));
    layout.objects[1] = cells_from_json(meta.at("objects").at("plus"));
    layout.objects[2] = cells_from_json(meta.at("objects").at("dot"));
    layout.green = cells_from_json(meta.at("distractors").at("green"));
    layout.yellow = cells_from_json(meta.at("distractors").at("yellow"));
    return layout;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("bad world metadata: ") + e.what());
  }
}

}  // namespace lateach
