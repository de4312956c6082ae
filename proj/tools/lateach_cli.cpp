// Command-line front end: world generation, single teaching runs and batch experiments.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "lateach/adaptive.hpp"
#include "lateach/errors.hpp"
#include "lateach/experiment.hpp"
#include "lateach/objectworld.hpp"
#include "lateach/teachers.hpp"

using namespace lateach;
namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitCellFailure = 3;

struct WorldArgs {
  int grid = 10;
  std::uint64_t seed = 0;
  std::string learner = "L2";
  std::string world_meta;  // load layout instead of generating
};

void add_world_options(CLI::App* cmd, WorldArgs& w) {
  cmd->add_option("--grid", w.grid, "Grid side length")->check(CLI::Range(4, 100));
  cmd->add_option("--seed", w.seed, "World seed");
  cmd->add_option("--learner", w.learner, "Learner model L1..L5");
  cmd->add_option("--world", w.world_meta, "Load the layout from a world_meta.json")
      ->check(CLI::ExistingFile);
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(path + ": " + e.what());
  }
}

World load_world(const WorldArgs& a) {
  const LearnerId learner = parse_learner(a.learner);
  if (a.world_meta.empty()) {
    WorldConfig cfg;
    cfg.rows = cfg.cols = a.grid;
    cfg.seed = a.seed;
    return generate_world(cfg, learner);
  }
  WorldLayout layout = layout_from_json(read_json(a.world_meta));
  Mdp mdp = build_world(layout, learner);
  const double scale = reward_scale(layout.config);
  return World{std::move(layout), learner, std::move(mdp), scale};
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f << text;
}

nlohmann::json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

int cmd_generate(const WorldArgs& a, const std::string& out) {
  const World w = load_world(a);
  const fs::path dir(out.empty() ? "." : out);
  fs::create_directories(dir);
  write_text((dir / "world.json").string(), mdp_to_json(w.mdp).dump() + "\n");
  write_text((dir / "world_meta.json").string(), world_meta_to_json(w).dump(2) + "\n");
  std::cerr << "wrote " << (dir / "world.json").string() << " and world_meta.json\n";
  return 0;
}

struct TeachArgs {
  std::string teacher = "AwareCMDP";
  double delta = 2.5;
  double soft_delta = 0.0;
  double c_r = 5.0;
  double c_c = 10.0;
};

int cmd_teach(const WorldArgs& a, const TeachArgs& t, const std::string& out) {
  const World w = load_world(a);
  nlohmann::json j;
  j["teacher"] = t.teacher;
  j["learner"] = to_string(w.learner);
  j["seed"] = w.layout.config.seed;
  if (t.teacher == "AwareBiLevel" || t.teacher == "AgnSoft") {
    SoftLearnerConfig lc;
    lc.c_r = t.c_r;
    lc.c_c = t.c_c;
    lc.delta_hard_c = Vector::Constant(w.mdp.d_c(), t.soft_delta);
    const TeachingSignal agn = teach_agnostic(w.mdp);
    const LearnerResponse ra = soft_learner_respond(w.mdp, agn.mu_r, lc);
    TeachingSignal signal = agn;
    if (t.teacher == "AwareBiLevel") {
      BiLevelConfig bc;
      bc.c_r = t.c_r;
      bc.c_c = t.c_c;
      bc.delta_hard_c = lc.delta_hard_c;
      bc.agnostic_duals = ra.duals;
      signal = teach_aware_bilevel(w.mdp, bc).signal;
    }
    const LearnerResponse r = soft_learner_respond(w.mdp, signal.mu_r, lc);
    j["teacher_mu_r"] = vec_json(signal.mu_r);
    j["teacher_reward"] = w.object_reward(signal.mu_r);
    j["learner_mu_r"] = vec_json(r.mu.mu_r);
    j["learner_mu_c"] = vec_json(r.mu.mu_c);
    j["learner_reward"] = w.object_reward(r.mu.mu_r);
  } else {
    HardLearnerConfig hc;
    hc.constraints = learner_constraints(w.mdp, t.delta);
    TeachingSignal signal;
    if (t.teacher == "Agn") {
      signal = teach_agnostic(w.mdp);
    } else if (t.teacher == "AwareCMDP") {
      signal = teach_aware_cmdp(w.mdp, hc.constraints);
    } else if (t.teacher == "Con") {
      const Mdp full = build_world(w.layout, LearnerId::L5);
      signal = teach_conservative(full, learner_constraints(full, t.delta));
    } else {
      throw InvalidArgument("unknown teacher '" + t.teacher +
                            "' (Agn, AgnSoft, Con, AwareCMDP, AwareBiLevel)");
    }
    const LearnerResponse r = hard_learner_respond(w.mdp, signal.mu_r, hc);
    j["teacher_mu_r"] = vec_json(signal.mu_r);
    j["teacher_reward"] = w.object_reward(signal.mu_r);
    j["learner_mu_r"] = vec_json(r.mu.mu_r);
    j["learner_mu_c"] = vec_json(r.mu.mu_c);
    j["learner_reward"] = w.object_reward(r.mu.mu_r);
  }
  write_text(out, j.dump(2) + "\n");
  return 0;
}

int cmd_interact(const WorldArgs& a, const std::string& strategy, double delta,
                 const InteractionConfig& ic, const std::string& out) {
  Strategy s;
  if (strategy == "Greedy") {
    s = Strategy::Greedy;
  } else if (strategy == "Line") {
    s = Strategy::Line;
  } else {
    throw InvalidArgument("unknown strategy '" + strategy + "' (Greedy, Line)");
  }
  const World w = load_world(a);
  HardLearnerConfig hc;
  hc.constraints = learner_constraints(w.mdp, delta);
  const InteractionLog log = interact(
      w.mdp, s, [&](const Vector& t) { return hard_learner_respond(w.mdp, t, hc); }, ic);
  std::ostringstream csv;
  log.write_csv(csv, w.reward_scale);
  write_text(out, csv.str());
  std::cerr << log.rounds.size() << " rounds, final learner reward "
            << w.reward_scale * log.rounds.back().learner_reward
            << (log.stopped_by_criterion ? "" : " (round limit)") << '\n';
  return 0;
}

int run_config(ExperimentConfig cfg, const std::string& out, std::optional<std::uint64_t> seed,
               int jobs) {
  if (!out.empty()) cfg.output_dir = out;
  if (seed) cfg.base_seed = *seed;
  if (jobs > 0) cfg.jobs = jobs;
  const ExperimentOutput result = run_experiment(cfg);
  write_experiment(cfg, result);
  std::cerr << to_string(cfg.experiment) << ": " << result.table.rows.size() << " rows in "
            << result.seconds << " s, written to " << cfg.output_dir << '\n';
  for (const auto& r : result.table.rows) {
    std::cerr << "  " << r.teacher << (r.stage.empty() ? "" : " (" + r.stage + ")") << ' '
              << to_string(r.learner) << ' ' << r.grid << "x" << r.grid << ": " << r.mean()
              << " +- " << r.standard_error() << '\n';
  }
  if (result.table.failures() > 0) {
    std::cerr << result.table.failures() << " cell(s) failed; see meta.json\n";
    return kExitCellFailure;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learner-aware teaching experiments on object worlds"};
  app.require_subcommand(1);

  WorldArgs world;
  std::string out;
  std::optional<std::uint64_t> seed_override;
  int jobs = 0;

  auto* gen = app.add_subcommand("generate-world", "Write world.json and world_meta.json");
  add_world_options(gen, world);
  gen->add_option("--out", out, "Output directory");

  TeachArgs teach;
  auto* tc = app.add_subcommand("teach", "Teach one learner once and report its reward");
  add_world_options(tc, world);
  tc->add_option("--teacher", teach.teacher, "Agn, AgnSoft, Con, AwareCMDP or AwareBiLevel");
  tc->add_option("--delta", teach.delta, "Hard-constraint threshold");
  tc->add_option("--soft-delta", teach.soft_delta, "Soft learner threshold");
  tc->add_option("--c-r", teach.c_r, "Soft learner reward-mismatch penalty");
  tc->add_option("--c-c", teach.c_c, "Soft learner preference penalty");
  tc->add_option("--out", out, "Output JSON file (default stdout)");

  std::string strategy = "Greedy";
  double delta = 2.5;
  InteractionConfig ic;
  auto* it = app.add_subcommand("interact", "Adaptive teaching with unknown constraints");
  add_world_options(it, world);
  it->add_option("--strategy", strategy, "Greedy or Line");
  it->add_option("--delta", delta, "Learner's hidden threshold");
  it->add_option("--max-rounds", ic.max_rounds, "Round limit")->check(CLI::PositiveNumber);
  it->add_option("--eta", ic.eta_shift, "Halfspace shift");
  it->add_option("--epsilon", ic.epsilon_stop, "Greedy stopping distance");
  it->add_option("--out", out, "Output CSV (default stdout)");

  std::string config_path;
  auto* ex = app.add_subcommand("experiment", "Run an experiment from a JSON config");
  ex->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  ex->add_option("--out", out, "Output directory (overrides output_dir)");
  ex->add_option("--seed", seed_override, "Base seed (overrides base_seed)");
  ex->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  int n_seeds = 10;
  std::vector<std::string> learners;
  auto* vg = app.add_subcommand("value-gap", "Teaching value gap of the learner-aware teacher");
  vg->add_option("--config", config_path, "Config file")->check(CLI::ExistingFile);
  vg->add_option("--learners", learners, "Learner models");
  vg->add_option("--n-seeds", n_seeds, "Number of worlds")->check(CLI::PositiveNumber);
  vg->add_option("--delta", delta, "Constraint threshold");
  vg->add_option("--out", out, "Output directory");
  vg->add_option("--seed", seed_override, "Base seed");
  vg->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) return cmd_generate(world, out);
    if (*tc) return cmd_teach(world, teach, out);
    if (*it) return cmd_interact(world, strategy, delta, ic, out);
    if (*ex) return run_config(ExperimentConfig::from_json(read_json(config_path)), out, seed_override, jobs);
    if (*vg) {
      ExperimentConfig cfg;
      if (!config_path.empty()) cfg = ExperimentConfig::from_json(read_json(config_path));
      cfg.experiment = ExperimentKind::ValueGap;
      cfg.teachers.clear();
      if (!learners.empty()) {
        cfg.learners.clear();
        for (const auto& l : learners) cfg.learners.push_back(parse_learner(l));
      }
      if (vg->count("--n-seeds")) cfg.n_seeds = n_seeds;
      if (vg->count("--delta")) cfg.delta = delta;
      if (out.empty() && config_path.empty()) out = "value_gap";
      return run_config(cfg, out, seed_override, jobs);
    }
  } catch (const InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
