#include "lateach/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "lateach/errors.hpp"
#include "lateach/teachers.hpp"

namespace lateach {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::vector<std::string>& teachers_of(ExperimentKind kind) {
  static const std::vector<std::string> known{"Agn", "AwareBiLevel"};
  static const std::vector<std::string> unknown{"AwareCMDP", "Agn", "Con", "AdAwareGreedy",
                                                "AdAwareLine"};
  static const std::vector<std::string> none;
  switch (kind) {
    case ExperimentKind::KnownConstraints:
      return known;
    case ExperimentKind::UnknownConstraints:
      return unknown;
    case ExperimentKind::ValueGap:
      return none;
  }
  return none;
}

std::string hard_mode_name(HardMode m) {
  return m == HardMode::ExactFrankWolfe ? "ExactFrankWolfe" : "SoftApprox";
}

HardMode parse_hard_mode(const std::string& s) {
  if (s == "ExactFrankWolfe") return HardMode::ExactFrankWolfe;
  if (s == "SoftApprox") return HardMode::SoftApprox;
  throw InvalidArgument("unknown hard_mode '" + s + "'");
}

template <class T>
T get_as(const nlohmann::json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("config key '") + key + "': " + e.what());
  }
}

InteractionConfig interaction_from_json(const nlohmann::json& j) {
  static const std::set<std::string> keys{
      "max_rounds", "epsilon_stop", "epsilon_line_stop", "eta_shift",  "alpha_min",
      "alpha_max",  "epsilon_alpha", "epsilon_mu",       "projection_tol"};
  if (!j.is_object()) throw InvalidArgument("'interaction' must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!keys.count(k)) throw InvalidArgument("unknown interaction key '" + k + "'");
  }
  InteractionConfig c;
  if (j.contains("max_rounds")) c.max_rounds = get_as<int>(j, "max_rounds");
  if (j.contains("epsilon_stop")) c.epsilon_stop = get_as<double>(j, "epsilon_stop");
  if (j.contains("epsilon_line_stop")) c.epsilon_line_stop = get_as<double>(j, "epsilon_line_stop");
  if (j.contains("eta_shift")) c.eta_shift = get_as<double>(j, "eta_shift");
  if (j.contains("alpha_min")) c.alpha_min = get_as<double>(j, "alpha_min");
  if (j.contains("alpha_max")) c.alpha_max = get_as<double>(j, "alpha_max");
  if (j.contains("epsilon_alpha")) c.epsilon_alpha = get_as<double>(j, "epsilon_alpha");
  if (j.contains("epsilon_mu")) c.epsilon_mu = get_as<double>(j, "epsilon_mu");
  if (j.contains("projection_tol")) c.projection_tol = get_as<double>(j, "projection_tol");
  return c;
}

nlohmann::json interaction_to_json(const InteractionConfig& c) {
  return {{"max_rounds", c.max_rounds},       {"epsilon_stop", c.epsilon_stop},
          {"epsilon_line_stop", c.epsilon_line_stop}, {"eta_shift", c.eta_shift},
          {"alpha_min", c.alpha_min},         {"alpha_max", c.alpha_max},
          {"epsilon_alpha", c.epsilon_alpha}, {"epsilon_mu", c.epsilon_mu},
          {"projection_tol", c.projection_tol}};
}

void validate(const ExperimentConfig& c) {
  if (c.n_seeds < 1) throw InvalidArgument("n_seeds must be at least 1");
  if (c.jobs < 1) throw InvalidArgument("jobs must be at least 1");
  if (c.grid_sizes.empty()) throw InvalidArgument("grid_sizes must not be empty");
  for (int g : c.grid_sizes) {
    if (g < 4) throw InvalidArgument("grid sizes must be at least 4");
  }
  if (!(c.c_r > 0.0) || !(c.c_c >= 0.0)) throw InvalidArgument("c_r must be positive, c_c >= 0");
  if (!(c.delta >= 0.0) || !(c.soft_delta >= 0.0)) {
    throw InvalidArgument("delta thresholds must be non-negative");
  }
  if (!(c.projection_tol > 0.0)) throw InvalidArgument("projection_tol must be positive");
  if (c.bilevel_fw_iters < 1 || c.bilevel_line_evals < 1) {
    throw InvalidArgument("bilevel iteration counts must be positive");
  }
  const auto& allowed = teachers_of(c.experiment);
  for (const auto& t : c.teachers) {
    if (std::find(allowed.begin(), allowed.end(), t) == allowed.end()) {
      throw InvalidArgument("teacher '" + t + "' is not part of the " + to_string(c.experiment) +
                            " experiment");
    }
  }
}

WorldConfig world_config(int grid, std::uint64_t seed) {
  WorldConfig w;
  w.rows = grid;
  w.cols = grid;
  w.seed = seed;
  return w;
}

bool wants(const std::vector<std::string>& teachers, const std::string& name) {
  return std::find(teachers.begin(), teachers.end(), name) != teachers.end();
}

// One (grid, learner, seed) cell per task; results land in preallocated slots.
struct Cell3 {
  int grid;
  LearnerId learner;
  int seed;
};

std::vector<Cell3> enumerate_cells(const ExperimentConfig& cfg) {
  std::vector<Cell3> cells;
  for (int g : cfg.grid_sizes) {
    for (LearnerId l : cfg.effective_learners()) {
      for (int s = 0; s < cfg.n_seeds; ++s) cells.push_back({g, l, s});
    }
  }
  return cells;
}

// Row names of an experiment, in output order.
std::vector<std::pair<std::string, std::string>> row_keys(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> keys;
  if (cfg.experiment == ExperimentKind::ValueGap) return {{"ValueGap", ""}};
  for (const auto& t : cfg.effective_teachers()) {
    if (t == "AdAwareGreedy" || t == "AdAwareLine") {
      keys.emplace_back(t, "3rd");
      keys.emplace_back(t, "end");
    } else {
      keys.emplace_back(t, "");
    }
  }
  return keys;
}

// Per-cell outcome: one value per row key, plus optional curve text per teacher.
struct CellResult {
  std::vector<double> values;
  std::vector<std::string> errors;
  std::vector<std::string> curves;  // indexed like effective_teachers()
};

ResultTable assemble(const ExperimentConfig& cfg, const std::vector<Cell3>& cells,
                     const std::vector<CellResult>& results) {
  const auto keys = row_keys(cfg);
  ResultTable table;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    for (int g : cfg.grid_sizes) {
      for (LearnerId l : cfg.effective_learners()) {
        ResultRow row;
        row.teacher = keys[k].first;
        row.stage = keys[k].second;
        row.learner = l;
        row.grid = g;
        for (std::size_t c = 0; c < cells.size(); ++c) {
          if (cells[c].grid != g || cells[c].learner != l) continue;
          row.values.push_back(results[c].values[k]);
          row.errors.push_back(results[c].errors[k]);
        }
        table.rows.push_back(std::move(row));
      }
    }
  }
  return table;
}

template <class Fn>
void run_guarded(CellResult& out, std::size_t k, Fn&& fn) {
  try {
    out.values[k] = fn();
    if (!std::isfinite(out.values[k])) {
      out.errors[k] = "non-finite reward";
      out.values[k] = kNaN;
    }
  } catch (const std::exception& e) {
    out.values[k] = kNaN;
    out.errors[k] = e.what();
  }
}

void fail_all(CellResult& out, const std::string& what) {
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    out.values[k] = kNaN;
    out.errors[k] = what;
  }
}

std::string curve_chunk(const Cell3& cell, std::uint64_t seed, const InteractionLog& log,
                        double scale) {
  std::ostringstream body;
  log.write_csv(body, scale, false);
  std::ostringstream out;
  std::istringstream lines(body.str());
  std::string line;
  while (std::getline(lines, line)) {
    out << cell.grid << ',' << to_string(cell.learner) << ',' << seed << ',' << line << '\n';
  }
  return out.str();
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::KnownConstraints:
      return "KnownConstraints";
    case ExperimentKind::UnknownConstraints:
      return "UnknownConstraints";
    case ExperimentKind::ValueGap:
      return "ValueGap";
  }
  return "?";
}

ExperimentKind parse_experiment(const std::string& name) {
  for (auto k : {ExperimentKind::KnownConstraints, ExperimentKind::UnknownConstraints,
                 ExperimentKind::ValueGap}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidArgument("unknown experiment '" + name + "'");
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> keys{
      "experiment", "learners",       "teachers",    "grid_sizes",       "n_seeds",
      "base_seed",  "c_r",            "c_c",         "soft_delta",       "delta",
      "hard_mode",  "projection_tol", "interaction", "bilevel_fw_iters", "bilevel_line_evals",
      "jobs",       "output_dir"};
  if (!j.is_object()) throw InvalidArgument("experiment config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!keys.count(k)) throw InvalidArgument("unknown config key '" + k + "'");
  }
  ExperimentConfig c;
  if (j.contains("experiment")) c.experiment = parse_experiment(get_as<std::string>(j, "experiment"));
  if (j.contains("learners")) {
    for (const auto& name : get_as<std::vector<std::string>>(j, "learners")) {
      c.learners.push_back(parse_learner(name));
    }
  }
  if (j.contains("teachers")) c.teachers = get_as<std::vector<std::string>>(j, "teachers");
  if (j.contains("grid_sizes")) c.grid_sizes = get_as<std::vector<int>>(j, "grid_sizes");
  if (j.contains("n_seeds")) c.n_seeds = get_as<int>(j, "n_seeds");
  if (j.contains("base_seed")) c.base_seed = get_as<std::uint64_t>(j, "base_seed");
  if (j.contains("c_r")) c.c_r = get_as<double>(j, "c_r");
  if (j.contains("c_c")) c.c_c = get_as<double>(j, "c_c");
  if (j.contains("soft_delta")) c.soft_delta = get_as<double>(j, "soft_delta");
  if (j.contains("delta")) c.delta = get_as<double>(j, "delta");
  if (j.contains("hard_mode")) c.hard_mode = parse_hard_mode(get_as<std::string>(j, "hard_mode"));
  if (j.contains("projection_tol")) c.projection_tol = get_as<double>(j, "projection_tol");
  if (j.contains("interaction")) c.interaction = interaction_from_json(j.at("interaction"));
  if (j.contains("bilevel_fw_iters")) c.bilevel_fw_iters = get_as<int>(j, "bilevel_fw_iters");
  if (j.contains("bilevel_line_evals")) c.bilevel_line_evals = get_as<int>(j, "bilevel_line_evals");
  if (j.contains("jobs")) c.jobs = get_as<int>(j, "jobs");
  if (j.contains("output_dir")) c.output_dir = get_as<std::string>(j, "output_dir");
  validate(c);
  return c;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json learners_json = nlohmann::json::array();
  for (LearnerId l : effective_learners()) learners_json.push_back(to_string(l));
  return {{"experiment", to_string(experiment)},
          {"learners", learners_json},
          {"teachers", effective_teachers()},
          {"grid_sizes", grid_sizes},
          {"n_seeds", n_seeds},
          {"base_seed", base_seed},
          {"c_r", c_r},
          {"c_c", c_c},
          {"soft_delta", soft_delta},
          {"delta", delta},
          {"hard_mode", hard_mode_name(hard_mode)},
          {"projection_tol", projection_tol},
          {"interaction", interaction_to_json(interaction)},
          {"bilevel_fw_iters", bilevel_fw_iters},
          {"bilevel_line_evals", bilevel_line_evals},
          {"jobs", jobs},
          {"output_dir", output_dir}};
}

std::vector<LearnerId> ExperimentConfig::effective_learners() const {
  if (!learners.empty()) return learners;
  if (experiment == ExperimentKind::UnknownConstraints) return {LearnerId::L2};
  return {LearnerId::L1, LearnerId::L2, LearnerId::L3, LearnerId::L4, LearnerId::L5};
}

std::vector<std::string> ExperimentConfig::effective_teachers() const {
  return teachers.empty() ? teachers_of(experiment) : teachers;
}

int ResultRow::n_ok() const {
  return static_cast<int>(std::count_if(values.begin(), values.end(),
                                        [](double v) { return std::isfinite(v); }));
}

double ResultRow::mean() const {
  const int n = n_ok();
  if (n == 0) return kNaN;
  double s = 0.0;
  for (double v : values) {
    if (std::isfinite(v)) s += v;
  }
  return s / n;
}

double ResultRow::standard_error() const {
  const int n = n_ok();
  if (n == 0) return kNaN;
  if (n == 1) return 0.0;
  const double m = mean();
  double ss = 0.0;
  for (double v : values) {
    if (std::isfinite(v)) ss += (v - m) * (v - m);
  }
  return std::sqrt(ss / (n - 1)) / std::sqrt(static_cast<double>(n));
}

const ResultRow* ResultTable::find(const std::string& teacher, LearnerId learner, int grid,
                                   const std::string& stage) const {
  for (const auto& r : rows) {
    if (r.teacher == teacher && r.learner == learner && r.grid == grid && r.stage == stage) return &r;
  }
  return nullptr;
}

int ResultTable::failures() const {
  int n = 0;
  for (const auto& r : rows) n += static_cast<int>(r.values.size()) - r.n_ok();
  return n;
}

void ResultTable::write_csv(std::ostream& out) const {
  out << "teacher,stage,learner,grid,n,mean,stderr,failures,values\n";
  std::ostringstream buf;
  buf << std::setprecision(10);
  for (const auto& r : rows) {
    buf << r.teacher << ',' << r.stage << ',' << to_string(r.learner) << ',' << r.grid << ','
        << r.n_ok() << ',' << r.mean() << ',' << r.standard_error() << ','
        << (static_cast<int>(r.values.size()) - r.n_ok()) << ',';
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      if (i) buf << ';';
      buf << r.values[i];
    }
    buf << '\n';
  }
  out << buf.str();
}

void parallel_for(int n, int jobs, const std::function<void(int)>& task) {
  if (n <= 0) return;
  const int workers = std::max(1, std::min(jobs, n));
  std::atomic<int> next{0};
  std::exception_ptr first;
  std::mutex mu;
  auto loop = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        task(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    loop();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(loop);
    for (auto& t : pool) t.join();
  }
  if (first) std::rethrow_exception(first);
}

ExperimentOutput run_known_constraints(const ExperimentConfig& cfg) {
  validate(cfg);
  if (cfg.experiment != ExperimentKind::KnownConstraints) {
    throw InvalidArgument("run_known_constraints needs a KnownConstraints config");
  }
  const auto start = std::chrono::steady_clock::now();
  const auto cells = enumerate_cells(cfg);
  const auto keys = row_keys(cfg);
  std::vector<CellResult> results(cells.size());
  parallel_for(static_cast<int>(cells.size()), cfg.jobs, [&](int i) {
    const Cell3& cell = cells[static_cast<std::size_t>(i)];
    CellResult& out = results[static_cast<std::size_t>(i)];
    out.values.assign(keys.size(), kNaN);
    out.errors.assign(keys.size(), "");
    try {
      const World w = generate_world(world_config(cell.grid, cfg.base_seed + cell.seed), cell.learner);
      SoftLearnerConfig lc;
      lc.c_r = cfg.c_r;
      lc.c_c = cfg.c_c;
      lc.delta_hard_c = Vector::Constant(w.mdp.d_c(), cfg.soft_delta);
      const LearnerResponse agn = soft_learner_respond(w.mdp, teach_agnostic(w.mdp).mu_r, lc);
      for (std::size_t k = 0; k < keys.size(); ++k) {
        if (keys[k].first == "Agn") {
          run_guarded(out, k, [&] { return w.object_reward(agn.mu.mu_r); });
        } else {
          run_guarded(out, k, [&] {
            BiLevelConfig bc;
            bc.c_r = cfg.c_r;
            bc.c_c = cfg.c_c;
            bc.delta_hard_c = lc.delta_hard_c;
            bc.fw_iters = cfg.bilevel_fw_iters;
            bc.line_evals = cfg.bilevel_line_evals;
            bc.agnostic_duals = agn.duals;
            const BiLevelResult bl = teach_aware_bilevel(w.mdp, bc);
            return w.object_reward(soft_learner_respond(w.mdp, bl.signal.mu_r, lc).mu.mu_r);
          });
        }
      }
    } catch (const std::exception& e) {
      fail_all(out, e.what());
    }
  });
  ExperimentOutput out;
  out.table = assemble(cfg, cells, results);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

ExperimentOutput run_unknown_constraints(const ExperimentConfig& cfg) {
  validate(cfg);
  if (cfg.experiment != ExperimentKind::UnknownConstraints) {
    throw InvalidArgument("run_unknown_constraints needs an UnknownConstraints config");
  }
  const auto start = std::chrono::steady_clock::now();
  const auto cells = enumerate_cells(cfg);
  const auto keys = row_keys(cfg);
  const auto teachers = cfg.effective_teachers();
  std::vector<CellResult> results(cells.size());
  parallel_for(static_cast<int>(cells.size()), cfg.jobs, [&](int i) {
    const Cell3& cell = cells[static_cast<std::size_t>(i)];
    CellResult& out = results[static_cast<std::size_t>(i)];
    out.values.assign(keys.size(), kNaN);
    out.errors.assign(keys.size(), "");
    out.curves.assign(teachers.size(), "");
    const std::uint64_t seed = cfg.base_seed + cell.seed;
    try {
      const World w = generate_world(world_config(cell.grid, seed), cell.learner);
      HardLearnerConfig hc;
      hc.constraints = learner_constraints(w.mdp, cfg.delta);
      hc.projection_tol = cfg.projection_tol;
      hc.mode = cfg.hard_mode;
      const LearnerFn learner = [&](const Vector& target) {
        return hard_learner_respond(w.mdp, target, hc);
      };
      auto respond = [&](const Vector& mu_r) { return w.object_reward(learner(mu_r).mu.mu_r); };

      std::size_t k = 0;
      for (std::size_t t = 0; t < teachers.size(); ++t) {
        const std::string& name = teachers[t];
        if (name == "AwareCMDP") {
          run_guarded(out, k++, [&] { return respond(teach_aware_cmdp(w.mdp, hc.constraints).mu_r); });
        } else if (name == "Agn") {
          run_guarded(out, k++, [&] { return respond(teach_agnostic(w.mdp).mu_r); });
        } else if (name == "Con") {
          run_guarded(out, k++, [&] {
            const Mdp full = build_world(w.layout, LearnerId::L5);
            return respond(teach_conservative(full, learner_constraints(full, cfg.delta)).mu_r);
          });
        } else {
          const Strategy s = name == "AdAwareGreedy" ? Strategy::Greedy : Strategy::Line;
          try {
            const InteractionLog log = interact(w.mdp, s, learner, cfg.interaction);
            out.values[k] = w.reward_scale * log.at_round(3).learner_reward;
            out.values[k + 1] = w.reward_scale * log.rounds.back().learner_reward;
            out.curves[t] = curve_chunk(cell, seed, log, w.reward_scale);
          } catch (const std::exception& e) {
            out.errors[k] = out.errors[k + 1] = e.what();
          }
          k += 2;
        }
      }
    } catch (const std::exception& e) {
      fail_all(out, e.what());
    }
  });

  ExperimentOutput out;
  out.table = assemble(cfg, cells, results);
  std::ostringstream curves;
  bool any = false;
  for (std::size_t t = 0; t < teachers.size(); ++t) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (t < results[c].curves.size() && !results[c].curves[t].empty()) {
        if (!any) {
          curves << "grid,learner,seed,round,teacher_reward,learner_reward,distance,strategy,"
                    "fallback_used\n";
          any = true;
        }
        curves << results[c].curves[t];
      }
    }
  }
  out.curves_csv = curves.str();
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

ExperimentOutput run_value_gap(const ExperimentConfig& cfg) {
  validate(cfg);
  if (cfg.experiment != ExperimentKind::ValueGap) {
    throw InvalidArgument("run_value_gap needs a ValueGap config");
  }
  const auto start = std::chrono::steady_clock::now();
  const auto cells = enumerate_cells(cfg);
  std::vector<CellResult> results(cells.size());
  parallel_for(static_cast<int>(cells.size()), cfg.jobs, [&](int i) {
    const Cell3& cell = cells[static_cast<std::size_t>(i)];
    CellResult& out = results[static_cast<std::size_t>(i)];
    out.values.assign(1, kNaN);
    out.errors.assign(1, "");
    run_guarded(out, 0, [&] {
      const World w = generate_world(world_config(cell.grid, cfg.base_seed + cell.seed), cell.learner);
      return w.reward_scale *
             teaching_value_gap(w.mdp, learner_constraints(w.mdp, cfg.delta), cfg.projection_tol);
    });
  });
  ExperimentOutput out;
  out.table = assemble(cfg, cells, results);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.experiment) {
    case ExperimentKind::KnownConstraints:
      return run_known_constraints(cfg);
    case ExperimentKind::UnknownConstraints:
      return run_unknown_constraints(cfg);
    case ExperimentKind::ValueGap:
      return run_value_gap(cfg);
  }
  throw InvalidArgument("unknown experiment kind");
}

void write_experiment(const ExperimentConfig& cfg, const ExperimentOutput& out) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw Error("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("results.csv");
    out.table.write_csv(f);
  }
  if (!out.curves_csv.empty()) {
    auto f = open("curves.csv");
    f << out.curves_csv;
  }
  nlohmann::json meta;
  meta["config"] = cfg.to_json();
  nlohmann::json errors = nlohmann::json::array();
  for (const auto& r : out.table.rows) {
    for (std::size_t s = 0; s < r.errors.size(); ++s) {
      if (r.errors[s].empty()) continue;
      errors.push_back({{"teacher", r.teacher},
                        {"stage", r.stage},
                        {"learner", to_string(r.learner)},
                        {"grid", r.grid},
                        {"seed", cfg.base_seed + s},
                        {"error", r.errors[s]}});
    }
  }
  meta["failures"] = errors;
  auto f = open("meta.json");
  f << meta.dump(2) << '\n';
}

}  // namespace lateach
