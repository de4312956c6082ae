#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "lateach/adaptive.hpp"
#include "lateach/learner.hpp"
#include "lateach/objectworld.hpp"
#include "json.hpp"

namespace lateach {

enum class ExperimentKind { KnownConstraints, UnknownConstraints, ValueGap };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment(const std::string& name);

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::KnownConstraints;
  std::vector<LearnerId> learners;  // empty: L1..L5 (known, value gap) or L2 (unknown)
  std::vector<std::string> teachers;  // empty: every teacher of the experiment
  std::vector<int> grid_sizes{10};
  int n_seeds = 10;
  std::uint64_t base_seed = 0;
  double c_r = 5.0;
  double c_c = 10.0;
  double soft_delta = 0.0;  // soft learner's preference thresholds (known constraints)
  double delta = 2.5;       // hard learner's box thresholds (unknown constraints, value gap)
  HardMode hard_mode = HardMode::ExactFrankWolfe;
  double projection_tol = 1e-6;
  InteractionConfig interaction;
  int bilevel_fw_iters = 30;
  int bilevel_line_evals = 30;
  int jobs = 1;
  std::string output_dir = "results";

  /// Throws InvalidArgument on unknown keys, bad values or n_seeds < 1.
  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  std::vector<LearnerId> effective_learners() const;
  std::vector<std::string> effective_teachers() const;
};

struct ResultRow {
  std::string teacher;
  std::string stage;  // "", "3rd" or "end"
  LearnerId learner = LearnerId::L1;
  int grid = 10;
  std::vector<double> values;       // per seed, NaN where the cell failed
  std::vector<std::string> errors;  // per seed, empty on success

  int n_ok() const;
  double mean() const;
  /// Sample standard deviation over successful seeds divided by sqrt(count).
  double standard_error() const;
};

struct ResultTable {
  std::vector<ResultRow> rows;

  /// Null when absent.
  const ResultRow* find(const std::string& teacher, LearnerId learner, int grid,
                        const std::string& stage = "") const;
  int failures() const;
  /// teacher,stage,learner,grid,n,mean,stderr,failures,values (values ';'-separated per seed).
  void write_csv(std::ostream& out) const;
};

struct ExperimentOutput {
  ResultTable table;
  std::string curves_csv;  // unknown constraints only
  double seconds = 0.0;
};

/// Soft learner on 10 seeded worlds per grid and learner, taught by Agn and AwareBiLevel.
ExperimentOutput run_known_constraints(const ExperimentConfig& cfg);

/// Hard learner with box thresholds cfg.delta, taught by the fixed and adaptive teachers.
ExperimentOutput run_unknown_constraints(const ExperimentConfig& cfg);

/// teaching_value_gap per seed and learner under thresholds cfg.delta.
ExperimentOutput run_value_gap(const ExperimentConfig& cfg);

ExperimentOutput run_experiment(const ExperimentConfig& cfg);

/// Writes results.csv, curves.csv (when non-empty) and meta.json into cfg.output_dir.
void write_experiment(const ExperimentConfig& cfg, const ExperimentOutput& out);

/// Runs task(i) for i in [0, n) on up to `jobs` threads. Exceptions escape after all tasks finish.
void parallel_for(int n, int jobs, const std::function<void(int)>& task);

}  // namespace lateach
