#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "lateach/adaptive.hpp"
#include "lateach/errors.hpp"
#include "lateach/experiment.hpp"
#include "lateach/objectworld.hpp"
#include "lateach/teachers.hpp"

namespace py = pybind11;
using namespace lateach;

namespace {

HardLearnerConfig hard_config(const Mdp& mdp, double delta, double tol) {
  HardLearnerConfig hc;
  hc.constraints = learner_constraints(mdp, delta);
  hc.projection_tol = tol;
  return hc;
}

py::dict response_dict(const LearnerResponse& r) {
  py::dict d;
  d["policy"] = r.policy.probs;
  d["mu_r"] = r.mu.mu_r;
  d["mu_c"] = r.mu.mu_c;
  d["iterations"] = r.iterations;
  d["residual"] = r.residual;
  d["converged"] = r.converged;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Learner-aware teaching on object worlds";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<InfeasibleError>(m, "InfeasibleError", PyExc_RuntimeError);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);

  py::enum_<LearnerId>(m, "Learner")
      .value("L1", LearnerId::L1)
      .value("L2", LearnerId::L2)
      .value("L3", LearnerId::L3)
      .value("L4", LearnerId::L4)
      .value("L5", LearnerId::L5);

  py::class_<WorldConfig>(m, "WorldConfig")
      .def(py::init<>())
      .def_readwrite("rows", &WorldConfig::rows)
      .def_readwrite("cols", &WorldConfig::cols)
      .def_readwrite("seed", &WorldConfig::seed)
      .def_readwrite("discount", &WorldConfig::discount)
      .def_readwrite("terminal_prob", &WorldConfig::terminal_prob);

  py::class_<Mdp>(m, "Mdp")
      .def_property_readonly("n_states", &Mdp::n_states)
      .def_property_readonly("n_actions", &Mdp::n_actions)
      .def_property_readonly("d_r", &Mdp::d_r)
      .def_property_readonly("d_c", &Mdp::d_c)
      .def_property_readonly("discount", &Mdp::discount)
      .def_property_readonly("reward_weights", &Mdp::reward_weights)
      .def_property_readonly("features", &Mdp::features);

  py::class_<World>(m, "World")
      .def_readonly("mdp", &World::mdp)
      .def_readonly("reward_scale", &World::reward_scale)
      .def("object_reward", &World::object_reward, py::arg("mu_r"))
      .def("meta", [](const World& w) { return world_meta_to_json(w).dump(); });

  m.def(
      "generate_world",
      [](int grid, std::uint64_t seed, LearnerId learner) {
        WorldConfig cfg;
        cfg.rows = cfg.cols = grid;
        cfg.seed = seed;
        return generate_world(cfg, learner);
      },
      py::arg("grid") = 10, py::arg("seed") = 0, py::arg("learner") = LearnerId::L2);

  m.def(
      "feature_expectations",
      [](const Mdp& mdp, const Matrix& policy) {
        const FeatureExpectations mu = feature_expectations(mdp, Policy{policy});
        return py::make_tuple(mu.mu_r, mu.mu_c);
      },
      py::arg("mdp"), py::arg("policy"));
  m.def("optimal_policy", [](const Mdp& mdp) { return optimal_policy(mdp).probs; });
  m.def(
      "project_l2",
      [](const Mdp& mdp, const Vector& target, double tol) {
        const ProjectionResult p = project_l2(mdp, target, {}, tol);
        return py::make_tuple(p.point.mu.mu_r, p.distance, p.converged);
      },
      py::arg("mdp"), py::arg("target"), py::arg("tol") = 1e-5);

  m.def("teach_agnostic", [](const Mdp& mdp) { return teach_agnostic(mdp).mu_r; });
  m.def(
      "teach_aware_cmdp",
      [](const Mdp& mdp, double delta) { return teach_aware_cmdp(mdp, learner_constraints(mdp, delta)).mu_r; },
      py::arg("mdp"), py::arg("delta"));
  m.def(
      "teaching_value_gap",
      [](const Mdp& mdp, double delta) { return teaching_value_gap(mdp, learner_constraints(mdp, delta)); },
      py::arg("mdp"), py::arg("delta"));

  m.def(
      "soft_learner_respond",
      [](const Mdp& mdp, const Vector& target, double c_r, double c_c, double delta) {
        SoftLearnerConfig cfg;
        cfg.c_r = c_r;
        cfg.c_c = c_c;
        cfg.delta_hard_c = Vector::Constant(mdp.d_c(), delta);
        return response_dict(soft_learner_respond(mdp, target, cfg));
      },
      py::arg("mdp"), py::arg("target"), py::arg("c_r") = 5.0, py::arg("c_c") = 10.0,
      py::arg("delta") = 0.0);
  m.def(
      "hard_learner_respond",
      [](const Mdp& mdp, const Vector& target, double delta, double tol) {
        return response_dict(hard_learner_respond(mdp, target, hard_config(mdp, delta, tol)));
      },
      py::arg("mdp"), py::arg("target"), py::arg("delta"), py::arg("tol") = 1e-6);

  m.def(
      "interact",
      [](const Mdp& mdp, const std::string& strategy, double delta, int max_rounds) {
        if (strategy != "Greedy" && strategy != "Line") {
          throw InvalidArgument("strategy must be Greedy or Line");
        }
        const HardLearnerConfig hc = hard_config(mdp, delta, 1e-6);
        InteractionConfig ic;
        ic.max_rounds = max_rounds;
        const InteractionLog log = interact(
            mdp, strategy == "Greedy" ? Strategy::Greedy : Strategy::Line,
            [&](const Vector& t) { return hard_learner_respond(mdp, t, hc); }, ic);
        py::list rounds;
        for (const RoundRecord& r : log.rounds) {
          py::dict d;
          d["round"] = r.round;
          d["teacher_reward"] = r.teacher_reward;
          d["learner_reward"] = r.learner_reward;
          d["distance"] = r.distance;
          d["fallback_used"] = r.fallback_used;
          rounds.append(d);
        }
        return rounds;
      },
      py::arg("mdp"), py::arg("strategy"), py::arg("delta"), py::arg("max_rounds") = 50);

  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        const ExperimentConfig cfg = ExperimentConfig::from_json(nlohmann::json::parse(config_json));
        ExperimentOutput out;
        {
          py::gil_scoped_release release;
          out = run_experiment(cfg);
        }
        std::ostringstream csv;
        out.table.write_csv(csv);
        return py::make_tuple(csv.str(), out.curves_csv);
      },
      py::arg("config_json"),
      "Runs an experiment from a JSON config string; returns (results_csv, curves_csv).");
}
