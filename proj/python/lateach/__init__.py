"""Python bindings for the lateach teaching library."""

from ._core import (
    ConvergenceError,
    InfeasibleError,
    InvalidArgument,
    Learner,
    Mdp,
    World,
    WorldConfig,
    feature_expectations,
    generate_world,
    hard_learner_respond,
    interact,
    optimal_policy,
    project_l2,
    run_experiment,
    soft_learner_respond,
    teach_agnostic,
    teach_aware_cmdp,
    teaching_value_gap,
)

__all__ = [
    "ConvergenceError",
    "InfeasibleError",
    "InvalidArgument",
    "Learner",
    "Mdp",
    "World",
    "WorldConfig",
    "feature_expectations",
    "generate_world",
    "hard_learner_respond",
    "interact",
    "optimal_policy",
    "project_l2",
    "run_experiment",
    "soft_learner_respond",
    "teach_agnostic",
    "teach_aware_cmdp",
    "teaching_value_gap",
]
