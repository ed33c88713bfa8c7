"""Rewards, interval matching, and evaluation for temporal video understanding RL."""

from .evaluation import (
    EvalReport,
    RECALL_THRESHOLDS,
    Sample,
    TAL_THRESHOLDS,
    TaskBlock,
    aggregate,
    eval_dtg,
    eval_gvqa,
    eval_tal,
    eval_tg,
    eval_vhd,
)
from .grpo import (
    GrpoConfig,
    PromptSpec,
    RolloutGroup,
    Scenario,
    ScenarioError,
    SimulationResult,
    StepStats,
    ToyPolicy,
    clipped_objective,
    group_advantages,
    grpo_step,
    kl_divergence,
    load_scenario,
    run_simulation,
    standard_reward_fn,
    uniform_grid,
)
from .intervals import Interval, IntervalSet, iou, merge, set_iou
from .parsing import (
    ParsedOutput,
    ParseError,
    ParseFailure,
    TaskKind,
    extract_answer_text,
    extract_intervals,
    format_reward,
    parse,
    serialize,
)
from .records import DatasetError, load_dataset, render_report, write_dataset
from .rewards import (
    MatchResult,
    RewardBreakdown,
    TalConfig,
    brute_force_match,
    classification_reward,
    dp_match,
    instance_number_reward,
    reward_tal,
    reward_type1,
    reward_type2,
    sequential_match,
    total_reward,
)

__version__ = "0.1.0"

__all__ = [
    "EvalReport",
    "RECALL_THRESHOLDS",
    "Sample",
    "TAL_THRESHOLDS",
    "TaskBlock",
    "aggregate",
    "eval_dtg",
    "eval_gvqa",
    "eval_tal",
    "eval_tg",
    "eval_vhd",
    "GrpoConfig",
    "PromptSpec",
    "RolloutGroup",
    "Scenario",
    "ScenarioError",
    "SimulationResult",
    "StepStats",
    "ToyPolicy",
    "clipped_objective",
    "group_advantages",
    "grpo_step",
    "kl_divergence",
    "load_scenario",
    "run_simulation",
    "standard_reward_fn",
    "uniform_grid",
    "Interval",
    "IntervalSet",
    "iou",
    "merge",
    "set_iou",
    "ParsedOutput",
    "ParseError",
    "ParseFailure",
    "TaskKind",
    "extract_answer_text",
    "extract_intervals",
    "format_reward",
    "parse",
    "serialize",
    "DatasetError",
    "load_dataset",
    "render_report",
    "write_dataset",
    "MatchResult",
    "RewardBreakdown",
    "TalConfig",
    "brute_force_match",
    "classification_reward",
    "dp_match",
    "instance_number_reward",
    "reward_tal",
    "reward_type1",
    "reward_type2",
    "sequential_match",
    "total_reward",
]
