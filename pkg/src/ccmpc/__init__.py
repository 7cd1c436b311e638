"""Chance-constrained multi-agent trajectory planning.

Plans are computed as mixed-integer linear programs under one of three
collision encodings: sample approximation (``sa``), regions of increased
probability of presence (``ripp``) and a worst-case tightened baseline
(``robust``).
"""
from .planner import PlanResult, plan, prepare, receding_horizon
from .scenario import (
    AgentSpec,
    Mode,
    NoiseSpec,
    ObstacleRect,
    ScenarioConfig,
    example_scenario,
    head_on_scenario,
    load_scenario,
    random_scenario,
    save_scenario,
)
from .validate import McReport, audit_complexity, mc_collision_prob, suboptimality

__all__ = [
    "AgentSpec",
    "McReport",
    "Mode",
    "NoiseSpec",
    "ObstacleRect",
    "PlanResult",
    "ScenarioConfig",
    "audit_complexity",
    "example_scenario",
    "head_on_scenario",
    "load_scenario",
    "mc_collision_prob",
    "plan",
    "prepare",
    "random_scenario",
    "receding_horizon",
    "save_scenario",
    "suboptimality",
]
