"""Reactive plan execution for block manipulation, with a stochastic blocks world and an expert-data generator."""

from .domain import Domain, GroundedSkill, Plan, SkillSchema, parse_domain, standard_domain
from .executor import ExecConfig, ExecOutcome, execute
from .logic import Atom, GoalConditions, LogicalState, Universe, is_consistent, parse_atom
from .planner import NoPlanFound, Planner, PlannerConfig, plan
from .sim import BlocksWorldEnv, FailureModel, Scenario, SensorModel, WorldState, parse_scenario, reset

__all__ = [
    "Atom", "BlocksWorldEnv", "Domain", "ExecConfig", "ExecOutcome", "FailureModel", "GoalConditions",
    "GroundedSkill", "LogicalState", "NoPlanFound", "Plan", "Planner", "PlannerConfig", "Scenario",
    "SensorModel", "SkillSchema", "Universe", "WorldState", "execute", "is_consistent", "parse_atom",
    "parse_domain", "parse_scenario", "plan", "reset", "standard_domain",
]
__version__ = "0.1.0"
