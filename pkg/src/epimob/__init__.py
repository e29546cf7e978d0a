"""Agent-based human-mobility and epidemic simulation with fast contact tracing."""

__version__ = "0.1.0"

from .engine import (RunResult, SimulationRun, benchmark_tracing,  # noqa: F401
                     compare_strategies, run)
from .epidemic import HealthLedger, HealthState  # noqa: F401
from .intervention import RestrictionLevel, StrategyConfig, resolve_strategy  # noqa: F401
from .mobility import OUT_OF_CIRCULATION, TrajectoryStore, build_templates  # noqa: F401
from .scenario import (CityModel, Scenario, ScenarioError, ScenarioParams,  # noqa: F401
                       TimeStep, generate_synthetic_city, load_scenario,
                       save_scenario)
from .tracing import basic_contact_tracing, fast_contact_tracing  # noqa: F401
