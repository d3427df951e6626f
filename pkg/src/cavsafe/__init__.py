"""Safe coordination of connected automated vehicles at an intersection, with pedestrian emergencies."""

from .errors import CavSafeError, ParseError, ValidationError
from .scenario import ScenarioConfig, load_scenario, load_scenario_file
from .sim import SimResult, run

__all__ = ["CavSafeError", "ParseError", "ValidationError", "ScenarioConfig", "SimResult", "load_scenario",
           "load_scenario_file", "run"]
__version__ = "0.1.0"
