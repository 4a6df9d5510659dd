from .config import ScenarioConfig, parse_config, build_config
from .engine import run_simulation, run_baseline, run_iteration, SimulationState
from .presets import PRESETS, run_preset
from .errors import *

__version__ = "v0.1.0"
