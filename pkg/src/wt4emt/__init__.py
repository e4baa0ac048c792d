"""EMT benchmark of a type-4 wind turbine with a swappable PLL stepper.

The electrical network integrates with trapezoidal companion models; the
converter control chain runs one interface step behind the network.  The PLL
can be stepped three ways: a one-step-delayed explicit update, an implicit
Newton solve, or a trained neural surrogate loaded from a portable weights
file.
"""

from .circuit import Element, NodalSystem, companion_of, update_history
from .control import ControlParams, ControlState, PllState
from .engine import (
    Event,
    Metrics,
    Scenario,
    SimResult,
    compare,
    random_events,
    scenario_from_json,
    simulate,
)
from .errors import SimError
from .pinn_inference import MlpParams, load_weights, save_weights
from .wt4_model import Wt4Params, Wt4System, build, init_steady_state

__version__ = "0.1.0"

__all__ = [
    "Element", "NodalSystem", "companion_of", "update_history",
    "ControlParams", "ControlState", "PllState",
    "Event", "Metrics", "Scenario", "SimResult",
    "compare", "random_events", "scenario_from_json", "simulate",
    "SimError", "MlpParams", "load_weights", "save_weights",
    "Wt4Params", "Wt4System", "build", "init_steady_state",
    "__version__",
]
