"""qsteer: multi-task reinforcement-learning pulse control for open quantum
systems, with a GRAPE baseline and a robustness evaluation harness."""

__version__ = "0.1.0"

from .catalog import CatalogEntry, build_catalog, get_entry, named_state
from .dynamics import (
    ControlledHamiltonian,
    DensityMatrix,
    LindbladChannel,
    PulseSchedule,
    amplitude_damping_channels,
    fidelity,
    liouvillian,
    propagate_closed,
    propagate_open,
)
from .env import EnvConfig, QuantumControlEnv
from .grape import GrapeConfig, GrapeResult, grape_optimize
from .robustness import PerturbationModel, rim, rim_campaign
from .sac import SacAgent, SacConfig, load_checkpoint, save_checkpoint, train

__all__ = [
    "CatalogEntry",
    "ControlledHamiltonian",
    "DensityMatrix",
    "EnvConfig",
    "GrapeConfig",
    "GrapeResult",
    "LindbladChannel",
    "PerturbationModel",
    "PulseSchedule",
    "QuantumControlEnv",
    "SacAgent",
    "SacConfig",
    "amplitude_damping_channels",
    "build_catalog",
    "fidelity",
    "get_entry",
    "grape_optimize",
    "liouvillian",
    "load_checkpoint",
    "named_state",
    "propagate_closed",
    "propagate_open",
    "rim",
    "rim_campaign",
    "save_checkpoint",
    "train",
    "__version__",
]
