"""RRAM compact-model simulation, cell and crossbar analysis, and design verification."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    DeviceState,
    ModelParams,
    WindowKind,
    analytical_step,
    builtin,
    current,
    numeric_step,
    read_resistance,
)
from .stimulus import CharacterizationPlan, Mode, Segment, Waveform, build_characterization, discretize, pulse_train  # noqa: E402
from .transient import Trace, extract_rs_series, run_device  # noqa: E402

__all__ = [
    "CharacterizationPlan",
    "DeviceState",
    "Mode",
    "ModelParams",
    "Segment",
    "Trace",
    "Waveform",
    "WindowKind",
    "analytical_step",
    "build_characterization",
    "builtin",
    "current",
    "discretize",
    "extract_rs_series",
    "numeric_step",
    "pulse_train",
    "read_resistance",
    "run_device",
]
