"""Simulation and fitting toolkit for whispering-gallery electro-optic
microwave-to-optical converters."""

from .core import ConverterSystem, MicrowaveMode, OpticalMode, Polarization
from .engine import (
    ConversionResult,
    SteadyState,
    cooperativity,
    detuning_scheme_pump_penalty,
    infer_g_from_slope,
    sideband_powers,
    sideband_powers_undepleted,
    solve_steady_state,
    suppression,
)
from .errors import EOConvError

__version__ = "0.1.0"

__all__ = [
    "ConverterSystem",
    "ConversionResult",
    "EOConvError",
    "MicrowaveMode",
    "OpticalMode",
    "Polarization",
    "SteadyState",
    "cooperativity",
    "detuning_scheme_pump_penalty",
    "infer_g_from_slope",
    "sideband_powers",
    "sideband_powers_undepleted",
    "solve_steady_state",
    "suppression",
]
