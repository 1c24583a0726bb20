"""Construction and sampled certification of escape functions on an energy shell."""
from .blend import BlendedBracket, build_m, bump
from .config import EscapeConfig, EscapeError
from .function import EscapeFunction, ShellValues, extend_escape, global_escape, gluing_eta
from .local import estimate_delta, k_bracket, k_symbol, local_escape
from .ramp import ramp, ramp_derivative, ramp_saturation
from .verify import (
    EscapeVerification,
    IntervalResult,
    MourreSymbolResult,
    effective_symbol,
    escape_interval,
    flow_derivative,
    hamiltonian_step,
    verify_escape,
    verify_mourre_symbol,
)
from ..window import MourreSpec

__all__ = [
    "BlendedBracket", "EscapeConfig", "EscapeError", "EscapeFunction", "EscapeVerification", "IntervalResult",
    "MourreSpec", "MourreSymbolResult", "ShellValues", "build_m", "bump", "effective_symbol", "escape_interval",
    "estimate_delta", "extend_escape", "flow_derivative", "global_escape", "gluing_eta", "hamiltonian_step",
    "k_bracket", "k_symbol", "local_escape", "ramp", "ramp_derivative", "ramp_saturation", "verify_escape",
    "verify_mourre_symbol",
]
