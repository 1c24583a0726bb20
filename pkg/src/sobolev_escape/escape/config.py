"""Configuration of the escape-function builder: gluing ramp, tubes, density and radial cut-off."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..symbols import SymbolExpr, as_symbol
from ..window import smooth_step


class EscapeError(RuntimeError):
    """A constituent of the escape construction failed (basin not reached, overlapping tubes, ...)."""


@dataclass(frozen=True)
class EscapeConfig:
    """Parameters of the construction.

    ``None`` for ``delta_hat`` or a tube radius means "derive it": the tube
    radius defaults to half the radius certified by the weak-hyperbolicity
    check (the blending bumps reach out to twice the radius), and
    ``delta_hat`` to 0.8 times the sampled minimum of {h, k+-} over the bump
    supports.
    """

    eps: float = 0.05
    delta_hat: float | None = None
    tube_radius_plus: float | None = None
    tube_radius_minus: float | None = None
    f_tilde: str | SymbolExpr | None = None
    t1_cap: float = 200.0
    cutoff_inner: float = 0.25
    cutoff_outer: float = 1.0
    tol: float = 1e-10
    offset: float | None = None

    def __post_init__(self):
        if not 0 < self.eps <= 0.2:
            raise ValueError(f"eps must lie in (0, 0.2], got {self.eps}")
        if self.delta_hat is not None and not self.delta_hat > 0:
            raise ValueError("delta_hat must be positive")
        for name in ("tube_radius_plus", "tube_radius_minus"):
            r = getattr(self, name)
            if r is not None and not r > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.cutoff_inner < self.cutoff_outer:
            raise ValueError("cut-off needs 0 < cutoff_inner < cutoff_outer")
        if not self.t1_cap > 0:
            raise ValueError("t1_cap must be positive")

    @property
    def density(self) -> SymbolExpr | None:
        return None if self.f_tilde is None else as_symbol(self.f_tilde)

    @property
    def hitting_offset(self) -> float:
        """Shift of the hitting time so the ramp starts exactly on the K- tube boundary."""
        return -self.eps if self.offset is None else float(self.offset)

    def cutoff(self, rho) -> np.ndarray:
        """chi(rho): 1 on rho <= inner, 0 on rho >= outer, smooth and non-increasing between."""
        u = (np.asarray(rho, dtype=float) - self.cutoff_inner) / (self.cutoff_outer - self.cutoff_inner)
        return 1.0 - smooth_step(u)

    def cutoff_derivative(self, rho, step: float = 1e-6) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        return (self.cutoff(rho + step) - self.cutoff(rho - step)) / (2 * step)

    def to_dict(self) -> dict:
        return {
            "eps": self.eps, "delta_hat": self.delta_hat, "tube_radius_plus": self.tube_radius_plus,
            "tube_radius_minus": self.tube_radius_minus,
            "f_tilde": None if self.f_tilde is None else str(as_symbol(self.f_tilde)),
            "t1_cap": self.t1_cap, "cutoff": [self.cutoff_inner, self.cutoff_outer], "tol": self.tol,
            "offset": self.hitting_offset,
        }
