"""Coefficient vectors over the Hermite basis and their Sobolev norms."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .basis import HermiteBasis2D


@dataclass
class QuantumState:
    coefficients: np.ndarray
    basis: HermiteBasis2D
    time: float = 0.0

    def norm(self, s: float = 0.0) -> float:
        return sobolev_norm(self, s)

    def energy(self) -> float:
        """<H0> for the normalised state."""
        p = np.abs(self.coefficients) ** 2
        return float(np.sum(self.basis.energies() * p) / np.sum(p))

    def top_band_mass(self, bands: int = 5) -> float:
        p = np.abs(self.coefficients) ** 2
        return float(p[self.basis.degree > self.basis.N - bands].sum())

    def expectation(self, op) -> complex:
        c = self.coefficients
        return complex(np.vdot(c, op @ c))


def sobolev_norm(w: QuantumState, s: float) -> float:
    """(sum (n1+n2+1)^{2s} |c|^2)^{1/2}."""
    weights = w.basis.energies() ** (2.0 * s)
    return float(math.sqrt(np.sum(weights * np.abs(w.coefficients) ** 2)))


def coherent_state(z, basis: HermiteBasis2D, warn_mass: float = 1e-8) -> QuantumState:
    """Truncated coherent state centred at z = (x1, x2, xi1, xi2).

    c_{n1 n2} = exp(-|a|^2/2) a1^n1 a2^n2 / sqrt(n1! n2!) with
    a_j = (x_j + i xi_j)/sqrt(2), renormalised after truncation.
    """
    z = np.asarray(list(z), dtype=float)
    alpha = np.array([z[0] + 1j * z[2], z[1] + 1j * z[3]]) / math.sqrt(2.0)
    logc = -0.5 * np.sum(np.abs(alpha) ** 2) - 0.5 * (gammaln(basis.n1 + 1.0) + gammaln(basis.n2 + 1.0))
    coeff = np.ones(basis.dimension, dtype=complex)
    for a, n in zip(alpha, (basis.n1, basis.n2)):
        if a == 0:
            coeff *= np.where(n == 0, 1.0, 0.0)
        else:
            logc = logc + n * math.log(abs(a))
            coeff *= np.exp(1j * n * np.angle(a))
    coeff *= np.exp(logc)
    kept = float(np.sum(np.abs(coeff) ** 2))
    coeff /= math.sqrt(kept)
    state = QuantumState(coeff, basis)
    beyond, top = max(1.0 - kept, 0.0), state.top_band_mass()
    if beyond + top > warn_mass:
        warnings.warn(f"coherent state truncated: mass {beyond:.2e} beyond degree {basis.N}, "
                      f"{top:.2e} in the top bands", RuntimeWarning, stacklevel=2)
    return state


def random_low_energy_state(basis: HermiteBasis2D, max_degree: int, seed: int) -> QuantumState:
    """Normalised state with random Gaussian coefficients on degrees <= max_degree."""
    rng = np.random.default_rng(seed)
    c = rng.normal(size=basis.dimension) + 1j * rng.normal(size=basis.dimension)
    c[basis.degree > max_degree] = 0.0
    return QuantumState(c / np.linalg.norm(c), basis)
