"""Hermite-spectral quantization, propagation and growth measurement."""
from .basis import HermiteBasis2D
from .evolution import EigenPropagator, evolve, split_step_floquet
from .growth import GrowthReport, WindowTooShortError, growth_report
from .probes import MatrixMourreResult, egorov_residual, matrix_mourre_check, mourre_matrices
from .states import QuantumState, coherent_state, random_low_energy_state, sobolev_norm
from .weyl import (OperatorMatrix, QuadratureError, assemble_weyl_matrix, ladder_dilation,
                   position_momentum_matrices)

__all__ = [
    "HermiteBasis2D", "OperatorMatrix", "QuadratureError", "assemble_weyl_matrix", "ladder_dilation",
    "position_momentum_matrices", "QuantumState", "coherent_state", "random_low_energy_state",
    "sobolev_norm", "EigenPropagator", "evolve", "split_step_floquet", "GrowthReport",
    "WindowTooShortError", "growth_report", "MatrixMourreResult", "egorov_residual",
    "matrix_mourre_check", "mourre_matrices",
]
