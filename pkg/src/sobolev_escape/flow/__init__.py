"""Projected Hamiltonian flow on the energy shell: sampling, limit sets, identities, hitting times."""
from .geometry import ShellGeometry, contact_form, liouville_volume, symplectic_form
from .hitting import EntryResult, HittingTimeError, hitting_time, tube_entry, tube_transversality
from .identities import (
    divergence_flux,
    divergence_projected,
    foliation_residual,
    identity_residual,
    radial_tangency_residual,
)
from .integrator import STATUS_NAMES, BatchResult, integrate_batch
from .limits import (
    ClosedOrbit,
    FixedPoint,
    InvariantSet,
    InvariantSetReport,
    WeakHyperbolicityError,
    classify_limit_sets,
    continue_fixed_points,
    refine_fixed_point,
    tangent_jacobian,
    tube_samples,
    weak_hyperbolicity_check,
)
from .surface import (
    CriticalLevelError,
    EmptySurfaceError,
    EnergyShellSpec,
    SurfaceSample,
    label_components,
    sample_energy_surface,
    sphere_points,
)
from .trajectory import (
    FullFlowResult,
    ProjectedFlow,
    StepFailure,
    Trajectory,
    as_geometry,
    integrate_full,
    integrate_projected,
)

__all__ = [
    "BatchResult", "ClosedOrbit", "CriticalLevelError", "EmptySurfaceError", "EnergyShellSpec", "EntryResult",
    "FixedPoint", "FullFlowResult", "HittingTimeError", "InvariantSet", "InvariantSetReport", "ProjectedFlow",
    "STATUS_NAMES", "ShellGeometry", "StepFailure", "SurfaceSample", "Trajectory", "WeakHyperbolicityError",
    "as_geometry", "classify_limit_sets", "contact_form", "continue_fixed_points", "divergence_flux",
    "divergence_projected", "foliation_residual", "hitting_time", "identity_residual", "integrate_batch",
    "integrate_full", "integrate_projected", "label_components", "liouville_volume", "radial_tangency_residual",
    "refine_fixed_point", "sample_energy_surface", "sphere_points", "symplectic_form", "tangent_jacobian",
    "tube_entry", "tube_samples", "tube_transversality", "weak_hyperbolicity_check",
]
