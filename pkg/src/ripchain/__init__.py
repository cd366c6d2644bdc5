"""Entanglement replication between two XX chains driven by a stream of Bell pairs.

The dynamics is quadratic in fermions, so every state is represented by its
correlation matrix ``G_ij = <c_i^dag c_j>`` over the ``2N`` system sites.
"""

__version__ = "0.1.0"

from .model import SiteIndexMap, SpecError, SystemSpec, initial_correlation
from .dynamics import (
    ExactPropagator,
    NumericalError,
    Trajectory,
    propagate_discrete,
    propagate_exact,
    propagate_rk4,
    rip_step_discrete,
    spectral_gap,
    steady_state,
)
from .observables import (
    concurrence_wootters,
    concurrence_x_state,
    cross_concurrence_profile,
    current_profile,
    longitudinal_concurrence_profile,
    magnetization_profile,
    two_site_rdm,
)

__all__ = [
    "ExactPropagator", "NumericalError", "SiteIndexMap", "SpecError", "SystemSpec",
    "Trajectory", "concurrence_wootters", "concurrence_x_state", "cross_concurrence_profile",
    "current_profile", "initial_correlation", "longitudinal_concurrence_profile",
    "magnetization_profile", "propagate_discrete", "propagate_exact", "propagate_rk4",
    "rip_step_discrete", "spectral_gap", "steady_state", "two_site_rdm",
]
