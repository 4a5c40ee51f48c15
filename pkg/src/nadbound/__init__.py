"""Numerical bounds for nonadiabatic transitions in driven finite-dimensional systems.

hbar = 1 throughout.
"""
__version__ = "0.1.0"

from .bounds import (
    BoundReport,
    apt_instantaneous_rates,
    bures_angle,
    build_report,
    qgt_bound_integral,
    qsl_chain,
    quench_transfer,
    remaining_bound,
    uhlmann_fidelity,
    universal_bounds,
)
from .dynamics import (
    PropagatorPair,
    grid_frames,
    intertwiner_residual,
    make_grid,
    propagate,
    propagate_pair,
    transition_rate,
)
from .model import (
    AffineModel,
    LinearSchedule,
    PiecewiseCubicSchedule,
    TabulatedSchedule,
    TransverseFieldIsing,
    TrigAnnealingSchedule,
    TwoLevelField,
    annealing_preset,
    hamiltonian_at,
    time_derivative_h,
)
from .operators import expi_step, hermitian_eig, operator_norm
from .optimize import arc_length_reparameterize, optimize_schedule
from .spectral import SpectralFrame, cd_hamiltonian, qgt_norm, reduced_cd_hamiltonian, spectral_frame
from .twolevel import BlochPath, annealing_bound_check, bloch_rate, project_two_level, trajectory_length
