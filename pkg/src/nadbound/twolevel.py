"""Closed-form two-level analytics and the projected two-level reduction.

For H = h . sigma the geometric-tensor norm of either level is
|h x dh/dt| / (2 |h|^2), so the bound integral is half the length of the path
traced by h/|h| on the unit sphere.
"""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .bounds import integrate
from .dynamics import grid_frames, make_grid, propagate, rate_between
from .errors import CertificationError, GapClosureError
from .model import TwoLevelField, hamiltonian_at, time_derivative_h
from .operators import PAULI_X, PAULI_Y, PAULI_Z, expi_steps, operator_norm

ANNEALING_SLACK = 1e-3


def bloch_rate(h, h_dot):
    h = np.asarray(h, dtype=float)
    h_dot = np.asarray(h_dot, dtype=float)
    r2 = float(h @ h)
    if r2 == 0.0:
        raise ValueError("field vanishes: level direction undefined")
    return float(np.linalg.norm(np.cross(h, h_dot)) / (2.0 * r2))


@dataclass(frozen=True)
class BlochPath:
    """Spherical coordinates of a field path with their time derivatives."""

    t: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    theta_dot: np.ndarray
    phi_dot: np.ndarray

    def __post_init__(self):
        if np.any(self.r <= 0):
            raise ValueError("field magnitude must stay positive along the path")
        if np.any(self.theta < -1e-12) or np.any(self.theta > np.pi + 1e-12):
            raise ValueError("theta must lie in [0, pi]")

    @classmethod
    def from_angles(cls, t, theta, phi, theta_dot, phi_dot, r=None):
        t = np.asarray(t, dtype=float)
        r = np.ones_like(t) if r is None else np.asarray(r, dtype=float)
        return cls(t, r, *(np.asarray(a, dtype=float) for a in (theta, phi, theta_dot, phi_dot)))

    @classmethod
    def from_schedule(cls, sched, times=None):
        """Path of a three-component field schedule ``(h_x, h_y, h_z)``."""
        if sched.dim_params != 3:
            raise ValueError("Bloch paths need a three-component field schedule")
        times = make_grid(sched.duration) if times is None else np.asarray(times, dtype=float)
        h = np.array([sched.value(t) for t in times])
        hd = np.array([sched.derivative(t) for t in times])
        r = np.linalg.norm(h, axis=1)
        if np.any(r == 0):
            raise ValueError("field vanishes along the path")
        n = h / r[:, None]
        theta = np.arccos(np.clip(n[:, 2], -1.0, 1.0))
        sin_t = np.sin(theta)
        phi = np.empty_like(theta)
        prev = 0.0
        for k in range(len(times)):
            if sin_t[k] < 1e-12:
                phi[k] = prev
                continue
            raw = np.arctan2(n[k, 1], n[k, 0])
            # nearest branch to the previous value
            prev = raw + 2 * np.pi * np.round((prev - raw) / (2 * np.pi))
            phi[k] = prev
        n_dot = (hd - n * np.sum(n * hd, axis=1)[:, None]) / r[:, None]
        e_theta = np.stack([np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi), -sin_t], axis=1)
        e_phi = np.stack([-np.sin(phi), np.cos(phi), np.zeros_like(phi)], axis=1)
        theta_dot = np.sum(e_theta * n_dot, axis=1)
        along_phi = np.sum(e_phi * n_dot, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            phi_dot = np.where(sin_t < 1e-12, 0.0, along_phi / np.where(sin_t < 1e-12, 1.0, sin_t))
        return cls(times, r, theta, phi, theta_dot, phi_dot)


def trajectory_length(path):
    """Half the arc length of the direction path: (1/2) int sqrt(theta'^2 + phi'^2 sin^2 theta) dt."""
    speed = np.sqrt(path.theta_dot**2 + (path.phi_dot * np.sin(path.theta)) ** 2)
    return 0.5 * integrate(speed, path.t)


class AnnealingCheck(NamedTuple):
    length_half: float
    bound: float
    measured_p: float


def _direction_matches(v, axis, tol=1e-9):
    v = np.asarray(v, dtype=float)
    r = np.linalg.norm(v)
    return r > 0 and abs(abs(v[axis]) - r) <= tol * r


def annealing_bound_check(model, sched, grid=None, slack=ANNEALING_SLACK):
    """Ground-to-excited rate of an x -> z anneal against its squared half-length."""
    if not isinstance(model, TwoLevelField):
        raise ValueError("annealing check needs the two-level field model")
    if not (_direction_matches(sched.start, 0) and _direction_matches(sched.end, 2)):
        raise ValueError("annealing path must run from the x axis to the z axis")
    grid = make_grid(sched.duration) if grid is None else np.asarray(grid, dtype=float)
    length = trajectory_length(BlochPath.from_schedule(sched, grid))
    U = propagate(model, sched, grid)
    frames = grid_frames(model, sched, grid[[0, -1]] if len(grid) > 1 else grid, levels=[])
    p = rate_between(U[-1], frames[0], frames[-1], 0, 1)
    check = AnnealingCheck(length, length**2, p)
    if p > check.bound + slack:
        raise CertificationError(f"measured p={p:.6f} exceeds bound {check.bound:.6f}", record=check)
    return check


# --------------------------------------------------------------------------
# Projected two-level reduction
# --------------------------------------------------------------------------


def _align(vectors, reference):
    """Rephase each column so its overlap with ``reference`` is real positive."""
    if reference is None:
        return vectors
    ov = np.sum(reference.conj() * vectors, axis=0)
    ph = np.where(np.abs(ov) > 0, ov.conj() / np.where(np.abs(ov) > 0, np.abs(ov), 1.0), 1.0)
    return vectors * ph


def _bottom_pair(model, sched, t, reference=None, delta_deg=None):
    H = hamiltonian_at(model, sched, t)
    w, V = np.linalg.eigh(H)
    delta = 1e-8 * operator_norm(H) if delta_deg is None else delta_deg
    if w[1] - w[0] <= delta or (len(w) > 2 and w[2] - w[1] <= delta):
        raise GapClosureError(f"bottom pair degenerate at t={t:.6g}", time=t)
    return w[:2], _align(V[:, :2], reference)


def _projected_matrix(energies, pair, h_dot):
    c = (pair[:, 0].conj() @ h_dot @ pair[:, 1]) / (energies[1] - energies[0])
    return c.imag * PAULI_X + c.real * PAULI_Y + 0.5 * (energies[0] - energies[1]) * PAULI_Z


def project_two_level(model, sched, t, reference=None, delta_deg=None):
    """Effective 2x2 Hamiltonian of the bottom pair in the instantaneous basis.

    ``reference`` (previous eigenvectors, shape (d, 2)) fixes the gauge by
    parallel transport; without it numpy's eigenvector phases are used.
    """
    energies, pair = _bottom_pair(model, sched, t, reference, delta_deg)
    return _projected_matrix(energies, pair, time_derivative_h(model, sched, t))


def projected_series(model, sched, grid, delta_deg=None):
    """Projected Hamiltonians at the grid midpoints in a parallel-transported gauge."""
    grid = np.asarray(grid, dtype=float)
    mids = grid[:-1] + 0.5 * np.diff(grid)
    _, ref = _bottom_pair(model, sched, grid[0], None, delta_deg)
    out = []
    for t in mids:
        energies, ref = _bottom_pair(model, sched, t, ref, delta_deg)
        out.append(_projected_matrix(energies, ref, time_derivative_h(model, sched, t)))
    return np.array(out)


def reduced_transition(model, sched, grid=None, delta_deg=None):
    """p_01(T) from propagating the projected two-level Hamiltonian."""
    grid = make_grid(sched.duration) if grid is None else np.asarray(grid, dtype=float)
    steps = expi_steps(projected_series(model, sched, grid, delta_deg), np.diff(grid))
    psi = np.array([1.0, 0.0], dtype=complex)
    for S in steps:
        psi = S @ psi
    return float(abs(psi[1]) ** 2)


class ReductionCheck(NamedTuple):
    reduced_p: float
    full_p: float
    leakage: float

    @property
    def relative_error(self):
        return abs(self.reduced_p - self.full_p) / max(self.full_p, 1e-300)


def full_bottom_pair_rates(model, sched, grid=None):
    """(p_01, leakage) of the full model, leakage = 1 - p_00 - p_01 from the ground state."""
    grid = make_grid(sched.duration) if grid is None else np.asarray(grid, dtype=float)
    U = propagate(model, sched, grid)[-1]
    H0 = hamiltonian_at(model, sched, 0.0)
    HT = hamiltonian_at(model, sched, sched.duration)
    v0 = np.linalg.eigh(H0)[1][:, 0]
    VT = np.linalg.eigh(HT)[1]
    amps = np.abs(VT.conj().T @ (U @ v0)) ** 2
    return float(amps[1]), float(max(1.0 - amps[0] - amps[1], 0.0))


def reduction_check(model, sched, grid=None, delta_deg=None):
    grid = make_grid(sched.duration) if grid is None else np.asarray(grid, dtype=float)
    full_p, leak = full_bottom_pair_rates(model, sched, grid)
    return ReductionCheck(reduced_transition(model, sched, grid, delta_deg), full_p, leak)
