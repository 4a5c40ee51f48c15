"""Unitary propagation of the dynamical and adiabatic transformations.

Both propagators use the same midpoint exponential step

    U[k+1] = exp(-i G(t_k + dt/2) dt) U[k],

with G = H (dynamical), H + H_cd (adiabatic) or H + H_cd^(n) (reduced
adiabatic for level n). Global error is O(dt^2).
"""
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import GapClosureError
from .operators import dagger, expi_steps, operator_norm
from .spectral import check_tracking, spectral_frame

DEFAULT_STEPS = 2000


def worker_count():
    """Worker cap from ``NADBOUND_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("NADBOUND_THREADS", "1")))
    except ValueError:
        return 1


def make_grid(duration, steps=None, dt_max=None):
    """Uniform grid on [0, duration] with at least ``steps`` steps and spacing <= ``dt_max``.

    With neither given the default is ``DEFAULT_STEPS`` steps (dt_max = T/2000).
    """
    if steps is None and dt_max is None:
        steps = DEFAULT_STEPS
    k = int(steps or 1)
    if dt_max is not None:
        if dt_max <= 0:
            raise ValueError("dt_max must be positive")
        k = max(k, math.ceil(duration / dt_max - 1e-12))
    grid = np.linspace(0.0, duration, k + 1)
    grid[-1] = duration
    return grid


def _validate_grid(grid, sched):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing with at least two points")
    if grid[0] != 0.0:
        raise ValueError("grid must start at t=0")
    if grid[-1] > sched.duration * (1 + 1e-12):
        raise ValueError("grid extends past the schedule duration")
    return grid


def _frames(model, sched, times, delta_deg):
    def build(t):
        try:
            return spectral_frame(model, sched, t, delta_deg)
        except GapClosureError as exc:
            exc.time = t if exc.time is None else exc.time
            raise

    workers = worker_count()
    if workers > 1 and len(times) > 64:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(build, times))
    return [build(t) for t in times]


def grid_frames(model, sched, grid, delta_deg=None, levels=None):
    """Spectral frames at every grid point with energy-order tracking.

    ``levels`` restricts the continuity check to those labels; ``None`` checks all.
    """
    frames = _frames(model, sched, np.asarray(grid, dtype=float), delta_deg)
    for prev, cur in zip(frames, frames[1:]):
        check_tracking(prev, cur, levels)
    return frames


def _parse_mode(mode, level):
    if mode.startswith("reduced-adiabatic"):
        if "(" in mode:
            level = int(mode[mode.index("(") + 1 : mode.index(")")])
        if level is None:
            raise ValueError("reduced-adiabatic mode needs a level index")
        return "reduced-adiabatic", int(level)
    if mode not in ("dynamical", "adiabatic"):
        raise ValueError(f"unknown propagation mode {mode!r}")
    return mode, None


def propagate(model, sched, grid, mode="dynamical", level=None, delta_deg=None):
    """Propagator stack of shape (K+1, d, d) on ``grid``.

    ``mode`` is ``"dynamical"``, ``"adiabatic"`` or ``"reduced-adiabatic"``
    (``level`` gives n; ``"reduced-adiabatic(n)"`` is accepted as well).
    """
    grid = _validate_grid(grid, sched)
    mode, level = _parse_mode(mode, level)
    dts = np.diff(grid)
    mids = grid[:-1] + 0.5 * dts
    if mode == "dynamical":
        gens = model.evaluate_many(np.array([sched.value(t) for t in mids]))
    else:
        frames = _frames(model, sched, mids, delta_deg)
        tracked = None if mode == "adiabatic" else [level]
        for prev, cur in zip(frames, frames[1:]):
            check_tracking(prev, cur, tracked)
        if mode == "adiabatic":
            gens = np.array([f.h + f.h_cd for f in frames])
        else:
            gens = np.array([f.h + f.reduced_h_cd(level) for f in frames])
    steps = expi_steps(gens, dts)
    out = np.empty((grid.size, model.dim, model.dim), dtype=complex)
    out[0] = np.eye(model.dim)
    for k, S in enumerate(steps):
        out[k + 1] = S @ out[k]
    return out


@dataclass(frozen=True)
class PropagatorPair:
    grid: np.ndarray
    U_D: np.ndarray
    U_A: np.ndarray
    dt_max: float

    def __len__(self):
        return len(self.grid)


def propagate_pair(model, sched, grid, delta_deg=None):
    grid = _validate_grid(grid, sched)
    U_D = propagate(model, sched, grid, "dynamical")
    U_A = propagate(model, sched, grid, "adiabatic", delta_deg=delta_deg)
    return PropagatorPair(grid, U_D, U_A, float(np.max(np.diff(grid))))


def _dynamical(pair_or_stack):
    return pair_or_stack.U_D if isinstance(pair_or_stack, PropagatorPair) else pair_or_stack


def transition_rate(pair, frames, n, m, k):
    """p_nm(t_k) = ||P_m(t_k) U_D(t_k) P_n(0)||^2.

    ``pair`` is a :class:`PropagatorPair` or a bare U_D stack; ``frames`` is
    indexed like the grid (only ``frames[0]`` and ``frames[k]`` are read).
    """
    U = _dynamical(pair)[k]
    return rate_between(U, frames[0], frames[k], n, m)


def rate_between(U, frame0, frame_t, n, m):
    V_n = frame0.level_vectors(n)
    V_m = frame_t.level_vectors(m)
    amp = V_m.conj().T @ U @ V_n
    s = np.linalg.svd(amp, compute_uv=False)
    return float(min(s[0] ** 2, 1.0)) if s.size else 0.0


def rate_matrix(U, frame0, frame_t):
    """All p_nm between the levels of ``frame0`` and ``frame_t``."""
    return np.array(
        [[rate_between(U, frame0, frame_t, n, m) for m in range(frame_t.n_levels)] for n in range(frame0.n_levels)]
    )


def intertwiner_residual(pair, k):
    """||W^dag W - 1|| for W = U_A^dag U_D at grid index ``k``."""
    W = dagger(pair.U_A[k]) @ pair.U_D[k]
    return operator_norm(dagger(W) @ W - np.eye(W.shape[0]))


def transport_residual(U, frame0, frame_t, n):
    """||U P_n(0) U^dag - P_n(t)||."""
    return operator_norm(U @ frame0.projector(n) @ dagger(U) - frame_t.projector(n))
