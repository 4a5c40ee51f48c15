"""Instantaneous spectral frames: grouped projectors, their time derivatives,
the counterdiabatic Hamiltonian and the geometric-tensor norm.

Everything is computed in the eigenbasis of H from the matrix elements of dH/dt,

    dP_n/dt = sum_{m != n} (P_m H' P_n + P_n H' P_m) / (E_n - E_m),

so no eigenvector gauge ever enters a result.
"""
from functools import cached_property

import numpy as np

from .errors import GapClosureError, LevelCrossingError, NadboundError
from .model import hamiltonian_at, time_derivative_h
from .operators import check_hermitian, commutator, operator_norm

DEFAULT_DEG_RTOL = 1e-8
NEAR_CROSSING_FACTOR = 10.0


def group_levels(values, delta):
    """Cluster ascending eigenvalues whose neighbours differ by at most ``delta``.

    Returns the per-eigenvalue group label array.
    """
    labels = np.zeros(len(values), dtype=int)
    for i in range(1, len(values)):
        labels[i] = labels[i - 1] + (values[i] - values[i - 1] > delta)
    return labels


class SpectralFrame:
    """Spectral data of H(lambda_t) at one time, with the drive dH/dt."""

    def __init__(self, H, H_dot, t=0.0, delta_deg=None):
        H = check_hermitian(H)
        H_dot = check_hermitian(H_dot)
        if H_dot.shape != H.shape:
            raise ValueError("H and dH/dt must have the same shape")
        self.t = float(t)
        self.h = H
        self.h_dot = H_dot
        self.eigenvalues, self.vectors = np.linalg.eigh(H)
        scale = float(np.max(np.abs(self.eigenvalues))) if H.size else 0.0
        self.delta_deg = DEFAULT_DEG_RTOL * scale if delta_deg is None else float(delta_deg)
        self.labels = group_levels(self.eigenvalues, self.delta_deg)
        n_levels = self.labels[-1] + 1
        self.energies = np.array([self.eigenvalues[self.labels == n].mean() for n in range(n_levels)])
        self.multiplicities = np.bincount(self.labels)
        gaps = np.diff(self.energies)
        self.min_gap = float(gaps.min()) if gaps.size else np.inf
        if gaps.size and self.min_gap <= self.delta_deg:
            raise NadboundError(
                f"internal error: level groups at t={self.t} only {self.min_gap:.3e} apart "
                f"(delta_deg={self.delta_deg:.3e}) but not merged"
            )
        self.warnings = []
        if gaps.size and self.min_gap < NEAR_CROSSING_FACTOR * self.delta_deg:
            self.warnings.append(f"near-crossing at t={self.t:.6g}: gap {self.min_gap:.3e}")

    @property
    def dim(self):
        return self.h.shape[0]

    @property
    def n_levels(self):
        return len(self.energies)

    def _check_level(self, n):
        if not (isinstance(n, (int, np.integer)) and 0 <= n < self.n_levels):
            raise IndexError(f"level index {n!r} out of range for {self.n_levels} levels")
        return int(n)

    def level_vectors(self, n):
        return self.vectors[:, self.labels == self._check_level(n)]

    def projector(self, n):
        V = self.level_vectors(n)
        return V @ V.conj().T

    @cached_property
    def projectors(self):
        return [self.projector(n) for n in range(self.n_levels)]

    @cached_property
    def _eig_energy(self):
        return self.energies[self.labels]

    def _resolvent_elements(self, h_dot):
        """A_ij = <i|H'|j> / (E_j - E_i) across groups, 0 inside a group (eigenbasis)."""
        V = self.vectors
        M = V.conj().T @ h_dot @ V
        E = self._eig_energy
        diff = E[None, :] - E[:, None]
        same = self.labels[:, None] == self.labels[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            A = np.where(same, 0.0, M / np.where(same, 1.0, diff))
        return A

    @cached_property
    def _A(self):
        return self._resolvent_elements(self.h_dot)

    def _pdot_eigenbasis(self, n, A):
        inside = self.labels == n
        out = np.zeros_like(A)
        out[np.ix_(~inside, inside)] = A[np.ix_(~inside, inside)]
        out[np.ix_(inside, ~inside)] = -A[np.ix_(inside, ~inside)]
        return out

    def projector_deriv(self, n, h_dot=None):
        """dP_n/dt for the stored drive (or an explicit ``h_dot``)."""
        n = self._check_level(n)
        A = self._A if h_dot is None else self._resolvent_elements(check_hermitian(h_dot))
        V = self.vectors
        return V @ self._pdot_eigenbasis(n, A) @ V.conj().T

    @cached_property
    def projector_derivs(self):
        return [self.projector_deriv(n) for n in range(self.n_levels)]

    @cached_property
    def h_cd(self):
        """Counterdiabatic Hamiltonian i sum_{m!=n} P_m H' P_n / (E_n - E_m)."""
        V = self.vectors
        return V @ (1j * self._A) @ V.conj().T

    def reduced_h_cd(self, n):
        n = self._check_level(n)
        V = self.vectors
        inside = self.labels == n
        X = np.zeros_like(self._A)
        # i [P_n', P_n] keeps only the blocks touching level n
        X[np.ix_(~inside, inside)] = self._A[np.ix_(~inside, inside)]
        X[np.ix_(inside, ~inside)] = self._A[np.ix_(inside, ~inside)]
        return V @ (1j * X) @ V.conj().T

    def qgt_norm(self, m):
        """||(1 - P_m) dP_m/dt||, read off the off-level block of the resolvent matrix."""
        m = self._check_level(m)
        inside = self.labels == m
        block = self._A[np.ix_(~inside, inside)]
        if block.size == 0:
            return 0.0
        return float(np.linalg.svd(block, compute_uv=False)[0])

    def qgt_norms(self):
        return np.array([self.qgt_norm(m) for m in range(self.n_levels)])

    @cached_property
    def h_cd_norm(self):
        return operator_norm(self._A)

    def pair_speed(self, n, m):
        """||P_n dP_m/dt||, the quench coupling from level n into level m."""
        n, m = self._check_level(n), self._check_level(m)
        if n == m:
            # P_m dP_m/dt = -(A restricted to rows in m, columns outside m)
            return self.qgt_norm(m)
        rows = self.labels == n
        cols = self.labels == m
        return float(np.linalg.svd(self._A[np.ix_(rows, cols)], compute_uv=False)[0])

    def __repr__(self):
        return f"SpectralFrame(t={self.t:.6g}, levels={self.n_levels}, dim={self.dim})"


def spectral_frame(model, sched, t, delta_deg=None):
    return SpectralFrame(hamiltonian_at(model, sched, t), time_derivative_h(model, sched, t), t, delta_deg)


def projector_derivative(frame, h_dot=None):
    """All dP_n/dt of ``frame``; ``h_dot`` overrides the stored drive."""
    if frame.n_levels > 1 and frame.min_gap < frame.delta_deg:
        raise GapClosureError(f"gap {frame.min_gap:.3e} below delta_deg at t={frame.t}", time=frame.t)
    if h_dot is None:
        return list(frame.projector_derivs)
    return [frame.projector_deriv(n, h_dot) for n in range(frame.n_levels)]


def cd_hamiltonian(frame):
    return frame.h_cd


def cd_hamiltonian_from_commutators(frame):
    """(i/2) sum_n [dP_n/dt, P_n], evaluated literally (cross-check route)."""
    out = np.zeros((frame.dim, frame.dim), dtype=complex)
    for P, dP in zip(frame.projectors, frame.projector_derivs):
        out += commutator(dP, P)
    return 0.5j * out


def reduced_cd_hamiltonian(frame, n):
    return frame.reduced_h_cd(n)


def qgt_norm(frame, m):
    return frame.qgt_norm(m)


def level_overlap(prev, cur, n):
    """Tr[P_n(prev) P_n(cur)] computed from the level eigenvectors."""
    return float(np.linalg.norm(prev.level_vectors(n).conj().T @ cur.level_vectors(n)) ** 2)


def check_tracking(prev, cur, levels=None):
    """Raise if the energy-ordered labels of ``levels`` are not continuous from prev to cur.

    ``levels=None`` tracks every level.
    """
    if levels is None:
        if prev.n_levels != cur.n_levels or np.any(prev.multiplicities != cur.multiplicities):
            raise LevelCrossingError(
                f"level structure changed between t={prev.t:.6g} and t={cur.t:.6g} "
                f"({prev.n_levels} -> {cur.n_levels} levels); refine the grid or the path",
                time=cur.t,
            )
        levels = range(cur.n_levels)
    for n in levels:
        if n >= prev.n_levels or n >= cur.n_levels or prev.multiplicities[n] != cur.multiplicities[n]:
            raise LevelCrossingError(
                f"level {n} changed multiplicity between t={prev.t:.6g} and t={cur.t:.6g}", time=cur.t
            )
        ov = level_overlap(prev, cur, n)
        if ov < prev.multiplicities[n] / 2:
            raise LevelCrossingError(
                f"level {n} lost overlap ({ov:.3f}) between t={prev.t:.6g} and t={cur.t:.6g}: "
                "crossing or grid too coarse; refine the grid",
                time=cur.t,
            )
