"""Random models and schedules shared by the test modules."""
import numpy as np
from scipy.linalg import expm

from nadbound.model import AffineModel, FunctionModel, PiecewiseCubicSchedule, TransverseFieldIsing, TwoLevelField
from nadbound.operators import random_hermitian

# PASS/FAIL lines from the acceptance module, echoed in the terminal summary
ACCEPTANCE_LINES = []


def random_affine_model(d, rng, n_params=2, spacing=1.0, coupling=0.4):
    """Well separated diagonal levels plus random Hermitian couplings per parameter."""
    base = np.diag(spacing * np.arange(d)).astype(complex)
    return AffineModel(base, [random_hermitian(d, rng, coupling) for _ in range(n_params)])


def random_path(rng, n_params, duration, n_knots=4, lo=-1.0, hi=1.0):
    times = np.linspace(0.0, duration, n_knots + 2)
    pts = rng.uniform(lo, hi, size=(n_knots + 2, n_params))
    return PiecewiseCubicSchedule(times, pts)


def random_two_level_case(rng, duration=None):
    """Field path that stays away from zero: a fixed offset plus a random wiggle."""
    duration = rng.uniform(0.5, 4.0) if duration is None else duration
    times = np.linspace(0.0, duration, 5)
    center = rng.normal(size=3)
    center *= 1.2 / np.linalg.norm(center)
    pts = center + rng.uniform(-0.6, 0.6, size=(5, 3))
    return TwoLevelField(), PiecewiseCubicSchedule(times, pts)


def random_dense_case(d, rng, duration=None):
    duration = rng.uniform(0.5, 4.0) if duration is None else duration
    return random_affine_model(d, rng), random_path(rng, 2, duration)


def random_ising_case(rng, n_spins=3, duration=None):
    duration = rng.uniform(1.0, 4.0) if duration is None else duration
    times = np.linspace(0.0, duration, 4)
    pts = np.column_stack(
        [rng.uniform(0.6, 1.4, 4), rng.uniform(0.6, 1.4, 4), rng.uniform(-0.3, 0.3, 4)]
    )
    return TransverseFieldIsing(n_spins, longitudinal=True), PiecewiseCubicSchedule(times, pts)


def rotating_frame_model(spectrum, rng):
    """H(lam) = exp(i lam G) diag(spectrum) exp(-i lam G): spectrum (and degeneracy) fixed."""
    spectrum = np.asarray(spectrum, dtype=float)
    G = random_hermitian(len(spectrum), rng)
    D = np.diag(spectrum).astype(complex)

    def fn(lam):
        U = expm(1j * lam[0] * G)
        return U @ D @ U.conj().T

    def dfn(lam, k):
        H = fn(lam)
        return 1j * (G @ H - H @ G)

    return FunctionModel(len(spectrum), 1, fn, dfn)


class BumpModel:
    """Three levels; the bottom pair sees a field h(x, z) that nearly vanishes near (-0.5, -0.5).

    The bump makes the ground state direction swing fast there, so short
    paths in parameter space through the bump are long in the level metric.
    """

    family = "bump"
    dim = 3
    n_params = 2
    center = np.array([-0.5, -0.5])
    width2 = 0.09

    def _g(self, lams):
        lams = np.atleast_2d(lams)
        u = lams - self.center
        g = np.exp(-np.sum(u**2, axis=1) / self.width2)
        return lams, g, -2 * u / self.width2 * g[:, None]

    def _assemble(self, h, diag2, off):
        n = len(h)
        out = np.zeros((n, 3, 3), dtype=complex)
        out[:, 0, 0] = h[:, 2]
        out[:, 1, 1] = -h[:, 2]
        out[:, 0, 1] = h[:, 0] - 1j * h[:, 1]
        out[:, 1, 0] = h[:, 0] + 1j * h[:, 1]
        out[:, 2, 2] = diag2
        out[:, 1, 2] = out[:, 2, 1] = off
        return out

    def evaluate_many(self, lams):
        lams, g, _ = self._g(lams)
        x, z = lams[:, 0], lams[:, 1]
        h = np.column_stack([x * (1 - 0.9 * g), 0.4 * g, z * (1 - 0.9 * g)])
        return self._assemble(h, 3.0, 0.2)

    def drive_many(self, lams, rates):
        lams, g, dg = self._g(lams)
        rates = np.atleast_2d(rates)
        x, z = lams[:, 0], lams[:, 1]
        gdot = np.sum(dg * rates, axis=1)
        h = np.column_stack(
            [
                rates[:, 0] * (1 - 0.9 * g) - 0.9 * x * gdot,
                0.4 * gdot,
                rates[:, 1] * (1 - 0.9 * g) - 0.9 * z * gdot,
            ]
        )
        return self._assemble(h, 0.0, 0.0)

    def evaluate(self, lam):
        return self.evaluate_many(np.asarray(lam, dtype=float)[None, :])[0]

    def param_derivative(self, lam, k):
        return self.drive_many(np.asarray(lam, dtype=float)[None, :], np.eye(2)[k][None, :])[0]
