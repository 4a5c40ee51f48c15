"""Parameter schedules t -> lambda_t and Hamiltonian families H(lambda).

A schedule maps time on ``[0, T]`` to a control vector; a model maps a control
vector to a dense Hermitian matrix. Both are immutable after construction.
"""
import json
from functools import reduce

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from .errors import ConfigError, NadboundError
from .operators import PAULI_X, PAULI_Y, PAULI_Z, check_hermitian, operator_norm

MAX_ISING_SPINS = 8
_T_SLACK = 1e-12


# --------------------------------------------------------------------------
# Schedules
# --------------------------------------------------------------------------


class ParameterSchedule:
    """Smooth control path on ``[0, duration]``.

    Subclasses implement ``_value`` and ``_derivative`` for scalar ``t``.
    """

    kind = "abstract"

    def __init__(self, duration, dim_params):
        if not duration > 0:
            raise ValueError(f"duration must be positive, got {duration}")
        self.duration = float(duration)
        self.dim_params = int(dim_params)

    def _check_time(self, t):
        t = float(t)
        slack = _T_SLACK * max(1.0, self.duration)
        if t < -slack or t > self.duration + slack:
            raise ValueError(f"time {t} outside [0, {self.duration}]")
        return min(max(t, 0.0), self.duration)

    def value(self, t):
        return np.asarray(self._value(self._check_time(t)), dtype=float)

    def derivative(self, t):
        return np.asarray(self._derivative(self._check_time(t)), dtype=float)

    def _value(self, t):
        raise NotImplementedError

    def _derivative(self, t):
        raise NotImplementedError

    @property
    def start(self):
        return self.value(0.0)

    @property
    def end(self):
        return self.value(self.duration)

    def to_knots(self, n=201):
        """Sample into a tabulated-knot list (the schedule file format)."""
        ts = np.linspace(0.0, self.duration, n)
        return [{"t": float(t), "lambda": [float(x) for x in self.value(t)]} for t in ts]

    def __repr__(self):
        return f"{type(self).__name__}(T={self.duration}, p={self.dim_params})"


class LinearSchedule(ParameterSchedule):
    kind = "linear"

    def __init__(self, start, end, duration):
        self._a = np.asarray(start, dtype=float)
        self._b = np.asarray(end, dtype=float)
        if self._a.shape != self._b.shape:
            raise ValueError("start and end must have the same length")
        super().__init__(duration, self._a.size)

    def _value(self, t):
        if t == self.duration:
            return self._b.copy()
        s = t / self.duration
        return (1 - s) * self._a + s * self._b

    def _derivative(self, t):
        return (self._b - self._a) / self.duration


def constant_schedule(value, duration):
    return LinearSchedule(value, value, duration)


class TrigAnnealingSchedule(ParameterSchedule):
    """lambda_t = cos(pi s / 2) lambda_0 + sin(pi s / 2) lambda_T with s = t / T.

    With |lambda_0| = |lambda_T| and orthogonal endpoints this is a constant-speed
    great circle, the annealing preset used for the two-level example.
    """

    kind = "trig-annealing"

    def __init__(self, start, end, duration):
        self._a = np.asarray(start, dtype=float)
        self._b = np.asarray(end, dtype=float)
        super().__init__(duration, self._a.size)

    def _value(self, t):
        if t == 0.0:
            return self._a.copy()
        if t == self.duration:
            return self._b.copy()
        u = 0.5 * np.pi * t / self.duration
        return np.cos(u) * self._a + np.sin(u) * self._b

    def _derivative(self, t):
        w = 0.5 * np.pi / self.duration
        u = w * t
        return w * (-np.sin(u) * self._a + np.cos(u) * self._b)


class PiecewiseCubicSchedule(ParameterSchedule):
    """Cubic spline through control points ``(t_i, lambda_i)``; C2, so also C1.

    Endpoint values are returned exactly.
    """

    kind = "piecewise-cubic"

    def __init__(self, times, points, bc_type="not-a-knot"):
        times = np.asarray(times, dtype=float)
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[0] != times.size:
            points = points.T
        if times.size < 2 or np.any(np.diff(times) <= 0) or times[0] != 0.0:
            raise ValueError("knot times must start at 0 and increase strictly")
        self.times = times
        self.points = points
        if times.size == 2:
            # two knots: straight segment
            slope = (points[1] - points[0]) / times[1]
            bc_type = ((1, slope), (1, slope))
        elif times.size == 3 and bc_type == "not-a-knot":
            bc_type = "natural"
        self._spline = CubicSpline(times, points, axis=0, bc_type=bc_type)
        self._deriv = self._spline.derivative()
        super().__init__(times[-1], points.shape[1])

    def _value(self, t):
        if t == 0.0:
            return self.points[0].copy()
        if t == self.duration:
            return self.points[-1].copy()
        return self._spline(t)

    def _derivative(self, t):
        return self._deriv(t)


class TabulatedSchedule(ParameterSchedule):
    """Monotone (PCHIP) cubic interpolation of sampled control values.

    The derivative comes from the interpolant, so it is continuous.
    """

    kind = "tabulated"

    def __init__(self, times, points):
        times = np.asarray(times, dtype=float)
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[0] != times.size:
            points = points.T
        if times.size < 2 or np.any(np.diff(times) <= 0) or times[0] != 0.0:
            raise ValueError("knot times must start at 0 and increase strictly")
        self.times = times
        self.points = points
        self._interp = PchipInterpolator(times, points, axis=0)
        self._deriv = self._interp.derivative()
        super().__init__(times[-1], points.shape[1])

    def _value(self, t):
        return self._interp(t)

    def _derivative(self, t):
        return self._deriv(t)


class FunctionSchedule(ParameterSchedule):
    """Schedule from explicit callables; used for analytic test paths."""

    kind = "analytic"

    def __init__(self, value_fn, derivative_fn, duration, dim_params=None):
        self._f = value_fn
        self._df = derivative_fn
        if dim_params is None:
            dim_params = np.size(value_fn(0.0))
        super().__init__(duration, dim_params)

    def _value(self, t):
        return self._f(t)

    def _derivative(self, t):
        return self._df(t)


class ReparameterizedSchedule(ParameterSchedule):
    """``base`` evaluated at a monotone time map s(t).

    ``rate_of_s`` gives ds/dt as a function of s. Where it is infinite (the
    base path is at rest there) the derivative is taken from a point nudged
    slightly inward, which approximates the finite one-sided limit.
    """

    kind = "reparameterized"
    NUDGE = 1e-6

    def __init__(self, base, s_of_t, rate_of_s, duration):
        self.base = base
        self._s = s_of_t
        self._rate = rate_of_s
        super().__init__(duration, base.dim_params)

    def _clip(self, s):
        return min(max(float(s), 0.0), self.base.duration)

    def _value(self, t):
        if t == 0.0:
            return self.base.start
        if t == self.duration:
            return self.base.end
        return self.base.value(self._clip(self._s(t)))

    def _derivative(self, t):
        x = self._clip(self._s(t))
        rate = float(self._rate(x))
        if not np.isfinite(rate):
            step = self.NUDGE * self.base.duration
            x = x + step if x + step <= self.base.duration else x - step
            rate = float(self._rate(x))
        return self.base.derivative(x) * rate


# --------------------------------------------------------------------------
# Hamiltonian models
# --------------------------------------------------------------------------


def fd_step(lam):
    return max(1e-5, 1e-5 * float(np.linalg.norm(lam)))


class HamiltonianModel:
    """H(lambda) on a ``dim``-dimensional Hilbert space.

    ``param_derivative`` falls back to a central difference; families with a
    closed form override it.
    """

    family = "abstract"
    has_analytic_derivative = False

    def __init__(self, dim, n_params):
        self.dim = int(dim)
        self.n_params = int(n_params)

    def evaluate(self, lam):
        raise NotImplementedError

    def _checked(self, lam):
        lam = np.asarray(lam, dtype=float)
        if lam.shape != (self.n_params,):
            raise ValueError(f"{self.family} expects {self.n_params} parameters, got shape {lam.shape}")
        return lam

    def param_derivative(self, lam, k):
        return self.fd_param_derivative(lam, k)

    def evaluate_many(self, lams):
        """Stack of H(lambda) for each row of ``lams``."""
        return np.array([self.evaluate(lam) for lam in lams])

    def drive_many(self, lams, rates):
        """Stack of sum_k rate_k dH/dlambda_k for each (lambda, rate) row."""
        out = np.zeros((len(lams), self.dim, self.dim), dtype=complex)
        for i, (lam, r) in enumerate(zip(lams, rates)):
            for k, rk in enumerate(r):
                if rk != 0.0:
                    out[i] += rk * self.param_derivative(lam, k)
        return out

    def fd_param_derivative(self, lam, k):
        lam = self._checked(lam)
        h = fd_step(lam)
        up, dn = lam.copy(), lam.copy()
        up[k] += h
        dn[k] -= h
        return (self.evaluate(up) - self.evaluate(dn)) / (2 * h)

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim}, n_params={self.n_params})"


class TwoLevelField(HamiltonianModel):
    """H = h_x X + h_y Y + h_z Z with lambda = (h_x, h_y, h_z)."""

    family = "two-level-field"
    has_analytic_derivative = True
    _paulis = (PAULI_X, PAULI_Y, PAULI_Z)

    def __init__(self):
        super().__init__(2, 3)
        self._stack = np.array(self._paulis)

    def evaluate_many(self, lams):
        return np.einsum("nk,kij->nij", np.asarray(lams, dtype=float), self._stack)

    def drive_many(self, lams, rates):
        return np.einsum("nk,kij->nij", np.asarray(rates, dtype=float), self._stack)

    def evaluate(self, lam):
        hx, hy, hz = self._checked(lam)
        return hx * PAULI_X + hy * PAULI_Y + hz * PAULI_Z

    def param_derivative(self, lam, k):
        return self._paulis[k].copy()


class LandauZener(HamiltonianModel):
    """H = (eps Z + delta X) / 2 with lambda = (eps, delta)."""

    family = "landau-zener"
    has_analytic_derivative = True

    def __init__(self):
        super().__init__(2, 2)
        self._stack = 0.5 * np.array([PAULI_Z, PAULI_X])

    def evaluate_many(self, lams):
        return np.einsum("nk,kij->nij", np.asarray(lams, dtype=float), self._stack)

    def drive_many(self, lams, rates):
        return np.einsum("nk,kij->nij", np.asarray(rates, dtype=float), self._stack)

    def evaluate(self, lam):
        eps, delta = self._checked(lam)
        return 0.5 * (eps * PAULI_Z + delta * PAULI_X)

    def param_derivative(self, lam, k):
        return 0.5 * (PAULI_Z if k == 0 else PAULI_X)


def _site_operator(op, site, n):
    mats = [np.eye(2, dtype=complex)] * n
    mats[site] = op
    return reduce(np.kron, mats)


class TransverseFieldIsing(HamiltonianModel):
    """Open chain H = -J sum Z_i Z_{i+1} - Gamma sum X_i [- h sum Z_i].

    lambda = (J, Gamma) or, with ``longitudinal=True``, (J, Gamma, h).
    """

    family = "transverse-field-ising"
    has_analytic_derivative = True

    def __init__(self, n_spins, longitudinal=False):
        n_spins = int(n_spins)
        if not 1 <= n_spins <= MAX_ISING_SPINS:
            raise ValueError(f"n_spins must be in [1, {MAX_ISING_SPINS}], got {n_spins}")
        self.n_spins = n_spins
        self.longitudinal = bool(longitudinal)
        super().__init__(2**n_spins, 3 if longitudinal else 2)
        zs = [_site_operator(PAULI_Z, i, n_spins) for i in range(n_spins)]
        xs = [_site_operator(PAULI_X, i, n_spins) for i in range(n_spins)]
        dim = 2**n_spins
        zz = sum((zs[i] @ zs[i + 1] for i in range(n_spins - 1)), np.zeros((dim, dim), complex))
        self._terms = [-zz, -sum(xs), -sum(zs)][: self.n_params]
        self._stack = np.array(self._terms)

    def evaluate_many(self, lams):
        return np.einsum("nk,kij->nij", np.asarray(lams, dtype=float), self._stack)

    def drive_many(self, lams, rates):
        return np.einsum("nk,kij->nij", np.asarray(rates, dtype=float), self._stack)

    def evaluate(self, lam):
        lam = self._checked(lam)
        return sum(c * T for c, T in zip(lam, self._terms))

    def param_derivative(self, lam, k):
        return self._terms[k].copy()


class FunctionModel(HamiltonianModel):
    """Model from a callable ``fn(lambda) -> H``; derivatives by central difference."""

    family = "custom"

    def __init__(self, dim, n_params, fn, derivative_fn=None):
        super().__init__(dim, n_params)
        self._fn = fn
        self._dfn = derivative_fn
        self.has_analytic_derivative = derivative_fn is not None

    def evaluate(self, lam):
        H = check_hermitian(self._fn(self._checked(lam)))
        if H.shape != (self.dim, self.dim):
            raise ValueError(f"callable returned shape {H.shape}, expected ({self.dim}, {self.dim})")
        return H

    def param_derivative(self, lam, k):
        if self._dfn is None:
            return self.fd_param_derivative(lam, k)
        return np.asarray(self._dfn(self._checked(lam), k), dtype=complex)


class AffineModel(HamiltonianModel):
    """H(lambda) = H_0 + sum_k lambda_k H_k for fixed Hermitian matrices."""

    family = "dense-tabulated"
    has_analytic_derivative = True

    def __init__(self, base, terms):
        base = check_hermitian(base)
        terms = [check_hermitian(T) for T in terms]
        super().__init__(base.shape[0], len(terms))
        self.base = base
        self.terms = terms
        self._stack = np.array(terms).reshape(len(terms), base.shape[0], base.shape[0])

    def evaluate_many(self, lams):
        return self.base + np.einsum("nk,kij->nij", np.asarray(lams, dtype=float), self._stack)

    def drive_many(self, lams, rates):
        return np.einsum("nk,kij->nij", np.asarray(rates, dtype=float), self._stack)

    def evaluate(self, lam):
        lam = self._checked(lam)
        H = self.base.copy()
        for c, T in zip(lam, self.terms):
            H = H + c * T
        return H

    def param_derivative(self, lam, k):
        return self.terms[k].copy()


class InterpolatedModel(HamiltonianModel):
    """Single-parameter table H(lambda_i), PCHIP-interpolated entrywise."""

    family = "dense-tabulated"

    def __init__(self, lambdas, matrices):
        lambdas = np.asarray(lambdas, dtype=float)
        order = np.argsort(lambdas)
        mats = np.asarray(matrices, dtype=complex)[order]
        super().__init__(mats.shape[1], 1)
        self._re = PchipInterpolator(lambdas[order], mats.real, axis=0)
        self._im = PchipInterpolator(lambdas[order], mats.imag, axis=0)
        self.lo, self.hi = lambdas[order][0], lambdas[order][-1]

    def evaluate(self, lam):
        (x,) = self._checked(lam)
        if x < self.lo - 1e-12 or x > self.hi + 1e-12:
            raise ValueError(f"lambda {x} outside tabulated range [{self.lo}, {self.hi}]")
        H = self._re(x) + 1j * self._im(x)
        return 0.5 * (H + H.conj().T)


def tabulated_model(lambdas, matrices, fit_rtol=1e-10):
    """Build a model from sampled (lambda, H) pairs.

    An affine fit H_0 + sum lambda_k H_k is used when it reproduces every sample;
    otherwise a one-parameter table is interpolated, and multi-parameter
    non-affine tables are rejected.
    """
    lambdas = np.atleast_2d(np.asarray(lambdas, dtype=float))
    mats = np.asarray(matrices, dtype=complex)
    n, p = lambdas.shape
    if mats.shape[0] != n:
        raise ValueError("need one matrix per lambda sample")
    d = mats.shape[1]
    scale = max(max(operator_norm(M) for M in mats), 1.0)
    if n >= p + 1:
        design = np.hstack([np.ones((n, 1)), lambdas])
        coef, *_ = np.linalg.lstsq(design, mats.reshape(n, -1), rcond=None)
        resid = design @ coef - mats.reshape(n, -1)
        if np.max(np.abs(resid)) <= fit_rtol * scale:
            coef = coef.reshape(p + 1, d, d)
            return AffineModel(coef[0], list(coef[1:]))
    if p == 1 and n >= 2:
        return InterpolatedModel(lambdas[:, 0], mats)
    raise NadboundError("tabulated model is not affine in its parameters and has more than one parameter")


# --------------------------------------------------------------------------
# Evaluation along a schedule
# --------------------------------------------------------------------------


def hamiltonian_at(model, sched, t):
    return model.evaluate(sched.value(t))


def time_derivative_h(model, sched, t):
    """dH/dt = sum_k (d lambda_k / dt) dH/d lambda_k."""
    lam = sched.value(t)
    rate = sched.derivative(t)
    out = np.zeros((model.dim, model.dim), dtype=complex)
    for k, r in enumerate(rate):
        if r != 0.0:
            out = out + r * model.param_derivative(lam, k)
    return out


def annealing_preset(duration, h0x=-1.0, hTz=-1.0, kind="trig-annealing"):
    """Two-level annealing from h_0 = (h0x, 0, 0) to h_T = (0, 0, hTz)."""
    if h0x == 0 or hTz == 0:
        raise ValueError("annealing endpoints must be non-zero")
    start, end = (h0x, 0.0, 0.0), (0.0, 0.0, hTz)
    cls = {"trig-annealing": TrigAnnealingSchedule, "linear": LinearSchedule}[kind]
    return TwoLevelField(), cls(start, end, duration)


# --------------------------------------------------------------------------
# File formats
# --------------------------------------------------------------------------


def _decode_matrix(rows, dim):
    arr = np.asarray(rows, dtype=float)
    if arr.shape == (dim, dim, 2):
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.shape == (dim * dim, 2):
        return (arr[:, 0] + 1j * arr[:, 1]).reshape(dim, dim)
    raise ConfigError(f"matrix entry has shape {arr.shape}, expected row-major [re, im] pairs", field="H")


def encode_matrix(M):
    M = np.asarray(M, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def model_from_dict(doc):
    try:
        dim = int(doc["dim"])
        entries = doc["matrices"]
        lambdas = [e["lambda"] for e in entries]
        mats = [_decode_matrix(e["H"], dim) for e in entries]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad tabulated model: missing {exc}", field="matrices") from exc
    if "params" in doc and len(lambdas[0]) != len(doc["params"]):
        raise ConfigError("lambda length does not match params", field="params")
    return tabulated_model(lambdas, mats)


def model_to_dict(model, lambdas, params=None):
    lambdas = np.atleast_2d(np.asarray(lambdas, dtype=float))
    return {
        "dim": model.dim,
        "params": list(params) if params else [f"lambda{k}" for k in range(model.n_params)],
        "matrices": [
            {"lambda": [float(x) for x in lam], "H": encode_matrix(model.evaluate(lam))} for lam in lambdas
        ],
    }


def load_model_file(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def schedule_from_dict(doc):
    try:
        T = float(doc["T"])
        knots = doc["knots"]
        kind = doc.get("kind", "tabulated")
        ts = np.array([k["t"] for k in knots], dtype=float)
        pts = np.array([k["lambda"] for k in knots], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad schedule document: {exc}", field="knots") from exc
    if abs(ts[-1] - T) > 1e-9 * max(T, 1.0):
        raise ConfigError(f"last knot time {ts[-1]} differs from T={T}", field="T")
    ts[-1] = T
    if kind == "linear":
        return LinearSchedule(pts[0], pts[-1], T)
    if kind == "trig-annealing":
        return TrigAnnealingSchedule(pts[0], pts[-1], T)
    if kind == "piecewise-cubic":
        return PiecewiseCubicSchedule(ts, pts)
    if kind == "tabulated":
        return TabulatedSchedule(ts, pts)
    raise ConfigError(f"unknown schedule kind {kind!r}", field="kind")


def schedule_to_dict(sched, n=201):
    kind = sched.kind
    if kind in ("linear", "trig-annealing"):
        knots = [
            {"t": 0.0, "lambda": [float(x) for x in sched.start]},
            {"t": sched.duration, "lambda": [float(x) for x in sched.end]},
        ]
    elif kind in ("piecewise-cubic", "tabulated"):
        knots = [{"t": float(t), "lambda": [float(x) for x in p]} for t, p in zip(sched.times, sched.points)]
    else:
        kind = "tabulated"
        knots = sched.to_knots(n)
    return {"T": sched.duration, "kind": kind, "knots": knots}


def load_schedule_file(path):
    with open(path) as fh:
        return schedule_from_dict(json.load(fh))
