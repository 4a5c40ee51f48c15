"""Brachistochrone-style path optimization of the geometric-tensor bound.

The objective is the path length int ||(1 - P_m) dP_m/ds|| ds, which does not
depend on how the path is traversed in time. Paths are cubic splines through
frozen endpoints and free interior knots; the interior knots are searched with
Nelder-Mead plus random restarts, and the time law is fixed afterwards by
arc-length uniformity.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline, PchipInterpolator
from scipy.optimize import brentq, minimize

from .bounds import integrate
from .errors import NadboundError
from .model import PiecewiseCubicSchedule, ReparameterizedSchedule
from .spectral import SpectralFrame

DEFAULT_KNOTS = 6
DEFAULT_RESTARTS = 3
DEFAULT_SAMPLES = 129


def _path_spline(endpoints, interior):
    a, b = endpoints
    pts = np.vstack([a, interior, b])
    s = np.linspace(0.0, 1.0, len(pts))
    bc = "natural" if len(pts) == 3 else "not-a-knot"
    if len(pts) == 2:
        return s, pts, CubicSpline(s, pts, axis=0, bc_type=((1, b - a), (1, b - a)))
    return s, pts, CubicSpline(s, pts, axis=0, bc_type=bc)


def _level_speeds(model, lams, rates, m, delta_rtol=1e-8):
    """||(1 - P_m) dP_m/ds|| at each sample; inf where level m touches a neighbour."""
    H = model.evaluate_many(lams)
    Hd = model.drive_many(lams, rates)
    w, V = np.linalg.eigh(H)
    scale = np.max(np.abs(w), axis=1)
    delta = delta_rtol * np.maximum(scale, 1e-300)
    gaps = np.diff(w, axis=1)
    d = w.shape[1]
    if d < 2 or m >= d:
        raise IndexError(f"level {m} not available")
    lower_ok = gaps[:, m - 1] > delta if m > 0 else np.ones(len(w), bool)
    upper_ok = gaps[:, m] > delta if m < d - 1 else np.ones(len(w), bool)
    if not (np.all(lower_ok) and np.all(upper_ok)):
        # degeneracy at some sample: fall back to grouped frames there
        out = np.empty(len(w))
        for i in range(len(w)):
            try:
                out[i] = SpectralFrame(H[i], Hd[i]).qgt_norm(m)
            except NadboundError:
                out[i] = np.inf
        return out
    col = np.einsum("nij,njk,nk->ni", np.conj(np.swapaxes(V, 1, 2)), Hd, V[:, :, m])
    denom = w[:, m][:, None] - w
    denom[:, m] = 1.0
    terms = np.abs(col) ** 2 / denom**2
    terms[:, m] = 0.0
    return np.sqrt(terms.sum(axis=1))


def path_objective(model, endpoints, interior, m, samples=DEFAULT_SAMPLES, rtol=1e-6, max_doublings=3):
    """Length of the level-m path through ``interior`` knots; inf if a gap closes.

    The sample count doubles until two successive Simpson estimates agree to
    ``rtol``. If they never do, the disagreement is added as a penalty so that
    under-resolved paths cannot look shorter than they are.
    """
    interior = np.asarray(interior, dtype=float).reshape(-1, len(endpoints[0]))
    _, _, spline = _path_spline(endpoints, interior)
    n = samples
    coarse = None
    for _ in range(max_doublings + 1):
        s = np.linspace(0.0, 1.0, n)
        try:
            speeds = _level_speeds(model, spline(s), spline(s, 1), m)
        except (np.linalg.LinAlgError, ValueError):
            return math.inf
        if not np.all(np.isfinite(speeds)):
            return math.inf
        fine = integrate(speeds, s)
        if coarse is None:
            coarse = integrate(speeds[::2], s[::2])
        err = abs(fine - coarse)
        if err <= rtol * max(fine, 1.0):
            return fine
        coarse = fine
        n = 2 * n - 1
    return fine + err


@dataclass
class PathCandidate:
    """Best path found: interior knots, length objective and best-so-far trace."""

    endpoints: tuple
    knots: np.ndarray
    objective: float
    trace: list = field(default_factory=list)
    evaluations: int = 0
    level: int = 0

    def control_points(self):
        return np.vstack([self.endpoints[0], self.knots, self.endpoints[1]])

    def schedule(self, duration=1.0):
        """The geometric path as a spline schedule with uniformly spaced knots in time."""
        pts = self.control_points()
        times = np.linspace(0.0, duration, len(pts))
        return PiecewiseCubicSchedule(times, pts)


def optimize_schedule(
    model,
    endpoints,
    m=0,
    n_knots=DEFAULT_KNOTS,
    budget=2000,
    restarts=DEFAULT_RESTARTS,
    seed=0,
    initial=None,
    samples=DEFAULT_SAMPLES,
    xatol=1e-7,
    fatol=1e-10,
):
    """Minimize the level-``m`` path length between fixed ``endpoints``.

    ``budget`` caps objective evaluations over all restarts. The first start is
    ``initial`` (interior knots, default: the straight segment); the others are
    seeded random perturbations of the best point found so far.
    """
    a = np.asarray(endpoints[0], dtype=float)
    b = np.asarray(endpoints[1], dtype=float)
    if a.shape != b.shape or a.size != model.n_params:
        raise ValueError("endpoints must both have one entry per model parameter")
    endpoints = (a, b)
    if np.allclose(a, b, rtol=0, atol=0):
        knots = np.repeat(a[None, :], n_knots, axis=0)
        return PathCandidate(endpoints, knots, 0.0, [(1, 0.0)], 1, m)
    s = np.linspace(0.0, 1.0, n_knots + 2)[1:-1]
    if initial is None:
        x0 = (a[None, :] + s[:, None] * (b - a)[None, :]).ravel()
    else:
        x0 = np.asarray(initial, dtype=float).ravel()
        if x0.size != n_knots * a.size:
            raise ValueError("initial knots have the wrong shape")

    rng = np.random.default_rng(seed)
    state = {"evals": 0, "best": math.inf, "x": x0.copy()}
    trace = []

    def f(x):
        if state["evals"] >= budget:
            return math.inf
        state["evals"] += 1
        val = path_objective(model, endpoints, x, m, samples)
        if val < state["best"]:
            state["best"] = val
            state["x"] = x.copy()
            trace.append((state["evals"], val))
        return val

    spread = 0.1 * float(np.linalg.norm(b - a))
    restarts = max(1, int(restarts))
    for r in range(restarts):
        remaining = budget - state["evals"]
        if remaining <= a.size * n_knots + 1:
            break
        share = remaining // (restarts - r)
        start = x0 if r == 0 else state["x"] + spread * rng.normal(size=x0.size)
        minimize(
            f,
            start,
            method="Nelder-Mead",
            options={"maxfev": share, "xatol": xatol, "fatol": fatol, "adaptive": True},
        )
    if not math.isfinite(state["best"]):
        raise NadboundError("no probed path kept the target level's gaps open")
    knots = state["x"].reshape(n_knots, a.size)
    return PathCandidate(endpoints, knots, state["best"], trace, state["evals"], m)


def arc_length_reparameterize(model, sched, m=0, samples=2001, duration=None):
    """Same geometric path, traversed so that ||(1 - P_m) dP_m/dt|| is constant.

    The duration is preserved unless ``duration`` is given. The time map is
    found by root finding on the monotone interpolant of the arc length, and
    its rate uses the exact local speed, so the new speed is uniform wherever
    the original path moves.
    """
    duration = sched.duration if duration is None else float(duration)
    s = np.linspace(0.0, sched.duration, samples)
    lams = np.array([sched.value(x) for x in s])
    rates = np.array([sched.derivative(x) for x in s])
    speeds = _level_speeds(model, lams, rates, m)
    if not np.all(np.isfinite(speeds)):
        raise NadboundError("gap closes along the path")
    ell = np.maximum.accumulate(cumulative_simpson(speeds, x=s, initial=0.0))
    total = ell[-1]
    if not total > 0:
        raise ValueError("zero-length path cannot be reparameterized")
    keep = np.concatenate([[True], np.diff(ell) > 0])
    tau_of_s = PchipInterpolator(s[keep], duration * ell[keep] / total)
    s_lo, s_hi = s[keep][0], s[keep][-1]

    def s_of_t(t):
        if t <= 0.0:
            return s_lo
        if t >= duration:
            return s_hi
        return brentq(lambda x: tau_of_s(x) - t, s_lo, s_hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)

    def rate_of_s(x):
        v = _level_speeds(model, sched.value(x)[None, :], sched.derivative(x)[None, :], m)[0]
        return total / (duration * v) if v > 0 else math.inf

    return ReparameterizedSchedule(sched, s_of_t, rate_of_s, duration)
