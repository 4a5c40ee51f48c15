"""Bound integrals, adiabatic-perturbation rates, speed-limit chain and reports.

All time integrals are composite Simpson on the frame times. A second Simpson
pass on every other point serves as the refinement check.
"""
import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from .dynamics import PropagatorPair, grid_frames, make_grid, propagate, rate_between
from .errors import CertificationError, InvalidStateError
from .operators import as_matrix, dagger, hermitian_defect

EPS_NUM = 1e-3
QUADRATURE_RTOL = 1e-4
STATE_TOL = 1e-10
CHAIN_SLACK = 1e-8

CSV_COLUMNS = ("run_id", "t", "n", "m", "p", "qgt_bound", "universal_bound", "remaining_bound", "margin", "warn")


# --------------------------------------------------------------------------
# Quadrature
# --------------------------------------------------------------------------


def _times(frames):
    return np.array([f.t for f in frames])


def integrate(y, t):
    y = np.asarray(y, dtype=float)
    if y.size < 2:
        return 0.0
    if y.size == 2:
        return float(0.5 * (y[0] + y[1]) * (t[1] - t[0]))
    return float(simpson(y, x=t))


def running_integral(y, t):
    y = np.asarray(y, dtype=float)
    if y.size < 3:
        return np.concatenate([[0.0], np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))])
    return cumulative_simpson(y, x=t, initial=0.0)


def refinement_gap(y, t):
    """Relative change of the Simpson integral when every other sample is dropped."""
    y, t = np.asarray(y, dtype=float), np.asarray(t, dtype=float)
    if len(y) < 5:
        return 0.0
    if (len(y) - 1) % 2:
        y, t = y[:-1], t[:-1]
    full = integrate(y, t)
    half = integrate(y[::2], t[::2])
    return abs(full - half) / max(abs(full), 1e-12)


def qgt_integrand(frames, m):
    return np.array([f.qgt_norm(m) for f in frames])


def cd_norm_integrand(frames):
    return np.array([f.h_cd_norm for f in frames])


def qgt_bound_integral(frames, m):
    """[int_0^t ||(1 - P_m) dP_m/dt|| dt']^2 over the span of ``frames``."""
    return integrate(qgt_integrand(frames, m), _times(frames)) ** 2


def remaining_bound(frames, n):
    """Lower bound 1 - [int ||(1 - P_n) dP_n/dt||]^2 on p_nn; negative means vacuous."""
    return 1.0 - qgt_bound_integral(frames, n)


class UniversalBounds(NamedTuple):
    transition: float
    remaining: float


def universal_bounds(frames):
    length = integrate(cd_norm_integrand(frames), _times(frames))
    return UniversalBounds(length**2, 1.0 - length**2)


# --------------------------------------------------------------------------
# Adiabatic perturbation theory
# --------------------------------------------------------------------------


class AptRates(NamedTuple):
    pair_rate: float
    level_rate: float


def apt_instantaneous_rates(frame, delta_t, n, m):
    """Quench estimates dt^2 ||P_n dP_m||^2 (pair) and dt^2 ||(1-P_m) dP_m||^2 (level)."""
    if not delta_t > 0:
        raise ValueError("delta_t must be positive")
    return AptRates(delta_t**2 * frame.pair_speed(n, m) ** 2, delta_t**2 * frame.qgt_norm(m) ** 2)


def quench_transfer(frame_t, frame_later, n, m):
    """||P_m(t+dt) P_n(t) P_m(t+dt)|| from two exact frames."""
    overlap = frame_later.level_vectors(m).conj().T @ frame_t.level_vectors(n)
    return float(np.linalg.svd(overlap, compute_uv=False)[0] ** 2)


def quench_level_transfer(frame_t, frame_later, m):
    """||sum_{n != m} P_m(t+dt) P_n(t) P_m(t+dt)||."""
    Vm = frame_later.level_vectors(m)
    outside = frame_t.vectors[:, frame_t.labels != m]
    overlap = outside.conj().T @ Vm
    if overlap.size == 0:
        return 0.0
    return float(np.linalg.svd(overlap, compute_uv=False)[0] ** 2)


# --------------------------------------------------------------------------
# Speed limit
# --------------------------------------------------------------------------


def _psd_sqrt(rho):
    w, V = np.linalg.eigh(0.5 * (rho + dagger(rho)))
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ dagger(V)


def check_state(rho, tol=STATE_TOL):
    rho = as_matrix(rho)
    if hermitian_defect(rho) > tol:
        raise InvalidStateError("density matrix is not Hermitian")
    w = np.linalg.eigvalsh(0.5 * (rho + dagger(rho)))
    if w[0] < -tol:
        raise InvalidStateError(f"density matrix has negative eigenvalue {w[0]:.3e}")
    if abs(np.trace(rho).real - 1.0) > tol:
        raise InvalidStateError(f"density matrix trace {np.trace(rho).real:.12f} != 1")
    return 0.5 * (rho + dagger(rho))


def _is_pure(rho):
    return abs(np.trace(rho @ rho).real - 1.0) < 1e-12


def uhlmann_fidelity(rho_i, rho_f):
    rho_i, rho_f = check_state(rho_i), check_state(rho_f)
    if _is_pure(rho_i) or _is_pure(rho_f):
        return float(min(max(np.trace(rho_i @ rho_f).real, 0.0), 1.0))
    s = _psd_sqrt(rho_i)
    inner = np.linalg.eigvalsh(s @ rho_f @ s)
    return float(min(np.sum(np.sqrt(np.clip(inner, 0.0, None))) ** 2, 1.0))


def bures_angle(rho_i, rho_f):
    return float(np.arccos(math.sqrt(uhlmann_fidelity(rho_i, rho_f))))


@dataclass
class QslRecord:
    L: float
    cd_std_integral: float
    qgt_integral: float
    leakage: float = 0.0
    max_cd_mean: float = 0.0

    def holds(self, slack=CHAIN_SLACK):
        return self.L <= self.cd_std_integral + slack and self.cd_std_integral <= self.qgt_integral + slack


def _projected_state(rho, frame, m):
    V = frame.level_vectors(m)
    inner = V.conj().T @ rho @ V
    kept = np.trace(inner).real
    return V @ (inner / kept) @ V.conj().T, 1.0 - kept


def qsl_chain(frames, pair, m, rho_m0):
    """Bures angle of the adiabatically moved level-m state and its two upper bounds.

    The transported state is re-projected onto P_m(t) (discretization leaks
    O(dt^2) weight out of the level); the dropped weight is reported as
    ``leakage``.
    """
    U_A = pair.U_A if isinstance(pair, PropagatorPair) else pair
    if len(U_A) != len(frames):
        raise ValueError("frames and propagators must share the grid")
    rho0 = check_state(rho_m0)
    P0 = frames[0].projector(m)
    if np.max(np.abs(rho0 - P0 @ rho0 @ P0)) > STATE_TOL:
        raise InvalidStateError(f"initial state leaks outside level {m}")
    stds = np.empty(len(frames))
    leak = 0.0
    max_mean = 0.0
    rho_t = rho0
    for k, (frame, U) in enumerate(zip(frames, U_A)):
        rho_t, lost = _projected_state(U @ rho0 @ dagger(U), frame, m)
        leak = max(leak, lost)
        Hcd = frame.h_cd
        mean = np.trace(Hcd @ rho_t).real
        max_mean = max(max_mean, abs(mean))
        stds[k] = math.sqrt(max(np.trace(Hcd @ Hcd @ rho_t).real - mean**2, 0.0))
    t = _times(frames)
    return QslRecord(
        L=bures_angle(rho0, rho_t),
        cd_std_integral=integrate(stds, t),
        qgt_integral=integrate(qgt_integrand(frames, m), t),
        leakage=float(leak),
        max_cd_mean=float(max_mean),
    )


# --------------------------------------------------------------------------
# Reports
# --------------------------------------------------------------------------


@dataclass
class BoundRecord:
    run_id: str
    t: float
    n: int
    m: int
    p: float
    qgt_bound: float
    universal_bound: float
    remaining_bound: float | None
    margin: float
    warn: str = ""

    def as_row(self):
        rb = "" if self.remaining_bound is None else repr(float(self.remaining_bound))
        return [
            self.run_id,
            repr(float(self.t)),
            str(self.n),
            str(self.m),
            repr(float(self.p)),
            repr(float(self.qgt_bound)),
            repr(float(self.universal_bound)),
            rb,
            repr(float(self.margin)),
            self.warn,
        ]

    @classmethod
    def from_row(cls, row):
        return cls(
            run_id=row["run_id"],
            t=float(row["t"]),
            n=int(row["n"]),
            m=int(row["m"]),
            p=float(row["p"]),
            qgt_bound=float(row["qgt_bound"]),
            universal_bound=float(row["universal_bound"]),
            remaining_bound=None if row["remaining_bound"] == "" else float(row["remaining_bound"]),
            margin=float(row["margin"]),
            warn=row["warn"],
        )


@dataclass
class BoundReport:
    """Measured rates next to every bound, plus integrand series and diagnostics.

    For n != m the margin is ``qgt_bound - p``; for n == m it is
    ``p - remaining_bound``. ``qgt_bound``/``universal_bound`` always hold the
    squared integrals, so for n == m the lower bounds are one minus them.
    """

    run_id: str
    records: list
    times: list = field(default_factory=list)
    qgt_integrands: dict = field(default_factory=dict)
    cd_norms: list = field(default_factory=list)
    apt_level_rates: dict = field(default_factory=dict)
    qsl: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def violations(self, eps=EPS_NUM):
        return [r for r in self.records if r.margin < -eps]

    def certify(self, eps=EPS_NUM):
        bad = self.violations(eps)
        if bad:
            raise CertificationError(f"{len(bad)} record(s) violate their bound by more than {eps}", record=bad[0])
        return self

    def to_dict(self):
        return {
            "run_id": self.run_id,
            "meta": self.meta,
            "warnings": self.warnings,
            "records": [asdict(r) for r in self.records],
            "series": {
                "t": list(map(float, self.times)),
                "qgt_integrand": {str(k): list(map(float, v)) for k, v in self.qgt_integrands.items()},
                "cd_norm": list(map(float, self.cd_norms)),
                "apt_level_rate": {str(k): list(map(float, v)) for k, v in self.apt_level_rates.items()},
            },
            "qsl": {str(k): asdict(v) for k, v in self.qsl.items()},
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    def write_csv(self, path):
        write_records_csv(self.records, path)


def write_records_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow(r.as_row())


def read_records_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        return [BoundRecord.from_row(row) for row in reader]


def checkpoint_indices(n_points, count):
    """``count`` grid indices spread over (0, n_points-1], always including the end."""
    count = max(1, min(count, n_points - 1))
    return sorted({int(round(x)) for x in np.linspace(0, n_points - 1, count + 1)[1:]})


def build_report(
    model,
    sched,
    grid=None,
    levels=None,
    checkpoints=20,
    run_id="run",
    delta_deg=None,
    qsl_levels=(),
    apt=True,
):
    """Propagate, evaluate every bound at the checkpoints and collect diagnostics.

    ``levels`` are the level labels of interest (default: all levels at t=0);
    bounds are reported for every ordered pair drawn from them.
    """
    if grid is None:
        grid = make_grid(sched.duration)
    grid = np.asarray(grid, dtype=float)
    if levels is None:
        tracked = None
    else:
        levels = sorted(set(int(x) for x in levels))
        tracked = range(max(levels) + 1)
    frames = grid_frames(model, sched, grid, delta_deg, tracked)
    if levels is None:
        levels = list(range(frames[0].n_levels))
    U_D = propagate(model, sched, grid, "dynamical")

    t = grid
    qgt = {m: qgt_integrand(frames, m) for m in levels}
    cdn = cd_norm_integrand(frames)
    qgt_run = {m: running_integral(qgt[m], t) for m in levels}
    cd_run = running_integral(cdn, t)

    warnings = []
    near = np.array([bool(f.warnings) for f in frames])
    for f in frames:
        warnings.extend(f.warnings)
    refine = False
    for m in levels:
        gap = refinement_gap(qgt[m], t)
        if gap > QUADRATURE_RTOL:
            refine = True
            warnings.append(f"level {m}: quadrature refinement changes integral by {gap:.2e} (rel); refine grid")
    near_upto = np.cumsum(near) > 0

    records = []
    for k in checkpoint_indices(len(grid), checkpoints):
        for n in levels:
            for m in levels:
                p = rate_between(U_D[k], frames[0], frames[k], n, m)
                qb = qgt_run[m][k] ** 2
                ub = cd_run[k] ** 2
                flags = []
                if near_upto[k]:
                    flags.append("near-crossing")
                if refine:
                    flags.append("refine")
                if n == m:
                    rb = 1.0 - qgt_run[n][k] ** 2
                    margin = p - rb
                    if rb < 0:
                        flags.append("vacuous")
                else:
                    rb = None
                    margin = qb - p
                records.append(
                    BoundRecord(
                        run_id,
                        float(t[k]),
                        n,
                        m,
                        float(p),
                        float(qb),
                        float(ub),
                        None if rb is None else float(rb),
                        float(margin),
                        ";".join(flags),
                    )
                )

    apt_rates = {}
    if apt:
        dt = float(np.max(np.diff(grid)))
        apt_rates = {m: dt**2 * qgt[m] ** 2 for m in levels}

    qsl = {}
    if qsl_levels:
        U_A = propagate(model, sched, grid, "adiabatic", delta_deg=delta_deg)
        for m in qsl_levels:
            V = frames[0].level_vectors(m)
            rho = V @ V.conj().T / V.shape[1]
            qsl[m] = qsl_chain(frames, U_A, m, rho)

    return BoundReport(
        run_id=run_id,
        records=records,
        times=list(t),
        qgt_integrands={m: list(qgt[m]) for m in levels},
        cd_norms=list(cdn),
        apt_level_rates={m: list(v) for m, v in apt_rates.items()},
        qsl=qsl,
        warnings=warnings,
        meta={"steps": len(grid) - 1, "duration": float(sched.duration), "levels": levels},
    )
