"""Batch front-end: ``nadbound <subcommand> --config run.json``.

Exit codes: 0 ok, 1 other numerical error, 2 bad configuration,
3 gap closure / level crossing, 4 bound certification failure.
Units: hbar = 1, times in inverse energy.
"""
import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .bounds import EPS_NUM, apt_instantaneous_rates, build_report, quench_transfer, running_integral
from .dynamics import make_grid
from .errors import CertificationError, ConfigError, GapClosureError, NadboundError
from .model import (
    LandauZener,
    LinearSchedule,
    PiecewiseCubicSchedule,
    TabulatedSchedule,
    TransverseFieldIsing,
    TrigAnnealingSchedule,
    TwoLevelField,
    annealing_preset,
    load_model_file,
    load_schedule_file,
    schedule_to_dict,
)
from .optimize import arc_length_reparameterize, optimize_schedule
from .spectral import spectral_frame
from .twolevel import reduction_check

TASKS = ("simulate", "bounds", "qsl", "apt", "optimize", "reduce2")
EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_GAP, EXIT_CERT = 0, 1, 2, 3, 4

log = logging.getLogger("nadbound")


# --------------------------------------------------------------------------
# Config
# --------------------------------------------------------------------------


def _resolve(path, base):
    return path if os.path.isabs(path) else os.path.join(base, path)


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})", field="config") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}", field="config") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object", field="config")
    doc.setdefault("_base", os.path.dirname(os.path.abspath(path)))
    return doc


def build_model(section, base="."):
    if not isinstance(section, dict):
        raise ConfigError("model must be an object", field="model")
    if "file" in section:
        path = _resolve(section["file"], base)
        if not os.path.exists(path):
            raise ConfigError(f"model file {path} does not exist", field="model.file")
        return load_model_file(path)
    family = section.get("family")
    if family == "two-level-field":
        return TwoLevelField()
    if family == "landau-zener":
        return LandauZener()
    if family == "transverse-field-ising":
        try:
            return TransverseFieldIsing(section["n_spins"], section.get("longitudinal", False))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad Ising model: {exc}", field="model.n_spins") from exc
    raise ConfigError(f"unknown model family {family!r}", field="model.family")


def build_schedule(section, base="."):
    if not isinstance(section, dict):
        raise ConfigError("schedule must be an object", field="schedule")
    try:
        if "file" in section:
            path = _resolve(section["file"], base)
            if not os.path.exists(path):
                raise ConfigError(f"schedule file {path} does not exist", field="schedule.file")
            return load_schedule_file(path)
        if section.get("preset") == "annealing":
            return annealing_preset(
                float(section["T"]), section.get("h0x", -1.0), section.get("hTz", -1.0), section.get("kind", "trig-annealing")
            )[1]
        kind = section.get("kind")
        T = float(section["T"])
        if kind == "linear":
            return LinearSchedule(section["start"], section["end"], T)
        if kind == "trig-annealing":
            return TrigAnnealingSchedule(section["start"], section["end"], T)
        if kind in ("piecewise-cubic", "tabulated"):
            ts = [k["t"] for k in section["knots"]]
            pts = [k["lambda"] for k in section["knots"]]
            cls = PiecewiseCubicSchedule if kind == "piecewise-cubic" else TabulatedSchedule
            return cls(ts, pts)
    except KeyError as exc:
        raise ConfigError(f"schedule is missing {exc}", field=f"schedule.{exc.args[0]}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad schedule: {exc}", field="schedule") from exc
    raise ConfigError(f"unknown schedule kind {section.get('kind')!r}", field="schedule.kind")


def validate_config(cfg):
    tasks = cfg.get("tasks")
    if not tasks or not isinstance(tasks, list):
        raise ConfigError("tasks must be a non-empty list", field="tasks")
    bad = [t for t in tasks if t not in TASKS]
    if bad:
        raise ConfigError(f"unknown task(s) {bad}; choose from {list(TASKS)}", field="tasks")
    grid = cfg.get("grid", {})
    K = grid.get("K")
    if K is not None and (not isinstance(K, int) or K < 10):
        raise ConfigError("grid.K must be an integer >= 10", field="grid.K")
    for key in ("model", "schedule"):
        if key not in cfg:
            raise ConfigError(f"missing {key}", field=key)
    return cfg


# --------------------------------------------------------------------------
# Pipeline
# --------------------------------------------------------------------------


def _grid_for(cfg, sched):
    grid = cfg.get("grid", {})
    return make_grid(sched.duration, grid.get("K"), grid.get("dt_max"))


def _apt_summary(model, sched, grid, levels, delta_t):
    """APT rate estimates next to exact quench transfers at a few interior times."""
    out = []
    for t in np.linspace(0.0, sched.duration - delta_t, 5):
        f0 = spectral_frame(model, sched, t)
        f1 = spectral_frame(model, sched, t + delta_t)
        for n in levels:
            for m in levels:
                if n == m or n >= f0.n_levels or m >= f0.n_levels:
                    continue
                rates = apt_instantaneous_rates(f0, delta_t, n, m)
                out.append(
                    {
                        "t": float(t),
                        "n": n,
                        "m": m,
                        "pair_rate": rates.pair_rate,
                        "level_rate": rates.level_rate,
                        "quench_transfer": quench_transfer(f0, f1, n, m),
                    }
                )
    return out


def write_integrands(report, path):
    t = np.asarray(report.times)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "m", "qgt_integrand", "running_bound", "cd_norm", "apt_level_rate"])
        for m, y in sorted(report.qgt_integrands.items()):
            run = running_integral(y, t) ** 2
            apt = report.apt_level_rates.get(m, [float("nan")] * len(t))
            for k in range(len(t)):
                w.writerow([repr(float(t[k])), m, repr(float(y[k])), repr(float(run[k])), repr(float(report.cd_norms[k])), repr(float(apt[k]))])


def run(cfg, out_dir, plot=False):
    """Execute the configured tasks, write artifacts and return an exit status."""
    cfg = validate_config(cfg)
    base = cfg.get("_base", ".")
    os.makedirs(out_dir, exist_ok=True)
    _setup_log(os.path.join(out_dir, "run.log"))
    echo = {k: v for k, v in cfg.items() if not k.startswith("_")}
    log.info("nadbound %s", __version__)
    log.info("config %s", json.dumps(echo, sort_keys=True))

    model = build_model(cfg["model"], base)
    sched = build_schedule(cfg["schedule"], base)
    if sched.dim_params != model.n_params:
        raise ConfigError(
            f"schedule has {sched.dim_params} parameters, model expects {model.n_params}", field="schedule"
        )
    tasks = cfg["tasks"]
    grid = _grid_for(cfg, sched)
    levels = cfg.get("levels")
    delta_deg = cfg.get("delta_deg")
    eps = float(cfg.get("eps_num", EPS_NUM))
    run_id = str(cfg.get("run_id", "run"))
    doc = {"version": __version__, "run_id": run_id, "tasks": tasks}
    report = None

    if {"simulate", "bounds", "qsl", "apt"} & set(tasks):
        qsl_levels = ()
        if "qsl" in tasks:
            qsl_levels = tuple(cfg.get("qsl", {}).get("levels", levels or [0]))
        report = build_report(
            model,
            sched,
            grid,
            levels,
            int(cfg.get("checkpoints", 20)),
            run_id,
            delta_deg,
            qsl_levels=qsl_levels,
            apt="apt" in tasks,
        )
        report.write_csv(os.path.join(out_dir, "timeseries.csv"))
        write_integrands(report, os.path.join(out_dir, "integrands.csv"))
        doc["report"] = report.to_dict()
        for w in report.warnings:
            log.warning(w)
        if "apt" in tasks:
            dt = cfg.get("apt", {}).get("delta_t") or float(np.max(np.diff(grid)))
            doc["apt"] = _apt_summary(model, sched, grid, report.meta["levels"], dt)
        if plot:
            from .plotting import plot_integrands, plot_rates

            fig_dir = os.path.join(out_dir, "figures")
            os.makedirs(fig_dir, exist_ok=True)
            plot_rates(report, os.path.join(fig_dir, "rates.png"))
            plot_integrands(report, os.path.join(fig_dir, "integrands.png"))

    if "optimize" in tasks:
        opt = cfg.get("optimize", {})
        ends = opt.get("endpoints") or [list(sched.start), list(sched.end)]
        level = int(opt.get("level", 0))
        cand = optimize_schedule(
            model,
            ends,
            level,
            int(opt.get("n_knots", 6)),
            int(opt.get("budget", 2000)),
            int(opt.get("restarts", 3)),
            seed=int(cfg.get("seed", 0)),
        )
        path_sched = cand.schedule(sched.duration)
        uniform = arc_length_reparameterize(model, path_sched, level)
        with open(os.path.join(out_dir, "optimized_schedule.json"), "w") as fh:
            json.dump(schedule_to_dict(uniform), fh, indent=2)
        doc["optimize"] = {
            "level": level,
            "objective": cand.objective,
            "bound": cand.objective**2,
            "evaluations": cand.evaluations,
            "trace": [[int(i), float(v)] for i, v in cand.trace],
            "knots": cand.control_points().tolist(),
        }
        log.info("optimize: objective %.9f after %d evaluations", cand.objective, cand.evaluations)
        if plot:
            from .plotting import plot_trace

            fig_dir = os.path.join(out_dir, "figures")
            os.makedirs(fig_dir, exist_ok=True)
            plot_trace(cand.trace, os.path.join(fig_dir, "optimize_trace.png"))

    if "reduce2" in tasks:
        chk = reduction_check(model, sched, grid, delta_deg)
        doc["reduce2"] = {
            "reduced_p01": chk.reduced_p,
            "full_p01": chk.full_p,
            "leakage": chk.leakage,
            "relative_error": chk.relative_error,
        }
        log.info("reduce2: reduced %.6g full %.6g leakage %.3g", chk.reduced_p, chk.full_p, chk.leakage)

    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)

    if report is not None and "bounds" in tasks:
        report.certify(eps)
    return EXIT_OK


def _setup_log(path):
    for h in list(log.handlers):
        log.removeHandler(h)
        h.close()
    handler = logging.FileHandler(path, mode="w")
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    log.propagate = False


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------


def make_parser():
    p = argparse.ArgumentParser(
        prog="nadbound",
        description="Bounds for nonadiabatic transitions (hbar = 1; times in inverse energy units).",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run",) + TASKS:
        sp = sub.add_parser(name, help="all configured tasks" if name == "run" else f"only the {name} task")
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", default=None, help="output directory (default: config 'output' or ./out)")
        sp.add_argument("--seed", type=int, default=None, help="seed for randomized steps")
        sp.add_argument("--dt-max", type=float, default=None, help="largest time step")
        sp.add_argument("--grid", type=int, default=None, help="number of time steps K (>= 10)")
        sp.add_argument("--plot", action="store_true", help="also render PNG figures into <out>/figures")
    return p


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command != "run":
            cfg["tasks"] = [args.command]
        if args.seed is not None:
            cfg["seed"] = args.seed
        grid = dict(cfg.get("grid", {}))
        if args.dt_max is not None:
            grid["dt_max"] = args.dt_max
        if args.grid is not None:
            grid["K"] = args.grid
        cfg["grid"] = grid
        out = args.out or cfg.get("output") or "out"
        return run(cfg, out, plot=args.plot)
    except ConfigError as exc:
        field = f" [field: {exc.field}]" if exc.field else ""
        print(f"config error: {exc}{field}", file=sys.stderr)
        return EXIT_CONFIG
    except GapClosureError as exc:
        print(f"gap closure at t={exc.time}: {exc}", file=sys.stderr)
        return EXIT_GAP
    except CertificationError as exc:
        print(f"certification failed: {exc}\n  offending record: {exc.record}", file=sys.stderr)
        return EXIT_CERT
    except NadboundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
