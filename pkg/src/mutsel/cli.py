"""Command-line entry point: ``mutsel <subcommand> [--config FILE] [--out DIR]``.

Subcommands
  simulate   run the nonlinear model, write snapshot CSVs, mass series, metadata
  spectrum   dominant eigenpair as JSON (plus psi.csv)
  fig1       solution and the three profiles at the eight reference times
  fig2       L1 error curves against the profiles
  regimes    (eps, t) regime map
  rates      slope of the eigenvalue expansion error over an eps ladder
  verify     fast property suite, one PASS/FAIL line per check

Exit codes: 0 ok, 2 configuration or argument error, 3 numerical failure,
4 verify failure. Errors are reported on stderr as one JSON object.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import os
import sys
import time
from dataclasses import replace
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from . import __version__
from .analysis import error_curves, expansion_rate, regime_sweep
from .config import RunConfig, build_initial, load_config, parse_config
from .core import raw_kernel_mass, resolution_ok
from .errors import ConfigError, MutselError, NumericalFailure
from .profiles import gamma1, gamma2, steady_state
from .simulator import run
from .spectral import expansion_gap, expansion_prediction, solve_lambda
from .verify import run_checks

log = logging.getLogger("mutsel")

FIG1_TIMES = (0.0, 10.0, 1e2, 1e3, 1e4, 1e5, 1.5e5, 1.75e5)
REFERENCE_CONFIG = """{
  "epsilon": 0.01,
  "domain": [-1.5, 1.5],
  "kernel": {"type": "gaussian", "sigma2": 10, "normalize": true},
  "init": {"type": "cauchy_shifted", "shift": 1.0}
}"""

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VERIFY = 0, 2, 3, 4


# -- output helpers -----------------------------------------------------------

def fmt(value) -> str:
    """Shortest round-trip decimal form, so reruns give identical bytes."""
    if isinstance(value, str):
        return value
    return repr(float(value))


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_json(path: str, data) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _time_tag(t: float) -> str:
    return f"{t:012.3f}".replace(".", "p")


def _out_dir(args, cfg: RunConfig) -> str:
    out = args.out or os.path.join(cfg.base_dir, cfg.outputs)
    os.makedirs(out, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise ConfigError("outputs", f"directory not writable: {out}")
    return out


def _metadata(cfg: RunConfig, **extra) -> Dict:
    data = {
        "version": __version__,
        "config": cfg.to_dict(),
        "raw_kernel_mass": raw_kernel_mass(cfg.params.kernel, cfg.params.interval),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    data.update(extra)
    return data


def _model(cfg: RunConfig):
    model = cfg.model()
    if cfg.params.epsilon > 0 and not resolution_ok(model):
        log.warning(
            "grid spacing %.3g does not resolve the Cauchy scale gamma(0) pi eps = %.3g; increase grid.n",
            model.grid.h, model.gamma0 * math.pi * cfg.params.epsilon,
        )
    return model


# -- subcommands -----------------------------------------------------------------

def cmd_simulate(args, cfg: RunConfig) -> int:
    out = _out_dir(args, cfg)
    model = _model(cfg)
    f0 = build_initial(cfg, model)
    start = time.perf_counter()
    traj = run(model, f0, cfg.stepper)
    wall = time.perf_counter() - start
    x = model.grid.nodes
    for snap in traj.snapshots:
        write_csv(os.path.join(out, f"snapshot_t{_time_tag(snap.t)}.csv"), ("x", "f"), zip(x, snap.values))
    write_csv(os.path.join(out, "mass_series.csv"), ("t", "mass"), traj.mass_series)
    residuals = {}
    if cfg.params.epsilon > 0:
        spec = solve_lambda(cfg.params, model.grid)
        final = traj.snapshots[-1]
        st = steady_state(spec).values
        residuals = {
            "characteristic": spec.residual,
            "final_steady_l1_relative": float(model.grid.weights @ np.abs(final.values - st)) / spec.lam,
        }
    s = cfg.stepper
    meta = _metadata(
        cfg,
        scheme=s.scheme,
        dt=s.dt,
        late_scheme=s.late_scheme if s.switches else None,
        late_dt=s.late_dt if s.switches else None,
        wall_time_s=wall,
        residuals=residuals,
        snapshots=len(traj.snapshots),
    )
    write_json(os.path.join(out, "metadata.json"), meta)
    print(json.dumps({"out": out, "snapshots": len(traj.snapshots), "final_mass": traj.snapshots[-1].mass}))
    return EXIT_OK


def cmd_spectrum(args, cfg: RunConfig) -> int:
    model = _model(cfg)
    spec = solve_lambda(cfg.params, model.grid)
    doc = {
        "epsilon": spec.epsilon,
        "lambda": spec.lam,
        "nu": spec.nu,
        "residual": spec.residual,
        "prediction": expansion_prediction(cfg.params, model.grid),
        "gap": expansion_gap(spec),
    }
    if args.out:
        out = _out_dir(args, cfg)
        write_csv(os.path.join(out, "psi.csv"), ("x", "psi", "psi_adjoint"), zip(model.grid.nodes, spec.psi, spec.psi_adjoint))
        write_json(os.path.join(out, "spectrum.json"), doc)
    print(json.dumps(doc, sort_keys=True))
    return EXIT_OK


def cmd_fig1(args, cfg: RunConfig) -> int:
    out = _out_dir(args, cfg)
    model = _model(cfg)
    f0 = build_initial(cfg, model)
    times = tuple(t for t in FIG1_TIMES if t <= cfg.stepper.t_end)
    stepper = replace(cfg.stepper, snapshot_times=times)
    start = time.perf_counter()
    traj = run(model, f0, stepper)
    wall = time.perf_counter() - start
    spec = solve_lambda(cfg.params, model.grid)
    g2 = gamma2(cfg.params, model.grid).values
    st = steady_state(spec).values
    x = model.grid.nodes
    for snap in traj.snapshots:
        g1 = gamma1(f0, snap.t, model.grid).values if snap.t > 0 else np.full_like(x, math.nan)
        write_csv(
            os.path.join(out, f"fig1_t{_time_tag(snap.t)}.csv"),
            ("x", "f", "gamma1", "gamma2", "steady"),
            zip(x, snap.values, g1, g2, st),
        )
    write_json(os.path.join(out, "metadata.json"), _metadata(cfg, times=list(times), wall_time_s=wall, residuals={"characteristic": spec.residual}))
    print(json.dumps({"out": out, "times": list(times)}))
    return EXIT_OK


FIG2_GNUPLOT = """set terminal pngcairo size 900,600
set output 'fig2.png'
set datafile separator ','
set logscale xy
set format x '10^{%L}'
set xlabel 't'
set ylabel 'L^1 error'
set key top right
plot 'error_curve.csv' every ::1 using 1:2 with lines lw 2 lc rgb 'red' title '||f - Gamma_1(t)||', \\
     '' every ::1 using 1:3 with lines lw 2 lc rgb 'black' title '||f - Gamma_2||', \\
     '' every ::1 using 1:4 with lines dt 2 lc rgb 'blue' title '||f - lambda psi||'
"""


def cmd_fig2(args, cfg: RunConfig) -> int:
    out = _out_dir(args, cfg)
    model = _model(cfg)
    f0 = build_initial(cfg, model)
    start = time.perf_counter()
    traj = run(model, f0, cfg.stepper)
    wall = time.perf_counter() - start
    spec = solve_lambda(cfg.params, model.grid)
    curve = error_curves(traj, spec, f0)
    write_csv(os.path.join(out, "error_curve.csv"), ("t", "err_gamma1", "err_gamma2", "err_steady", "mass"), curve.rows())
    if args.emit_gnuplot:
        with open(os.path.join(out, "fig2.gp"), "w") as fh:
            fh.write(FIG2_GNUPLOT)
    write_json(os.path.join(out, "metadata.json"), _metadata(cfg, wall_time_s=wall, residuals={"characteristic": spec.residual}))
    j = int(np.argmin(curve.err_gamma1))
    print(json.dumps({"out": out, "rows": len(curve.times), "argmin_err_gamma1_t": curve.times[j]}))
    return EXIT_OK


REGIMES_GNUPLOT = """set terminal pngcairo size 900,600
set output 'regimes.png'
set datafile separator ','
set logscale xy
set xlabel 'epsilon'
set ylabel 't'
set cbrange [0:2]
set cbtics ('gaussian' 0, 'cauchy' 1, 'neither' 2)
set palette defined (0 'red', 1 'black', 2 'grey80')
code(w) = (w eq 'gaussian') ? 0 : (w eq 'cauchy') ? 1 : 2
set xrange [{xmin}:{xmax}]
set yrange [{ymin}:{ymax}]
plot 'regimes.csv' every ::1 using 1:2:(code(strcol(3))) with points pt 5 ps 3 palette notitle, \\
     x**-4 with lines lw 2 lc rgb 'black' title 't = eps^{{-4}}', \\
     x**(-2./3) with lines lw 2 dt 2 lc rgb 'red' title 't = eps^{{-2/3}}'
"""


def cmd_regimes(args, cfg: RunConfig) -> int:
    out = _out_dir(args, cfg)
    start = time.perf_counter()
    rmap = regime_sweep(cfg.sweep_eps, cfg.sweep_times, cfg, threads=args.threads)
    wall = time.perf_counter() - start
    write_csv(os.path.join(out, "regimes.csv"), ("eps", "t", "winner", "margin"), rmap.rows())
    if args.emit_gnuplot:
        e, t = rmap.eps_values, rmap.t_values
        with open(os.path.join(out, "regimes.gp"), "w") as fh:
            fh.write(REGIMES_GNUPLOT.format(xmin=e.min() / 2, xmax=e.max() * 2, ymin=t.min() / 2, ymax=t.max() * 2))
    failures = {repr(k): v for k, v in rmap.failures.items()}
    write_json(os.path.join(out, "metadata.json"), _metadata(cfg, wall_time_s=wall, failures=failures))
    print(json.dumps({"out": out, "cells": len(rmap.eps_values) * len(rmap.t_values), "failures": failures}))
    return EXIT_OK


def cmd_rates(args, cfg: RunConfig) -> int:
    res = expansion_rate(cfg.params.interval, cfg.params.kernel, cfg.rate_eps, n=cfg.n)
    doc = {"slope": res.slope, "r2": res.r2, "points": res.points}
    if args.out:
        out = _out_dir(args, cfg)
        write_json(os.path.join(out, "rates.json"), doc)
    print(json.dumps(doc, sort_keys=True))
    return EXIT_OK


def cmd_verify(args, cfg: Optional[RunConfig]) -> int:
    results = run_checks(cfg)
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'}  {r.name}  ({r.detail})")
    failed = sum(not r.ok for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_VERIFY


COMMANDS = {
    "simulate": cmd_simulate,
    "spectrum": cmd_spectrum,
    "fig1": cmd_fig1,
    "fig2": cmd_fig2,
    "regimes": cmd_regimes,
    "rates": cmd_rates,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mutsel", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mutsel {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (default: the reference eps = 0.01 setup)")
    common.add_argument("--out", help="output directory (default: the config's outputs entry)")
    common.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("--emit-gnuplot", action="store_true", help="also write a gnuplot script")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _report(kind: str, message: str, **extra) -> None:
    err = {"error": kind, "message": message}
    err.update(extra)
    print(json.dumps(err), file=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    level = os.environ.get("MUTSEL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        _report("ConfigError", "--threads must be at least 1", path="--threads")
        return EXIT_CONFIG
    try:
        if args.config:
            cfg = load_config(args.config)
        elif args.command == "verify":
            cfg = None
        else:
            cfg = parse_config(REFERENCE_CONFIG)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        _report("ConfigError", exc.message, path=exc.path)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        _report("NumericalFailure", str(exc), t=None if exc.t is None else float(exc.t))
        return EXIT_NUMERICAL
    except MutselError as exc:
        _report(type(exc).__name__, str(exc))
        return EXIT_CONFIG
    except OSError as exc:
        _report("OSError", str(exc))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
