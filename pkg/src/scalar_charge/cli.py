"""Command-line front end: simulate, verify, snapshot and sweep.

Exit codes: 0 success, 2 configuration error, 3 smallness violation,
4 integrator fault or time out of range, 5 verification failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, conservation, picard
from .config import RunConfig, load_config
from .dynamics import ParticleParams, Trajectory, integrate
from .errors import (
    ConfigError,
    InsufficientHorizon,
    MaxIterExceeded,
    NonpositiveMass,
    NotYetExited,
    OutOfRange,
    SmallnessViolation,
    StepUnderflow,
)
from .free_field import LEFT, RIGHT, eval_V, smallness_check
from .profiles import RadiationProfile
from .source_field import TUBE_GUARD, _grad_total_arrays, eval_U_self, one_sided_gradient

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SMALLNESS = 3
EXIT_INTEGRATOR = 4
EXIT_VERIFY = 5

CORRUPT_FACTOR = 1.01

TRAJECTORY_COLUMNS = ("t", "Q", "p", "W", "v", "u0", "u1", "m", "d1V_on_worldline", "F_self", "F_ext")
SNAPSHOT_COLUMNS = ("x", "U", "d0U", "d1U", "T00", "T01", "worldline")

# tolerances of the verification suite
CONSERVATION_EXTRAPOLATED = 1e-6
CONSERVATION_RAW = 1e-3
FORCE_RELATIVE = 1e-3
FORCE_FLOOR = 1e-6
CANCELLATION_TOL = 1e-6
SLOPE_TOL = 1e-6
PICARD_AGREEMENT = 1e-5


# -- output helpers ---------------------------------------------------------------

def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_csv(columns, data) -> str:
    data = np.asarray(data, dtype=float) + 0.0  # folds -0.0 into 0.0
    if not np.all(np.isfinite(data)):
        raise FloatingPointError("refusing to write non-finite values")
    lines = [",".join(columns)]
    lines += [",".join("%.17g" % v for v in row) for row in data]
    return "\n".join(lines) + "\n"


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"not serialisable: {type(obj)}")


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


# -- pipeline pieces -----------------------------------------------------------------

def run_trajectory(cfg: RunConfig, corrupt: bool = False) -> Trajectory:
    ic = cfg.integrator
    return integrate(cfg.particle, cfg.radiation, ic.t_end, rtol=ic.tolerance, atol=ic.tolerance,
                     max_step=ic.max_step, self_force_factor=CORRUPT_FACTOR if corrupt else 1.0)


def trajectory_table(traj: Trajectory) -> np.ndarray:
    t = traj.t
    v, u0, u1, m = traj.kinematics_at(t)
    d1V, F_self, F_ext = analysis.worldline_forces(traj, t)
    return np.column_stack([t, traj.Q, traj.p, traj.W, v, u0, u1, m, d1V, F_self, F_ext])


def snapshot_table(traj: Trajectory, t: float, x) -> np.ndarray:
    """Rows ``(x, U, d0U, d1U, T00, T01, worldline)`` at time ``t``.

    ``worldline`` is 1 on the grid point nearest ``Q(t)``.  Grid points
    inside the tube guard take the one-sided gradient from their own side
    (the right side exactly on the worldline).
    """
    if not 0 <= t <= traj.t_end:
        raise OutOfRange(f"snapshot time {t} outside [0, {traj.t_end}]")
    x = np.asarray(x, dtype=float)
    tt = np.full_like(x, t)
    U = eval_V(traj.profile, tt, x) + eval_U_self(traj, tt, x)
    Q = float(traj.position(t))
    dist = x - Q
    near = np.abs(dist) <= TUBE_GUARD
    d0 = np.empty_like(x)
    d1 = np.empty_like(x)
    if np.any(~near):
        d0[~near], d1[~near] = _grad_total_arrays(traj, tt[~near], x[~near])
    for side, mask in ((RIGHT, near & (dist >= 0)), (LEFT, near & (dist < 0))):
        if np.any(mask):
            d0[mask], d1[mask] = one_sided_gradient(traj, tt[mask], x[mask], side)
    T00 = 0.5 * (d0 * d0 + d1 * d1)
    T01 = -d0 * d1
    marker = np.zeros_like(x)
    marker[np.argmin(np.abs(dist))] = 1.0
    return np.column_stack([x, U, d0, d1, T00, T01, marker])


def _window_bounds(w, T_exit):
    start = T_exit if w.start == "exit" else float(w.start)
    return start, start + w.length


def run_verify(cfg: RunConfig, traj: Trajectory) -> dict:
    """All verification checks for one configuration; returns the report dict."""
    params, profile = cfg.particle, cfg.radiation
    checks = {}

    def record(name, passed, **values):
        checks[name] = {"status": "pass" if passed else "fail", **values}

    try:
        T_exit = analysis.radiation_exit_time(traj, profile)
    except NotYetExited as exc:
        T_exit = None
        record("radiation_exit", False, message=str(exc))

    vc = cfg.verify
    eps = sorted(vc.epsilons, reverse=True)
    for i, w in enumerate(vc.windows):
        name = f"conservation_window_{i}"
        if w.start == "exit" and T_exit is None:
            record(name, False, message="radiation has not exited")
            continue
        t1, t2 = _window_bounds(w, T_exit)
        if t2 > traj.t_end:
            checks[name] = {"status": "skipped", "message": f"window [{t1}, {t2}] beyond t_end"}
            continue
        rep = conservation.tube_flux(params, profile, traj, t1, t2, eps[-1], epsilons=eps)
        extrap = float(np.linalg.norm(rep.extrapolated_residual))
        raw = float(np.linalg.norm(rep.residual))
        record(name, extrap <= CONSERVATION_EXTRAPOLATED * rep.scale and raw <= CONSERVATION_RAW * rep.scale,
               window=[t1, t2], scale=rep.scale, raw_residual=raw, extrapolated_residual=extrap,
               residual_vs_epsilon=[[e, float(np.linalg.norm(r))] for e, r in rep.residual_vs_epsilon],
               extrapolation_order=rep.extrapolation_order, delta_p=rep.delta_p)

    t_hi = traj.t_end if T_exit is None else min(traj.t_end, T_exit + 2.0)
    ts = np.linspace(0.0, t_hi, vc.force_samples + 1)[1:]
    Fj = conservation.force_from_jump(params, profile, traj, ts)
    Fc = conservation.closed_form_force(params, profile, traj, ts)
    rel = np.max(np.abs(Fj - Fc) / np.maximum(np.abs(Fc), FORCE_FLOOR))
    record("force_from_jump", rel <= FORCE_RELATIVE, max_relative_error=float(rel),
           samples=len(ts), t_max=float(t_hi))

    canc = analysis.cancellation_check(traj)
    record("cancellation", canc.product_rule <= CANCELLATION_TOL and canc.acceleration_law <= CANCELLATION_TOL,
           product_rule=canc.product_rule, acceleration_law=canc.acceleration_law)

    mb = analysis.mass_bounds_check(traj, profile, params)
    record("mass_bounds", mb.lower_ok and mb.upper_ok, **dataclasses.asdict(mb))

    if vc.decay and T_exit is not None:
        try:
            fit = analysis.decay_fit(traj, T_exit)
            rest = analysis.rest_time(traj, 1e-2)
            record("decay", fit.slope_residual <= SLOPE_TOL and fit.powerlaw_ok and rest is not None,
                   T_rest_0_01=rest, monotone=analysis.post_exit_monotone(traj, T_exit),
                   **dataclasses.asdict(fit))
        except InsufficientHorizon as exc:
            checks["decay"] = {"status": "skipped", "message": str(exc)}

    pc = cfg.picard
    if pc.enabled:
        spec = picard.curve_space(params, profile, pc.horizon, pc.grid_nodes, pc.gamma_factor)
        try:
            curve, rep = picard.solve_fixed_point(params, profile, spec, tol=pc.tol, max_iter=pc.max_iter,
                                                  sup_tol=pc.sup_tol)
            if pc.horizon > traj.t_end:
                raise OutOfRange("picard horizon exceeds t_end")
            diff = np.max(np.abs(curve.values - traj(curve.t)), axis=0)
            ratios_ok = all(r <= rep.ratio_bound * 1.05 for r in rep.observed_ratios)
            record("picard", bool(np.max(diff) <= PICARD_AGREEMENT and ratios_ok),
                   sup_difference=diff, L_est=rep.L_est, gamma=rep.gamma,
                   observed_ratios=rep.observed_ratios, iterations=rep.iterations,
                   weighted_converged_at=rep.weighted_converged_at)
        except MaxIterExceeded as exc:
            record("picard", False, message=str(exc))

    table = trajectory_table(traj)
    record("finite_outputs", bool(np.all(np.isfinite(table))))

    passed = all(c["status"] != "fail" for c in checks.values())
    return {
        "config": cfg.name,
        "self_force_factor": traj.self_force_factor,
        "T_exit": T_exit,
        "passed": passed,
        "checks": checks,
    }


# -- sweep ---------------------------------------------------------------------------

def sweep_points(cfg: RunConfig):
    sc = cfg.sweep
    charges = sc.charge or [cfg.particle.charge]
    masses = sc.bare_mass or [cfg.particle.bare_mass]
    scales = sc.amplitude_scale or [1.0]
    return list(itertools.product(charges, masses, scales))


def _scaled(cfg: RunConfig, charge, bare_mass, scale) -> RunConfig:
    comps = tuple(dataclasses.replace(c, amplitude=c.amplitude * scale) for c in cfg.radiation.components)
    return dataclasses.replace(cfg, particle=ParticleParams(bare_mass, charge),
                               radiation=RadiationProfile(comps))


SWEEP_COLUMNS = ("index", "charge", "bare_mass", "amplitude_scale", "status", "exit_time",
                 "max_abs_u1", "decay_exponent", "rate_fit", "conservation_residual")


def run_sweep_point(cfg: RunConfig, index: int, point, out_dir: Path) -> dict:
    charge, bare_mass, scale = point
    row = {"index": index, "charge": charge, "bare_mass": bare_mass, "amplitude_scale": scale,
           "status": "ok", "exit_time": "", "max_abs_u1": "", "decay_exponent": "", "rate_fit": "",
           "conservation_residual": ""}
    try:
        pcfg = _scaled(cfg, charge, bare_mass, scale)
        traj = run_trajectory(pcfg)
        _, _, u1, _ = traj.kinematics_at(traj.t)
        row["max_abs_u1"] = float(np.max(np.abs(u1)))
        T = analysis.radiation_exit_time(traj, pcfg.radiation)
        row["exit_time"] = T
        fit = analysis.decay_fit(traj, T)
        row["decay_exponent"] = charge * charge / (2 * fit.A)
        row["rate_fit"] = fit.exponent_fit if fit.exponent_fit is not None else ""
        t2 = min(T + 5.0, traj.t_end)
        rep = conservation.tube_flux(pcfg.particle, pcfg.radiation, traj, T, t2, 0.025, epsilons=[0.025])
        row["conservation_residual"] = float(np.linalg.norm(rep.residual)) / rep.scale
        _atomic_write(out_dir / "points" / f"point_{index:04d}.csv", format_csv(TRAJECTORY_COLUMNS, trajectory_table(traj)))
    except (ValueError, SmallnessViolation, NonpositiveMass, StepUnderflow, NotYetExited,
            InsufficientHorizon, OutOfRange) as exc:
        row["status"] = f"error: {type(exc).__name__}: {exc}".replace(",", ";")
    return row


def _format_cell(v):
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


# -- commands ------------------------------------------------------------------------

def _out_dir(cfg: RunConfig, args) -> Path:
    return Path(args.out if args.out else cfg.output.directory)


def cmd_simulate(cfg: RunConfig, args) -> int:
    traj = run_trajectory(cfg, args.corrupt_self_force)
    out = _out_dir(cfg, args)
    _atomic_write(out / "trajectory.csv", format_csv(TRAJECTORY_COLUMNS, trajectory_table(traj)))
    print(f"wrote {out / 'trajectory.csv'} ({len(traj.t)} rows)")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args) -> int:
    traj = run_trajectory(cfg, args.corrupt_self_force)
    report = run_verify(cfg, traj)
    out = _out_dir(cfg, args)
    _atomic_write(out / "verify_report.json", _dump_json(report))
    for name, c in report["checks"].items():
        print(f"{c['status'].upper():7s} {name}")
    return EXIT_OK if report["passed"] else EXIT_VERIFY


def cmd_snapshot(cfg: RunConfig, args) -> int:
    traj = run_trajectory(cfg, args.corrupt_self_force)
    sc = cfg.snapshot
    x = np.linspace(sc.x_min, sc.x_max, sc.points)
    out = _out_dir(cfg, args)
    tables = [snapshot_table(traj, float(t), x) for t in sc.times]
    for i, (t, table) in enumerate(zip(sc.times, tables)):
        path = out / f"snapshot_{i:03d}_t{t:g}.csv"
        _atomic_write(path, format_csv(SNAPSHOT_COLUMNS, table))
        print(f"wrote {path}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args) -> int:
    points = sweep_points(cfg)
    out = _out_dir(cfg, args)
    workers = max(1, cfg.sweep.workers)
    if workers == 1:
        rows = [run_sweep_point(cfg, i, p, out) for i, p in enumerate(points)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_sweep_point, cfg, i, p, out) for i, p in enumerate(points)]
            rows = [f.result() for f in futures]
    lines = [",".join(SWEEP_COLUMNS)]
    lines += [",".join(_format_cell(r[c]) for c in SWEEP_COLUMNS) for r in rows]
    _atomic_write(out / "sweep.csv", "\n".join(lines) + "\n")
    print(f"wrote {out / 'sweep.csv'} ({len(rows)} points)")
    return EXIT_OK if any(r["status"] == "ok" for r in rows) else EXIT_INTEGRATOR


COMMANDS = {"simulate": cmd_simulate, "verify": cmd_verify, "snapshot": cmd_snapshot, "sweep": cmd_sweep}


def assert_seedless() -> None:
    """Fail if any module of this package holds a random-number source."""
    import random
    import types

    pkg = __name__.rsplit(".", 1)[0]
    for name, mod in list(sys.modules.items()):
        if not (name == pkg or name.startswith(pkg + ".")) or mod is None:
            continue
        for attr in vars(mod).values():
            if attr is random or attr is np.random or isinstance(attr, (np.random.Generator, np.random.RandomState)):
                raise AssertionError(f"{name} links a random-number source")
            if isinstance(attr, types.ModuleType) and attr.__name__.startswith(("random", "numpy.random")):
                raise AssertionError(f"{name} imports {attr.__name__}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scalar-charge",
                                description="Scalar point charge in 1+1 dimensions: simulation and checks")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_text in (("simulate", "integrate the worldline and write trajectory.csv"),
                            ("verify", "run the verification suite and write verify_report.json"),
                            ("snapshot", "write field snapshots on a grid"),
                            ("sweep", "run a parameter sweep and write sweep.csv")):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="path to a JSON run configuration")
        sp.add_argument("--out", default=None, help="output directory (overrides output.directory)")
        sp.add_argument("--seedless", action="store_true", help="assert that no random-number source is used")
        sp.add_argument("--corrupt-self-force", action="store_true", help=argparse.SUPPRESS)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seedless:
        assert_seedless()
    small = smallness_check(cfg.particle, cfg.radiation)
    if not small.ok:
        print(f"smallness violated: m_V = {small.m_V:.6g} must be > 0", file=sys.stderr)
        return EXIT_SMALLNESS
    try:
        return COMMANDS[args.command](cfg, args)
    except SmallnessViolation as exc:
        print(f"smallness violated: {exc}", file=sys.stderr)
        return EXIT_SMALLNESS
    except (NonpositiveMass, StepUnderflow, OutOfRange) as exc:
        print(f"integration failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTEGRATOR


if __name__ == "__main__":
    sys.exit(main())
