"""The ten acceptance criteria at their stated tolerances.

Each test records its outcome in ``RESULTS``; the terminal summary (see
conftest.py) prints one PASS/FAIL line per criterion.  Running this file
directly with ``python3 tests/test_acceptance.py`` does the same.
"""
import argparse

import numpy as np
import pytest

from scalar_charge import analysis, conservation, picard
from scalar_charge.cli import main, run_trajectory, snapshot_table
from scalar_charge.dynamics import integrate
from scalar_charge.errors import MaxIterExceeded
from scalar_charge.profiles import norms
from scalar_charge.free_field import eval_V
from scalar_charge.source_field import eval_U_self, worldline_jump

from conftest import CONFIGS

RESULTS = {}

TITLES = {
    1: "stationary exactness",
    2: "cross-method agreement",
    3: "contraction certificate",
    4: "conservation audit",
    5: "force-law jump identity",
    6: "cancellation",
    7: "mass bounds",
    8: "asymptotic rest",
    9: "field regularity",
    10: "determinism",
}


def record(criterion, part, passed, detail):
    RESULTS.setdefault(criterion, {})[part] = (bool(passed), detail)
    assert passed, f"criterion {criterion} ({part}): {detail}"


def summary_lines():
    lines = []
    for n in sorted(RESULTS):
        parts = RESULTS[n]
        ok = all(p for p, _ in parts.values())
        detail = "; ".join(f"{k}: {'ok' if p else 'FAIL'} ({d})" for k, (p, d) in parts.items())
        lines.append(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {TITLES[n]}  [{detail}]")
    return lines


@pytest.fixture(scope="module")
def bump_cfg(shipped):
    return shipped["bump"]


@pytest.fixture(scope="module")
def bump_run(bump_cfg):
    return run_trajectory(bump_cfg)


@pytest.fixture(scope="module")
def bump_exit(bump_run, bump_cfg):
    return analysis.radiation_exit_time(bump_run, bump_cfg.radiation)


def test_c1_stationary_exactness(shipped):
    cfg = shipped["stationary"]
    assert cfg.particle.bare_mass == 1 and cfg.particle.charge == 1 and cfg.integrator.t_end == 100
    assert cfg.radiation.components == ()
    traj = run_trajectory(cfg)
    q = max(np.max(np.abs(traj.Q)), np.max(np.abs(traj.p)))
    record(1, "max|Q|,|p|", q <= 1e-12, f"{q:.2e} <= 1e-12")
    x = np.linspace(cfg.snapshot.x_min, cfg.snapshot.x_max, 200)
    worst = max(np.max(np.abs(snapshot_table(traj, t, x)[:, 1] + 0.5 * np.abs(x))) for t in cfg.snapshot.times)
    record(1, "U snapshot", worst <= 1e-10, f"{worst:.2e} <= 1e-10")


def test_c2_cross_method(bump_cfg):
    params, prof = bump_cfg.particle, bump_cfg.radiation
    spec = picard.curve_space(params, prof, horizon=20.0, nodes=4096, gamma_factor=2.0)
    curve, _ = picard.solve_fixed_point(params, prof, spec, tol=1e-9, sup_tol=1e-9)
    traj = run_trajectory(bump_cfg)
    diff = np.max(np.abs(curve.values - traj(curve.t)), axis=0)
    record(2, "sup|Picard - RK|", np.max(diff) <= 1e-5, "(Q, p, W) = " + ", ".join(f"{d:.1e}" for d in diff))


def test_c3_contraction(shipped):
    names = ["bump", "counter", "strong", "pair"]
    assert len({tuple(shipped[n].radiation.components) for n in names}) >= 3
    for name in names:
        cfg = shipped[name]
        spec = picard.curve_space(cfg.particle, cfg.radiation, cfg.picard.horizon,
                                  cfg.picard.grid_nodes, gamma_factor=2.0)
        try:
            _, rep = picard.solve_fixed_point(cfg.particle, cfg.radiation, spec, tol=1e-9, max_iter=40)
        except MaxIterExceeded as exc:
            record(3, name, False, str(exc))
        worst = max(rep.observed_ratios)
        ok = worst <= 0.5 * 1.05 and rep.final_residual <= 1e-9 and rep.iterations <= 40
        record(3, name, ok, f"max ratio {worst:.2e}, {rep.iterations} iterations")


def test_c4_conservation_windows(bump_run, bump_cfg, bump_exit):
    for t1 in (0.0, bump_exit):
        rep = conservation.tube_flux(bump_cfg.particle, bump_cfg.radiation, bump_run, t1, t1 + 5.0, 0.025,
                                     epsilons=[0.2, 0.1, 0.05, 0.025])
        extrap = np.linalg.norm(rep.extrapolated_residual) / rep.scale
        raw = np.linalg.norm(rep.residual) / rep.scale
        record(4, f"window [{t1:.3g}, {t1 + 5:.3g}]", extrap <= 1e-6 and raw <= 1e-3,
               f"extrapolated {extrap:.1e} <= 1e-6, raw {raw:.1e} <= 1e-3")


def test_c4_mutation(bump_cfg, bump_exit):
    """+1% on a^2/2 must push the residual to 1e-2 of scale in some window."""
    bad = run_trajectory(bump_cfg, corrupt=True)
    worst = 0.0
    for t1 in (0.0, bump_exit):
        rep = conservation.tube_flux(bump_cfg.particle, bump_cfg.radiation, bad, t1, t1 + 5.0, 0.025,
                                     epsilons=[0.2, 0.1, 0.05, 0.025])
        worst = max(worst, np.linalg.norm(rep.residual) / rep.scale)
    record(4, "mutation", worst >= 1e-2, f"relative residual {worst:.1e} >= 1e-2")


def test_c5_force_identity(bump_run, bump_cfg, bump_exit, shipped):
    ts = np.linspace(0.0, bump_exit + 2.0, 51)[1:]
    assert np.any(ts < bump_exit)
    Fj = conservation.force_from_jump(bump_cfg.particle, bump_cfg.radiation, bump_run, ts)
    Fc = conservation.closed_form_force(bump_cfg.particle, bump_cfg.radiation, bump_run, ts)
    rel = np.max(np.abs(Fj - Fc) / np.maximum(np.abs(Fc), 1e-6))
    record(5, "50 samples", rel <= 1e-3, f"max relative {rel:.1e} <= 1e-3")
    st = shipped["stationary"]
    traj = integrate(st.particle, st.radiation, 10.0)
    j = worldline_jump(st.particle, st.radiation, traj, np.linspace(0.5, 10, 20))
    err = np.max(np.abs(j.jump_d1 + st.particle.charge))
    record(5, "stationary jump", err <= 1e-6, f"|[d1U] + a| = {err:.1e} <= 1e-6")


def test_c6_cancellation(shipped):
    for name, cfg in shipped.items():
        traj = run_trajectory(cfg)
        res = analysis.cancellation_check(traj).product_rule
        record(6, name, res <= 1e-6, f"{res:.1e}")


def test_c7_mass_bounds(shipped):
    for name, cfg in shipped.items():
        traj = run_trajectory(cfg)
        mb = analysis.mass_bounds_check(traj, cfg.radiation, cfg.particle)
        record(7, name, mb.lower_ok and mb.upper_ok and mb.m_min >= mb.m_V,
               f"m_min {mb.m_min:.4f} >= m_V {mb.m_V:.4f}, A_fit {mb.A_fit:.1e}")


def test_c8_asymptotic_rest(shipped):
    cfg = shipped["bump_long"]
    assert cfg.integrator.t_end >= 1000
    traj = run_trajectory(cfg)
    T = analysis.radiation_exit_time(traj, cfg.radiation)
    T_rest = analysis.rest_time(traj, 1e-2)
    record(8, "T_0.01", T_rest is not None, f"T_0.01 = {T_rest}")
    fit = analysis.decay_fit(traj, T)
    record(8, "slope", fit.slope_residual <= 1e-6, f"{fit.slope_residual:.1e} <= 1e-6")
    record(8, "power law", fit.ratio <= fit.bound * 1.001,
           f"ratio {fit.ratio:.4f} <= 2^(-a^2/2A) = {fit.bound:.4f} x 1.001 (A = {fit.A:.4f})")


@pytest.fixture(scope="module")
def cli_runs(tmp_path_factory):
    """Every shipped config through simulate and snapshot (sweep for the sweep config), twice."""
    out = {}
    for path in sorted(CONFIGS.glob("*.json")):
        for run in ("a", "b"):
            d = tmp_path_factory.mktemp(f"{path.stem}_{run}")
            cmds = ["sweep"] if path.stem == "sweep" else ["simulate", "snapshot"]
            codes = [main([c, "--config", str(path), "--out", str(d)]) for c in cmds]
            out[(path.stem, run)] = (d, codes)
    return out


def test_c9_field_regularity(bump_run, bump_cfg, cli_runs):
    prof = bump_cfg.radiation
    n = norms(prof)
    C = abs(bump_cfg.particle.charge) + n.sup_d1V0 + n.sup_V1
    # deterministic low-discrepancy pairs (k = 0 would give x = y)
    k = np.arange(1, 1001)
    tp = bump_run.t_end * ((k * 0.6180339887498949) % 1.0)
    xp = -30 + 60 * ((k * 0.7548776662466927) % 1.0)
    yp = -30 + 60 * ((k * 0.5698402909980532) % 1.0)

    def U(tt, xx):
        return eval_V(prof, tt, xx) + eval_U_self(bump_run, tt, xx)

    q = np.max(np.abs(U(tp, xp) - U(tp, yp)) / np.abs(xp - yp))
    record(9, "Lipschitz", q <= C, f"max quotient {q:.3f} <= C = {C:.3f}")
    bad = []
    for (name, run), (d, codes) in cli_runs.items():
        if run != "a":
            continue
        for f in sorted(d.rglob("*.csv")):
            text = f.read_text().lower()
            if "nan" in text or "inf" in text:
                bad.append(f.name)
        if any(c != 0 for c in codes):
            bad.append(f"{name} exit {codes}")
    record(9, "finite outputs", not bad, ", ".join(bad) or "all CSVs finite")


def test_c10_determinism(cli_runs):
    diffs = []
    count = 0
    names = sorted({name for name, _ in cli_runs})
    for name in names:
        da, _ = cli_runs[(name, "a")]
        db, _ = cli_runs[(name, "b")]
        files_a = sorted(p.relative_to(da) for p in da.rglob("*.csv"))
        files_b = sorted(p.relative_to(db) for p in db.rglob("*.csv"))
        if files_a != files_b:
            diffs.append(f"{name}: file sets differ")
        for rel in files_a:
            count += 1
            if (da / rel).read_bytes() != (db / rel).read_bytes():
                diffs.append(f"{name}/{rel}")
    record(10, "bit-identical", not diffs and count > 0, ", ".join(diffs) or f"{count} CSVs identical")


if __name__ == "__main__":
    import sys

    parser = argparse.ArgumentParser(description="run the acceptance criteria")
    parser.parse_args()
    code = pytest.main([__file__, "-q", "-p", "no:cacheprovider"])
    sys.exit(code)
