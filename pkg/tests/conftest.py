import json
from pathlib import Path

import pytest

from scalar_charge.config import load_config
from scalar_charge.dynamics import ParticleParams, integrate
from scalar_charge.profiles import ProfileComponent, RadiationProfile

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
GOLDEN = Path(__file__).resolve().parent / "golden"


def bump_profile():
    return RadiationProfile((
        ProfileComponent("V0", 2.0, 1.0, 0.2, "smooth_bump"),
        ProfileComponent("V1", -2.5, 1.0, 0.1, "poly_spline"),
    ))


@pytest.fixture(scope="session")
def unit_params():
    return ParticleParams(bare_mass=1.0, charge=1.0)


@pytest.fixture(scope="session")
def bump():
    return bump_profile()


@pytest.fixture(scope="session")
def bump_traj(unit_params, bump):
    return integrate(unit_params, bump, 20.0)


@pytest.fixture(scope="session")
def static_traj(unit_params):
    return integrate(unit_params, RadiationProfile.empty(), 20.0)


@pytest.fixture(scope="session")
def shipped():
    return {p.stem: load_config(p) for p in sorted(CONFIGS.glob("*.json"))}


def read_json(path):
    return json.loads(Path(path).read_text())


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
