import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scalar_charge.dynamics import (
    ParticleParams,
    ReducedState,
    dynamical_mass,
    integrate,
    kinematics,
    mass,
    rhs,
)
from scalar_charge.errors import NonpositiveMass, OutOfRange, SmallnessViolation
from scalar_charge.free_field import eval_V, smallness_check
from scalar_charge.picard import k_vector
from scalar_charge.profiles import ProfileComponent, RadiationProfile, norms

from conftest import bump_profile


@pytest.mark.parametrize("m, a", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (float("nan"), 1.0)])
def test_params_validation(m, a):
    with pytest.raises(ValueError):
        ParticleParams(m, a)


def test_stationary_mass_is_bare_mass():
    p = ParticleParams(1.7, -0.6)
    for t in (0.0, 1.0, 50.0):
        assert dynamical_mass(p, RadiationProfile.empty(), t, 0.0, 0.5 * p.charge * t) == pytest.approx(1.7, abs=1e-14)


def test_initial_mass(unit_params, bump):
    assert dynamical_mass(unit_params, bump, 0.0, 0.0, 0.0) == 1.0 - eval_V(bump, 0.0, 0.0)
    prof = RadiationProfile((ProfileComponent("V0", 0.0, 1.0, 0.3),))
    assert dynamical_mass(unit_params, prof, 0.0, 0.0, 0.0) == pytest.approx(0.7)


def test_nonpositive_mass_signalled(unit_params):
    with pytest.raises(NonpositiveMass):
        mass(unit_params, RadiationProfile.empty(), 0.0, 0.0, 1.0)


def test_kinematics_examples(unit_params):
    k = kinematics(unit_params, RadiationProfile.empty(), ReducedState(0.0, 0.0, 0.0, 0.0))
    assert (k.v, k.u0, k.u1) == (0.0, 1.0, 0.0)
    # t = 0, W = 0 gives m = 1
    k = kinematics(unit_params, RadiationProfile.empty(), ReducedState(0.0, 0.0, 1.0, 0.0))
    assert k.v == pytest.approx(1 / np.sqrt(2), abs=1e-15)
    assert k.u0 == pytest.approx(np.sqrt(2), abs=1e-15)
    assert k.u1 == 1.0


@settings(max_examples=300, deadline=None)
@given(p=st.floats(-1e3, 1e3), W=st.floats(-0.2, 0.2), t=st.floats(0, 5))
def test_normalisation_and_speed_limit(p, W, t):
    params = ParticleParams(1.0, 1.0)
    k = kinematics(params, RadiationProfile.empty(), ReducedState(t, 0.0, p, W))
    assert abs(k.v) < 1
    # cancellation in u0^2 - u1^2 costs digits proportional to u0^2
    assert k.u0**2 - k.u1**2 == pytest.approx(1.0, abs=1e-14 * k.u0**2 + 1e-15)
    assert k.v == pytest.approx(k.u1 / k.u0, rel=1e-14, abs=1e-300)


def test_rhs_examples(unit_params):
    assert rhs(unit_params, RadiationProfile.empty(), ReducedState(2.0, 0.0, 0.0, 1.0)) == (0.0, 0.0, 0.5)
    st_ = ReducedState(0.0, 0.0, 0.4, 0.0)
    dQ, dp, _ = rhs(unit_params, RadiationProfile.empty(), st_)
    assert dp == pytest.approx(-0.5 * dQ) and dp < 0


@settings(max_examples=200, deadline=None)
@given(t=st.floats(0, 10), frac=st.floats(-1, 1), p=st.floats(-5, 5), wfrac=st.floats(-1, 1))
def test_rhs_bounded_by_k_vector(t, frac, p, wfrac):
    params = ParticleParams(1.0, 1.0)
    prof = bump_profile()
    W = wfrac * 0.5 * t
    Q = frac * t
    m = float(mass(params, prof, t, Q, W, check=False))
    if m < smallness_check(params, prof).m_V:
        return  # outside the admissible region
    f = rhs(params, prof, ReducedState(t, Q, p, W))
    k = k_vector(params, prof)
    assert all(abs(fi) <= ki * (1 + 1e-12) for fi, ki in zip(f, k))


def test_stationary_integration_is_exact(unit_params):
    traj = integrate(unit_params, RadiationProfile.empty(), 100.0)
    assert np.max(np.abs(traj.Q)) <= 1e-12
    assert np.max(np.abs(traj.p)) <= 1e-12
    assert np.max(np.abs(traj.W - 0.5 * traj.t)) <= 1e-12 * 100


def test_trajectory_invariants(bump_traj, unit_params, bump):
    t = bump_traj.t
    assert np.all(np.diff(t) > 0)
    assert np.all(np.abs(bump_traj.Q) < np.maximum(t, 1e-300)) or bump_traj.Q[0] == 0
    assert np.all(np.abs(bump_traj.Q[1:]) < t[1:])
    assert np.all(np.abs(bump_traj.W) <= 0.5 * abs(unit_params.charge) * t + 1e-15)
    m_V = smallness_check(unit_params, bump).m_V
    assert np.min(bump_traj.m) >= m_V - 1e-9
    v, _, _, _ = bump_traj.kinematics_at(t)
    assert np.all(np.abs(v) < 1)
    # linear mass growth bound with A = a^2 + 1
    a = unit_params.charge
    assert np.all(bump_traj.m <= unit_params.bare_mass + abs(a) * norms(bump).sup_V0 + (a * a + 1) * t)
    # recorded quartic-vs-cubic interpolation gap
    assert 0 < bump_traj.interp_error < 1e-6


def test_sample_lipschitz_bounds(bump_traj, unit_params, bump):
    k = np.array(k_vector(unit_params, bump))
    y = bump_traj.y
    dt = np.diff(bump_traj.t)[:, None]
    assert np.all(np.abs(np.diff(y, axis=0)) <= k * dt * (1 + 1e-9))


def test_dense_output_reproduces_nodes(bump_traj):
    assert np.array_equal(bump_traj(bump_traj.t[:-1]), bump_traj.y[:-1])
    assert np.allclose(bump_traj(bump_traj.t[-1]), bump_traj.y[-1], atol=1e-14, rtol=0)
    with pytest.raises(OutOfRange):
        bump_traj(bump_traj.t_end + 1.0)


def test_tolerance_self_convergence(unit_params, bump):
    """Halving the tolerance halves (or better) the gap to a tight reference."""
    ref = integrate(unit_params, bump, 10.0, rtol=1e-13, atol=1e-13)
    errs = []
    for tol in (1e-7, 5e-8):
        traj = integrate(unit_params, bump, 10.0, rtol=tol, atol=tol)
        errs.append(np.max(np.abs(traj.y[-1] - ref.y[-1])))
    assert errs[1] <= 0.5 * errs[0]


def test_smallness_gate():
    prof = RadiationProfile((ProfileComponent("V0", 0.0, 1.0, 0.5),))
    with pytest.raises(SmallnessViolation):
        integrate(ParticleParams(1.0, 2.0), prof, 1.0)


def test_integration_is_deterministic(unit_params, bump):
    a = integrate(unit_params, bump, 5.0)
    b = integrate(unit_params, bump, 5.0)
    assert np.array_equal(a.y, b.y) and np.array_equal(a.coef, b.coef)
