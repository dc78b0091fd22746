"""Asymptotic diagnostics for a finished trajectory.

Once both characteristics through the particle, ``Q(t) + t`` and
``Q(t) - t``, have left the radiation supports, the external force is
identically zero and

    du1/dt = -(a**2 / 2) u1 / m,

so ``ln|u1|`` is linear in ``int dt/m`` and ``u1`` decays to zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .dynamics import ParticleParams, Trajectory
from .errors import InsufficientHorizon, NotYetExited
from .free_field import grad_V, smallness_check
from .profiles import RadiationProfile, norms, support_bounds

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)

# |u1| below this is treated as exactly at rest for logarithmic fits
TINY_U1 = 1e-280


@dataclass(frozen=True)
class CancellationResult:
    product_rule: float
    acceleration_law: float


@dataclass(frozen=True)
class DecayFit:
    slope_residual: float
    powerlaw_ok: bool
    T: float
    A: float
    ratio: float | None
    bound: float | None
    exponent_fit: float | None
    at_rest: bool


@dataclass(frozen=True)
class MassBounds:
    m_min: float
    m_V: float
    A_fit: float
    max_speed: float
    lower_ok: bool
    upper_ok: bool


def radiation_exit_time(traj: Trajectory, profile: RadiationProfile) -> float:
    """First time after which ``Q + t > x_max`` and ``Q - t < x_min`` for good.

    ``|v| < 1`` makes ``Q + t`` increasing and ``Q - t`` decreasing, so each
    condition switches on exactly once; the crossing is refined on the
    dense output.
    """
    bounds = support_bounds(profile)
    if bounds is None:
        return 0.0
    x_min, x_max = bounds
    t_end = traj.t_end
    Q_end = float(traj.position(t_end))
    plus, minus = Q_end + t_end, Q_end - t_end
    if not (plus > x_max and minus < x_min):
        raise NotYetExited(
            f"characteristics reached ({plus:.6g}, {minus:.6g}), supports span [{x_min:.6g}, {x_max:.6g}]",
            reached=(plus, minus),
        )
    times = [0.0]
    if not x_max < 0.0:
        times.append(brentq(lambda s: float(traj.position(s)) + s - x_max, 0.0, t_end, xtol=1e-14, rtol=1e-15))
    if not x_min > 0.0:
        times.append(brentq(lambda s: float(traj.position(s)) - s - x_min, 0.0, t_end, xtol=1e-14, rtol=1e-15))
    return float(max(times))


def _eval_points(traj: Trajectory):
    """Step nodes plus step midpoints, so interpolant derivatives are tested off the nodes."""
    mid = 0.5 * (traj.t[:-1] + traj.t[1:])
    return np.sort(np.concatenate([traj.t[:-1], mid]))


def cancellation_check(traj: Trajectory) -> CancellationResult:
    """Residuals of two identities along the dense output.

    ``u0 dW/dt = a/2`` and
    ``m du1/dt = -(a**2/2) u1 + a u1 dV/dt + (a/u0) d1V`` with ``dV/dt``
    the derivative of ``V`` along the worldline.
    """
    params, profile = traj.params, traj.profile
    a = params.charge
    s = _eval_points(traj)
    y = traj(s)
    dy = traj.derivative(s)
    v, u0, u1, m = traj.kinematics_at(s)
    product = np.max(np.abs(u0 * dy[:, 2] - 0.5 * a))

    d0V, d1V = grad_V(profile, s, y[:, 0])
    dVdt = d0V + dy[:, 0] * d1V
    dm = 0.5 * a * a - a * dVdt - a * dy[:, 2]
    du1 = (dy[:, 1] * m - y[:, 1] * dm) / (m * m)
    law = -0.5 * a * a * u1 + a * u1 * dVdt + (a / u0) * d1V
    accel = np.max(np.abs(m * du1 - law))
    return CancellationResult(float(product), float(accel))


def _inverse_mass_integrals(traj: Trajectory, t0, t1):
    """``int_{t0}^{t1} dt / m`` for arrays of intervals (16-point Gauss-Legendre)."""
    half = 0.5 * (t1 - t0)
    nodes = (0.5 * (t0 + t1))[:, None] + half[:, None] * _GL_X
    _, _, _, m = traj.kinematics_at(nodes)
    return half * ((1.0 / m) @ _GL_W)


def linear_mass_constant(traj: Trajectory, t_from: float, t_to: float | None = None) -> float:
    """Smallest ``A`` with ``m(t) <= A t`` at the samples in ``[t_from, t_to]``."""
    t_to = traj.t_end if t_to is None else t_to
    sel = (traj.t >= t_from) & (traj.t <= t_to) & (traj.t > 0)
    ts = np.concatenate([[t_from], traj.t[sel], [t_to]]) if t_from > 0 else np.concatenate([traj.t[sel], [t_to]])
    _, _, _, m = traj.kinematics_at(ts)
    return float(np.max(m / ts))


def decay_fit(traj: Trajectory, T_exit: float, margin: float = 1.0) -> DecayFit:
    """Post-exit decay law ``d ln|u1| / dt = -a**2 / (2 m)`` and its power-law consequence.

    The pointwise check compares, on every accepted step after ``T_exit``,
    the change of ``ln|u1|`` per unit time with ``-(a**2/2)`` times the
    step average of ``1/m``.  The power-law check uses
    ``A = max m(t)/t`` over ``[T, 2T]``, for which ``m <= A t`` there.
    """
    a = traj.params.charge
    T = float(T_exit)
    if traj.t_end < T + margin or traj.t_end < 2 * T:
        raise InsufficientHorizon(f"need t_end >= max(T + {margin}, 2T) with T = {T:.6g}")
    T_pl = max(T, traj.t[1])  # the ratio needs T > 0
    A = linear_mass_constant(traj, T_pl, 2 * T_pl)

    u1_T = float(traj.kinematics_at(T_pl)[2])
    if u1_T == 0.0:
        u1_after = traj.kinematics_at(traj.t[traj.t >= T_pl])[2]
        return DecayFit(0.0, bool(np.all(u1_after == 0)), T_pl, A, None, None, None, True)

    ts = np.concatenate([[T], traj.t[traj.t > T]])
    _, _, u1, _ = traj.kinematics_at(ts)
    keep = np.abs(u1) > TINY_U1
    ts, u1 = ts[keep], u1[keep]
    if len(ts) < 3:
        raise InsufficientHorizon("too few post-exit samples with resolvable u1")
    lnu = np.log(np.abs(u1))
    inv_m = _inverse_mass_integrals(traj, ts[:-1], ts[1:])
    dt = np.diff(ts)
    slope_residual = float(np.max(np.abs(np.diff(lnu) / dt + 0.5 * a * a * inv_m / dt)))

    abscissa = np.concatenate([[0.0], np.cumsum(inv_m)])
    exponent_fit = float(-np.polyfit(abscissa, lnu, 1)[0])

    ratio = abs(float(traj.kinematics_at(2 * T_pl)[2]) / u1_T)
    bound = 2.0 ** (-a * a / (2 * A))
    return DecayFit(slope_residual, bool(ratio <= bound * 1.001), T_pl, A, ratio, bound,
                    exponent_fit, False)


def mass_bounds_check(traj: Trajectory, profile: RadiationProfile, params: ParticleParams) -> MassBounds:
    """Lower bound ``m >= m_V`` and the linear upper bound ``m <= m_bare + |a| sup|V0| + A t``.

    ``A_fit`` is the smallest ``A >= 0`` making the upper bound hold at every sample.
    """
    m_V = smallness_check(params, profile).m_V
    a = abs(params.charge)
    m = traj.m
    offset = params.bare_mass + a * norms(profile).sup_V0
    pos = traj.t > 0
    A_fit = float(max(0.0, np.max((m[pos] - offset) / traj.t[pos]))) if np.any(pos) else 0.0
    v = traj.p / np.hypot(m, traj.p)
    upper = m <= offset + (0.5 * a * a + 1e-6) * traj.t
    return MassBounds(
        m_min=float(np.min(m)),
        m_V=float(m_V),
        A_fit=A_fit,
        max_speed=float(np.max(np.abs(v))),
        lower_ok=bool(np.all(m >= m_V)),
        upper_ok=bool(np.all(upper)),
    )


def rest_time(traj: Trajectory, eps: float) -> float | None:
    """First sample time after which every later sample has ``|u1| < eps``."""
    _, _, u1, _ = traj.kinematics_at(traj.t)
    bad = np.nonzero(np.abs(u1) >= eps)[0]
    if len(bad) == 0:
        return 0.0
    if bad[-1] == len(traj.t) - 1:
        return None
    return float(traj.t[bad[-1] + 1])


def post_exit_monotone(traj: Trajectory, T_exit: float) -> bool:
    """``u1`` keeps its sign and ``|u1|`` never increases after ``T_exit``."""
    _, _, u1, _ = traj.kinematics_at(traj.t[traj.t >= T_exit])
    same_sign = np.all(u1 >= 0) or np.all(u1 <= 0)
    return bool(same_sign and np.all(np.diff(np.abs(u1)) <= 0))


def velocity_integral(traj: Trajectory, t=None):
    """``int_0^t (1 - |v|) ds``; cumulative over the step nodes when ``t`` is None."""
    t0, t1 = traj.t[:-1], traj.t[1:]
    half = 0.5 * (t1 - t0)
    nodes = (0.5 * (t0 + t1))[:, None] + half[:, None] * _GL_X
    v, _, _, _ = traj.kinematics_at(nodes)
    cum = np.concatenate([[0.0], np.cumsum(half * ((1.0 - np.abs(v)) @ _GL_W))])
    if t is None:
        return cum
    return np.interp(t, traj.t, cum)


def worldline_forces(traj: Trajectory, t):
    """``(d1V, F_self, F_ext)`` on the worldline; forces are ``dp/dtau`` pieces.

    ``F_self = -(a**2/2) u1`` and ``F_ext = a d1V``.
    """
    a = traj.params.charge
    Q = traj.position(t)
    _, _, u1, _ = traj.kinematics_at(t)
    _, d1V = grad_V(traj.profile, t, Q)
    return d1V, -traj.self_force_factor * 0.5 * a * a * u1, a * d1V
