"""Reduced worldline dynamics for q = (Q, p, W) in coordinate time.

``Q`` is the particle position, ``p`` the dynamical momentum and ``W`` the
sourced field evaluated on the worldline.  The dynamical mass is assembled
from the three field pieces,

    m = m_bare + (a**2/2) t - a V(t, Q) - a W,

using ``U_stat(t, Q) = -(a/2) t``, valid because ``|Q(t)| <= t``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import RK45

from .errors import NonpositiveMass, OutOfRange, SmallnessViolation, StepUnderflow
from .free_field import eval_V, grad_V, smallness_check
from .profiles import RadiationProfile


@dataclass(frozen=True)
class ParticleParams:
    bare_mass: float
    charge: float

    def __post_init__(self):
        if not (np.isfinite(self.bare_mass) and self.bare_mass > 0):
            raise ValueError("bare_mass must be > 0")
        if not np.isfinite(self.charge) or self.charge == 0:
            raise ValueError("charge must be nonzero")


@dataclass(frozen=True)
class ReducedState:
    t: float
    Q: float
    p: float
    W: float


@dataclass(frozen=True)
class Kinematics:
    v: float
    u0: float
    u1: float
    m: float


def mass(params: ParticleParams, profile: RadiationProfile, t, Q, W, check=True):
    """Vectorised dynamical mass; raises :class:`NonpositiveMass` when ``check``."""
    a = params.charge
    t = np.asarray(t, dtype=float)
    m = params.bare_mass + 0.5 * a * a * t - a * eval_V(profile, t, Q) - a * np.asarray(W)
    if check and np.any(m <= 0):
        raise NonpositiveMass(f"dynamical mass reached {np.min(m):.6g}")
    return m


def dynamical_mass(params: ParticleParams, profile: RadiationProfile, t, Q, W) -> float:
    assert abs(Q) <= t * (1 + 1e-12) + 1e-300, "worldline left the light cone of the origin"
    return float(mass(params, profile, t, Q, W))


def kinematics(params: ParticleParams, profile: RadiationProfile, state: ReducedState) -> Kinematics:
    m = dynamical_mass(params, profile, state.t, state.Q, state.W)
    s = np.hypot(m, state.p)
    return Kinematics(v=state.p / s, u0=s / m, u1=state.p / m, m=m)


def rhs_arrays(params, profile, t, Q, p, W, self_force_factor=1.0):
    """Vectorised right-hand side; returns ``(dQ/dt, dp/dt, dW/dt, m)``."""
    a = params.charge
    m = mass(params, profile, t, Q, W)
    s = np.hypot(m, p)
    _, d1V = grad_V(profile, t, Q)
    v = p / s
    dQ = v
    dp = -self_force_factor * 0.5 * a * a * v + a * (m / s) * d1V
    dW = 0.5 * a * m / s
    return dQ, dp, dW, m


def rhs(params: ParticleParams, profile: RadiationProfile, state: ReducedState, self_force_factor=1.0):
    dQ, dp, dW, _ = rhs_arrays(params, profile, state.t, state.Q, state.p, state.W, self_force_factor)
    return float(dQ), float(dp), float(dW)


@dataclass
class Trajectory:
    """Accepted RK steps plus the per-step quartic dense-output coefficients.

    ``coef[i]`` has shape ``(3, 4)``; on step ``i`` the state is
    ``y[i] + h_i * coef[i] @ (theta, theta**2, theta**3, theta**4)``.
    """

    params: ParticleParams
    profile: RadiationProfile
    t: np.ndarray
    y: np.ndarray
    coef: np.ndarray
    rtol: float
    atol: float
    self_force_factor: float = 1.0
    interp_error: float = 0.0
    _mass: np.ndarray | None = field(default=None, repr=False)
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    @property
    def Q(self):
        return self.y[:, 0]

    @property
    def p(self):
        return self.y[:, 1]

    @property
    def W(self):
        return self.y[:, 2]

    @property
    def m(self):
        if self._mass is None:
            self._mass = mass(self.params, self.profile, self.t, self.Q, self.W)
        return self._mass

    def _locate(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < self.t[0]) or np.any(s > self.t[-1]):
            raise OutOfRange(f"time outside [{self.t[0]}, {self.t[-1]}]")
        idx = np.searchsorted(self.t, s, side="right") - 1
        idx = np.clip(idx, 0, len(self.t) - 2)
        h = self.t[idx + 1] - self.t[idx]
        theta = (s - self.t[idx]) / h
        return idx, h, theta

    def __call__(self, s):
        """Dense-output state ``(..., 3)`` at time(s) ``s``."""
        idx, h, theta = self._locate(s)
        powers = np.stack([theta, theta**2, theta**3, theta**4], axis=-1)
        return self.y[idx] + h[..., None] * np.einsum("...ij,...j->...i", self.coef[idx], powers)

    def derivative(self, s):
        """Time derivative of the dense output."""
        idx, _, theta = self._locate(s)
        powers = np.stack([np.ones_like(theta), 2 * theta, 3 * theta**2, 4 * theta**3], axis=-1)
        return np.einsum("...ij,...j->...i", self.coef[idx], powers)

    def position(self, s):
        return self(s)[..., 0]

    def kinematics_at(self, s):
        """``(v, u0, u1, m)`` arrays from the dense output."""
        y = self(s)
        m = mass(self.params, self.profile, s, y[..., 0], y[..., 2])
        sq = np.hypot(m, y[..., 1])
        return y[..., 1] / sq, sq / m, y[..., 1] / m, m

    def state(self, i: int) -> ReducedState:
        return ReducedState(float(self.t[i]), *map(float, self.y[i]))


def integrate(
    params: ParticleParams,
    profile: RadiationProfile,
    t_end: float,
    rtol: float = 1e-10,
    atol: float = 1e-10,
    max_step: float = 0.1,
    self_force_factor: float = 1.0,
) -> Trajectory:
    """Integrate from the rest state ``q = 0`` at ``t = 0`` to ``t_end``.

    Dormand-Prince 5(4) with embedded error control (scipy's RK45 stepper);
    each accepted step's quartic interpolant is kept for dense output.
    ``self_force_factor`` scales the ``a**2/2`` self-force term and exists
    only for mutation tests of the verification suite.
    """
    if not t_end > 0:
        raise ValueError("t_end must be > 0")
    small = smallness_check(params, profile)
    if not small.ok:
        raise SmallnessViolation(f"m_V = {small.m_V:.6g} <= 0")

    def fun(t, y):
        dQ, dp, dW, _ = rhs_arrays(params, profile, t, y[0], y[1], y[2], self_force_factor)
        return np.array([dQ, dp, dW], dtype=float)

    solver = RK45(fun, 0.0, np.zeros(3), t_end, rtol=rtol, atol=atol, max_step=max_step)
    ts = [0.0]
    ys = [np.zeros(3)]
    coefs = []
    h_floor = 1e-14 * t_end
    while solver.status == "running":
        msg = solver.step()
        if solver.status == "failed":
            raise StepUnderflow(str(msg))
        h = solver.t - solver.t_old
        if h < h_floor and solver.t < t_end:
            raise StepUnderflow(f"step {h:.3g} below floor at t = {solver.t:.6g}")
        coefs.append(solver.dense_output().Q.copy())
        ts.append(solver.t)
        ys.append(solver.y.copy())

    traj = Trajectory(
        params=params,
        profile=profile,
        t=np.array(ts),
        y=np.array(ys),
        coef=np.array(coefs),
        rtol=rtol,
        atol=atol,
        self_force_factor=self_force_factor,
    )
    traj.interp_error = _interp_error_estimate(traj)
    return traj


def _interp_error_estimate(traj: Trajectory) -> float:
    """Largest midpoint gap between the quartic interpolant and a cubic Hermite one."""
    t0, t1 = traj.t[:-1], traj.t[1:]
    h = t1 - t0
    mid = 0.5 * (t0 + t1)
    quartic = traj(mid)
    f0 = traj.derivative(t0)
    f1 = traj.derivative(np.nextafter(t1, t0))
    hermite = 0.5 * (traj.y[:-1] + traj.y[1:]) + (h[:, None] / 8.0) * (f0 - f1)
    return float(np.max(np.abs(quartic - hermite))) if len(h) else 0.0
