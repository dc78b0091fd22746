"""Energy-momentum bookkeeping between the field and the particle.

The field tensor is ``T^{mu nu} = d^mu U d^nu U - (1/2) eta^{mu nu} dU.dU``
with ``eta = diag(1, -1)``.  Away from the worldline it is divergence free,
so integrating over a tube ``{t1 <= t <= t2, |x - Q(t)| <= eps}`` turns
the particle's momentum change into boundary fluxes:

    Delta p^nu + (outward flux of T^{. nu}) = 0.

The time-like faces ``x = Q(t) +- eps`` are parameterised by coordinate
time; their flux element ``n_mu T^{mu nu} dt / u0`` with
``n = (-u1, u0)`` is exactly the outward normal of a face displaced in
``x``, so the balance holds for every ``eps``, not only in the limit.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import Trajectory, rhs_arrays
from .errors import EpsilonTooSmall, OutOfRange
from .free_field import FieldGradient, grad_V
from .source_field import TUBE_GUARD, _grad_total_arrays, worldline_limits

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)

DEFAULT_EPSILONS = (0.2, 0.1, 0.05, 0.025)


@dataclass(frozen=True)
class EnergyTensor:
    T00: float
    T01: float
    T11: float


@dataclass
class ConservationReport:
    epsilon: float
    interval: tuple[float, float]
    delta_p: np.ndarray
    boundary_fluxes: dict
    residual: np.ndarray
    residual_vs_epsilon: list = field(default_factory=list)
    extrapolated_residual: np.ndarray | None = None
    extrapolation_order: float | None = None
    scale: float = 1.0


def energy_tensor(grad: FieldGradient) -> EnergyTensor:
    d0, d1 = grad.d0, grad.d1
    diag = 0.5 * (d0 * d0 + d1 * d1)
    return EnergyTensor(T00=diag, T01=-d0 * d1, T11=diag)


def _tensor_arrays(d0, d1):
    diag = 0.5 * (d0 * d0 + d1 * d1)
    return diag, -d0 * d1, diag


def _normal_flux(d0, d1, u0, u1):
    """``n_mu T^{mu nu}`` for ``nu = 0, 1`` with ``n = (-u1, u0)``; shape ``(..., 2)``."""
    T00, T01, T11 = _tensor_arrays(d0, d1)
    return np.stack([-u1 * T00 + u0 * T01, -u1 * T01 + u0 * T11], axis=-1)


def _adaptive_gl(f, breaks, tol, max_rounds=40):
    """Integral of vector-valued ``f`` over ``[breaks[0], breaks[-1]]``.

    ``f`` maps an array of nodes to an array ``(n, k)``.  Panels are
    bisected until a 16-point Gauss-Legendre rule and its two-half
    refinement agree to within the panel's share of ``tol``.
    """
    breaks = np.unique(np.asarray(breaks, dtype=float))
    total_len = breaks[-1] - breaks[0]
    if total_len <= 0:
        return np.zeros(2)
    lo, hi = breaks[:-1], breaks[1:]

    def gl(a, b):
        half = 0.5 * (b - a)
        nodes = (0.5 * (a + b))[:, None] + half[:, None] * _GL_X
        vals = f(nodes.ravel()).reshape(len(a), 16, -1)
        return half[:, None] * np.einsum("pqk,q->pk", vals, _GL_W)

    coarse = gl(lo, hi)
    result = 0.0
    for _ in range(max_rounds):
        mid = 0.5 * (lo + hi)
        left, right = gl(lo, mid), gl(mid, hi)
        fine = left + right
        err = np.max(np.abs(fine - coarse), axis=1)
        ok = err <= tol * (hi - lo) / total_len
        result = result + fine[ok].sum(axis=0)
        if np.all(ok):
            return result
        keep = ~ok
        lo = np.concatenate([lo[keep], mid[keep]])
        hi = np.concatenate([mid[keep], hi[keep]])
        coarse = np.concatenate([left[keep], right[keep]])
    return result + coarse.sum(axis=0)


def _cone_crossings(traj: Trajectory, t1, t2, offset):
    """Times in ``(t1, t2)`` where ``x = Q(t) + offset`` meets ``x = +-t``."""
    grid = np.linspace(t1, t2, 257)
    x = traj.position(grid) + offset
    out = []
    for sign in (1.0, -1.0):
        g = x - sign * grid
        idx = np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]
        for i in idx:
            a, b = grid[i], grid[i + 1]
            ga = g[i]
            for _ in range(80):
                c = 0.5 * (a + b)
                gc = float(traj.position(c)) + offset - sign * c
                if np.sign(gc) == np.sign(ga):
                    a, ga = c, gc
                else:
                    b = c
            out.append(0.5 * (a + b))
    return out


def _face_flux(traj, t1, t2, offset, tol):
    def integrand(t):
        x = traj.position(t) + offset
        d0, d1 = _grad_total_arrays(traj, t, x)
        _, u0, u1, _ = traj.kinematics_at(t)
        return _normal_flux(d0, d1, u0, u1) / u0[:, None]

    breaks = [t1, t2, *_cone_crossings(traj, t1, t2, offset)]
    return _adaptive_gl(integrand, breaks, tol)


def _cap_flux(traj, t, eps, tol):
    Q = float(traj.position(t))

    def integrand(x):
        d0, d1 = _grad_total_arrays(traj, np.full_like(x, t), x)
        T00, T01, _ = _tensor_arrays(d0, d1)
        return np.stack([T00, T01], axis=-1)

    breaks = [Q - eps, Q, Q + eps]
    breaks += [s for s in (-t, t) if Q - eps < s < Q + eps and s != Q]
    return _adaptive_gl(integrand, breaks, tol)


def particle_momentum(traj: Trajectory, t) -> np.ndarray:
    """``(p^0, p^1) = (sqrt(m**2 + p**2), p)``."""
    y = traj(t)
    _, _, _, m = traj.kinematics_at(t)
    return np.array([np.hypot(m, y[..., 1]), y[..., 1]]).T


def _balance(traj, t1, t2, eps, tol):
    fluxes = {
        "C1": -_face_flux(traj, t1, t2, -eps, tol),
        "C2": _face_flux(traj, t1, t2, eps, tol),
        "T1": -_cap_flux(traj, t1, eps, tol),
        "T2": _cap_flux(traj, t2, eps, tol),
    }
    dp = particle_momentum(traj, t2) - particle_momentum(traj, t1)
    residual = dp + sum(fluxes.values())
    return dp, fluxes, residual


def extrapolate_residual(epsilons, residuals):
    """Richardson extrapolation of the residual to ``eps -> 0``.

    The order is measured from the three smallest ``eps`` (which must be
    halving).  When that estimate is meaningless, as happens once the
    residual has already reached its noise floor, the finest value is
    returned unchanged.  Returns ``(extrapolated, order)``.
    """
    eps = np.asarray(epsilons, dtype=float)
    res = np.asarray(residuals, dtype=float)
    order_idx = np.argsort(eps)[::-1]
    eps, res = eps[order_idx], res[order_idx]
    finest = res[-1]
    if len(eps) < 3 or not np.allclose(eps[-3:-1] / eps[-2:], 2.0):
        return finest, None
    r1, r2, r3 = res[-3], res[-2], res[-1]
    d1 = np.linalg.norm(r1 - r2)
    d2 = np.linalg.norm(r2 - r3)
    if d2 == 0 or d1 == 0:
        return finest, None
    order = float(np.log2(d1 / d2))
    if not (0.5 <= order <= 6.0):
        return finest, None
    return r3 + (r3 - r2) / (2.0**order - 1.0), order


def tube_flux(params, profile, traj: Trajectory, t1: float, t2: float, epsilon: float,
              tol: float = 1e-10, epsilons=None) -> ConservationReport:
    """Momentum balance over the world tube of half-width ``epsilon`` on ``[t1, t2]``.

    ``epsilons`` (default: ``epsilon`` halved three times from 8x) adds the
    refinement study and its extrapolation to the report.
    """
    if traj.params != params or traj.profile != profile:
        raise ValueError("trajectory was integrated for different parameters or radiation")
    if not (0 <= t1 < t2 <= traj.t_end):
        raise OutOfRange(f"need 0 <= t1 < t2 <= {traj.t_end}")
    if not epsilon > TUBE_GUARD:
        raise EpsilonTooSmall(f"epsilon must exceed the tube guard {TUBE_GUARD}")
    if epsilons is None:
        epsilons = [8 * epsilon, 4 * epsilon, 2 * epsilon, epsilon]
    epsilons = sorted({float(e) for e in epsilons} | {float(epsilon)}, reverse=True)
    if min(epsilons) <= TUBE_GUARD:
        raise EpsilonTooSmall(f"every epsilon must exceed the tube guard {TUBE_GUARD}")

    study = []
    main = None
    for e in epsilons:
        dp, fluxes, residual = _balance(traj, t1, t2, e, tol)
        study.append((e, residual))
        if e == epsilon:
            main = (dp, fluxes, residual)
    dp, fluxes, residual = main
    extrap, order = extrapolate_residual([e for e, _ in study], [r for _, r in study])
    a = params.charge
    scale = max(float(np.linalg.norm(dp)), a * a * (t2 - t1), params.bare_mass)
    return ConservationReport(
        epsilon=float(epsilon),
        interval=(float(t1), float(t2)),
        delta_p=dp,
        boundary_fluxes=fluxes,
        residual=residual,
        residual_vs_epsilon=study,
        extrapolated_residual=np.asarray(extrap),
        extrapolation_order=order,
        scale=scale,
    )


def force_from_jump(params, profile, traj: Trajectory, t) -> np.ndarray:
    """``F^nu = -[n_mu T^{mu nu}]`` across the worldline at time(s) ``t``."""
    if traj.params != params or traj.profile != profile:
        raise ValueError("trajectory was integrated for different parameters or radiation")
    (d0L, d1L), (d0R, d1R) = worldline_limits(traj, t)
    _, u0, u1, _ = traj.kinematics_at(np.atleast_1d(np.asarray(t, dtype=float)))
    F = -(_normal_flux(d0R, d1R, u0, u1) - _normal_flux(d0L, d1L, u0, u1))
    return F[0] if np.ndim(t) == 0 else F


def closed_form_force(params, profile, traj: Trajectory, t) -> np.ndarray:
    """``(dp^0/dtau, dp^1/dtau)`` from the reduced equations of motion.

    ``dp^1/dtau = -(a**2/2) u1 + a d1V`` and ``dp^0/dtau = u0 d/dt sqrt(m**2 + p**2)``.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    a = params.charge
    Q, p, W = traj(t_arr).T
    dQ, dp, dW, m = rhs_arrays(params, profile, t_arr, Q, p, W, traj.self_force_factor)
    d0V, d1V = grad_V(profile, t_arr, Q)
    dm = 0.5 * a * a - a * (d0V + dQ * d1V) - a * dW
    S = np.hypot(m, p)
    u0 = S / m
    F = np.stack([u0 * (m * dm + p * dp) / S, u0 * dp], axis=-1)
    return F[0] if np.ndim(t) == 0 else F
