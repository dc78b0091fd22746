"""The field sourced by the moving charge, and the total field.

Duhamel's principle gives, for a worldline ``Q`` starting at rest at the
origin,

    U_source(t, x) = (a/2) int_0^t sqrt(1 - v(s)**2) 1{|x - Q(s)| <= t - s} ds.

Because ``|v| < 1`` the function ``g(s) = (t - s) - |x - Q(s)|`` is strictly
decreasing, so the indicator is on exactly for ``s`` in ``[0, s_ret]``
where ``s_ret`` is the retarded time of ``(t, x)``.  The integral over
``[0, s_ret]`` is assembled from 16-point Gauss-Legendre rules on every
accepted integrator step (cached per trajectory) plus one partial step.

Gradients of the particle's own field ``U_stat + U_source`` are taken by
finite differences of this integral.  The two pieces are differenced
together: their kinks on the light cone ``|x| = t`` cancel, so the only
kink left is the worldline itself, which every stencil keeps to one side of.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory
from .errors import OutOfRange
from .free_field import AWAY, LEFT, RIGHT, FieldGradient, eval_U_stat, eval_V, grad_V

TUBE_GUARD = 1e-3
H_GRAD = 1e-4
H_JUMP = 1e-4

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class FieldSample:
    t: float
    x: float
    U: float
    grad: FieldGradient


@dataclass(frozen=True)
class Jump:
    jump_d1: float
    jump_d0: float


def _integrand(traj: Trajectory, s):
    """``(a/2) sqrt(1 - v**2) = (a/2) m / sqrt(m**2 + p**2)`` from the dense output."""
    _, u0, _, _ = traj.kinematics_at(s)
    return 0.5 * traj.params.charge / u0


def _cumulative(traj: Trajectory):
    cum = traj.cache.get("duhamel_cumulative")
    if cum is None:
        t0, t1 = traj.t[:-1], traj.t[1:]
        half = 0.5 * (t1 - t0)
        nodes = (0.5 * (t0 + t1))[:, None] + half[:, None] * _GL_X[None, :]
        vals = _integrand(traj, nodes)
        per_step = half * (vals @ _GL_W)
        cum = np.concatenate([[0.0], np.cumsum(per_step)])
        traj.cache["duhamel_cumulative"] = cum
    return cum


def _check_range(traj, t):
    if np.any(t < 0) or np.any(t > traj.t_end):
        raise OutOfRange(f"t outside [0, {traj.t_end}]")


def retarded_time(traj: Trajectory, t, x):
    """Root of ``(t - s) - |x - Q(s)|`` on ``[0, t]``; 0 where ``|x| >= t``."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    t, x = np.broadcast_arrays(t, x)
    _check_range(traj, t)
    lo = np.zeros_like(t)
    hi = t.copy()
    s = 0.5 * (lo + hi)
    inside = np.abs(x) < t
    if not np.any(inside):
        return np.zeros_like(t)
    ti, xi = t[inside], x[inside]
    lo, hi = lo[inside], hi[inside]
    # safeguarded Newton inside a shrinking bracket; g' = -1 + sgn(x - Q) v is in (-2, 0)
    s = 0.5 * (lo + hi)
    scale = np.maximum(1.0, ti)
    for _ in range(200):
        y = traj(s)
        dy = traj.derivative(s)
        Qs = y[..., 0]
        g = (ti - s) - np.abs(xi - Qs)
        pos = g > 0
        lo = np.where(pos, s, lo)
        hi = np.where(pos, hi, s)
        dg = -1.0 + np.sign(xi - Qs) * dy[..., 0]
        step = np.where(g == 0, 0.0, -g / dg)
        s_new = s + step
        bad = (s_new <= lo) | (s_new >= hi) | ~np.isfinite(s_new)
        s_new = np.where(bad, 0.5 * (lo + hi), s_new)
        done = np.abs(s_new - s) <= 4 * np.finfo(float).eps * scale
        s = s_new
        if np.all(done | (hi - lo <= 4 * np.finfo(float).eps * scale)):
            break
    out = np.zeros_like(t)
    out[inside] = s
    return out


def eval_U_source(traj: Trajectory, t, x):
    """Duhamel integral of the worldline source at ``(t, x)``."""
    t_arr = np.asarray(t, dtype=float)
    x_arr = np.asarray(x, dtype=float)
    tb, xb = np.broadcast_arrays(t_arr, x_arr)
    s_ret = retarded_time(traj, tb, xb)
    cum = _cumulative(traj)
    idx = np.clip(np.searchsorted(traj.t, s_ret, side="right") - 1, 0, len(traj.t) - 2)
    base = np.where(s_ret > 0, cum[idx], 0.0)
    t_k = traj.t[idx]
    half = 0.5 * (s_ret - t_k)
    nodes = (0.5 * (s_ret + t_k))[..., None] + half[..., None] * _GL_X
    nodes = np.clip(nodes, traj.t[0], traj.t_end)
    partial = half * (_integrand(traj, nodes) @ _GL_W)
    out = np.where(s_ret > 0, base + partial, 0.0)
    return float(out) if out.ndim == 0 else out


def eval_U_self(traj: Trajectory, t, x):
    """``U_stat + U_source``: the field of the charge and its static past."""
    a = traj.params.charge
    return eval_U_stat(a, t, x) + eval_U_source(traj, t, x)


def _grad_self_arrays(traj: Trajectory, t, x, h=H_GRAD):
    """Finite-difference gradient of ``U_self`` at points off the worldline.

    Space stencils are central when both neighbours lie on the point's own
    side of the worldline and one-sided (pointing away) otherwise; time
    stencils shrink so the worldline cannot sweep across them.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t, x = np.broadcast_arrays(t, x)
    dist = x - traj.position(t)
    if np.any(dist == 0):
        raise ValueError("gradient of U_self is two-valued on the worldline")
    sgn = np.sign(dist)
    ad = np.abs(dist)

    central = ad > 2.5 * h
    ht = np.minimum(h, 0.5 * ad)
    tp = np.minimum(t + ht, traj.t_end)
    tm = np.maximum(t - ht, 0.0)
    # every stencil point in one batched evaluation
    tt = np.concatenate([t, t, t, t, t, tp, tm, np.minimum(t + 2 * ht, traj.t_end),
                         np.maximum(t - 2 * ht, 0.0)])
    xx = np.concatenate([x, x + h, x - h, x + sgn * h, x + 2 * sgn * h, x, x, x, x])
    f0, fxp, fxm, fs1, fs2, ftp, ftm, ftp2, ftm2 = np.split(eval_U_self(traj, tt, xx), 9)

    d1_c = (fxp - fxm) / (2 * h)
    d1_o = sgn * (-3 * f0 + 4 * fs1 - fs2) / (2 * h)
    d1 = np.where(central, d1_c, d1_o)

    forward = t - ht < 0
    backward = t + ht > traj.t_end
    d0_c = (ftp - ftm) / (2 * ht)
    d0_f = (-3 * f0 + 4 * ftp - ftp2) / (2 * ht)
    d0_b = (3 * f0 - 4 * ftm + ftm2) / (2 * ht)
    d0 = np.where(forward, d0_f, np.where(backward, d0_b, d0_c))
    return d0, d1


def _richardson_limit(g1, g2, g4):
    """Value at offset 0 from samples at offsets h, 2h, 4h (quadratic model)."""
    return (8 * g1 - 6 * g2 + g4) / 3.0


def _grad_total_arrays(traj, t, x):
    d0s, d1s = _grad_self_arrays(traj, t, x)
    d0v, d1v = grad_V(traj.profile, t, x)
    return d0s + d0v, d1s + d1v


def one_sided_gradient(traj: Trajectory, t, x, side: str, h=H_JUMP):
    """Limit of the total gradient at ``(t, x)`` approached from ``side``.

    Gradients are sampled at offsets ``h, 2h, 4h`` from ``x`` towards ``side``
    and extrapolated back to offset 0.
    """
    if side not in (LEFT, RIGHT):
        raise ValueError("side must be 'left' or 'right'")
    direction = 1.0 if side == RIGHT else -1.0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t, x = np.broadcast_arrays(t, x)
    tt = np.concatenate([t, t, t])
    xx = np.concatenate([x + direction * h, x + 2 * direction * h, x + 4 * direction * h])
    d0, d1 = _grad_total_arrays(traj, tt, xx)
    n = len(t)
    d0 = _richardson_limit(d0[:n], d0[n:2 * n], d0[2 * n:])
    d1 = _richardson_limit(d1[:n], d1[n:2 * n], d1[2 * n:])
    return d0, d1


def eval_U_total(params, profile, traj: Trajectory, t: float, x: float, side: str | None = None) -> FieldSample:
    """Total field ``V + U_stat + U_source`` and its gradient at one point.

    Within ``TUBE_GUARD`` of the worldline the caller must say which side's
    gradient is wanted; the value itself is continuous.
    """
    if traj.params != params or traj.profile != profile:
        raise ValueError("trajectory was integrated for different parameters or radiation")
    _check_range(traj, np.asarray(t))
    U = eval_V(profile, t, x) + eval_U_self(traj, t, x)
    dist = x - float(traj.position(t))
    if abs(dist) <= TUBE_GUARD:
        if side not in (LEFT, RIGHT):
            raise ValueError(f"point within {TUBE_GUARD} of the worldline; pass side='left' or 'right'")
        if dist != 0 and (dist > 0) != (side == RIGHT):
            raise ValueError(f"point lies on the {'right' if dist > 0 else 'left'} of the worldline")
        d0, d1 = one_sided_gradient(traj, t, x, side)
        grad = FieldGradient(float(d0[0]), float(d1[0]), side)
    else:
        d0, d1 = _grad_total_arrays(traj, t, x)
        grad = FieldGradient(float(d0[0]), float(d1[0]), AWAY)
    return FieldSample(float(t), float(x), float(U), grad)


def worldline_limits(traj: Trajectory, t):
    """One-sided gradients ``((d0_L, d1_L), (d0_R, d1_R))`` on the worldline."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    _check_range(traj, t)
    Q = traj.position(t)
    return one_sided_gradient(traj, t, Q, LEFT), one_sided_gradient(traj, t, Q, RIGHT)


def worldline_jump(params, profile, traj: Trajectory, t) -> Jump:
    """Right-minus-left jump of ``(d1 U, d0 U)`` across the worldline at time ``t``."""
    (d0L, d1L), (d0R, d1R) = worldline_limits(traj, t)
    j1, j0 = d1R - d1L, d0R - d0L
    if np.ndim(t) == 0:
        return Jump(float(j1[0]), float(j0[0]))
    return Jump(j1, j0)
