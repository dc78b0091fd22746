"""Freely evolving fields: the radiation V and the evolved static cone U_stat.

Both solve the homogeneous 1+1 wave equation and are evaluated from
d'Alembert's formula, so values and gradients are exact up to rounding.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .profiles import (
    RadiationProfile,
    eval_antiderivative,
    eval_derivative,
    eval_profile,
    norms,
)

LEFT = "left"
RIGHT = "right"
AWAY = "away_from_worldline"
SIDES = (LEFT, RIGHT, AWAY)

KINK_TOL = 1e-12


@dataclass(frozen=True)
class FieldGradient:
    """``d0`` is the time derivative, ``d1`` the space derivative.

    ``side`` is ``left``/``right`` only for one-sided limits taken at a kink.
    """

    d0: float
    d1: float
    side: str = AWAY

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}")


@dataclass(frozen=True)
class Smallness:
    m_V: float
    ok: bool


def _scalar_or_array(out, *inputs):
    return float(out) if all(np.ndim(v) == 0 for v in inputs) else out


def eval_V(profile: RadiationProfile, t, x):
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    xp, xm = x + t, x - t
    out = 0.5 * (eval_profile(profile, "V0", xp) + eval_profile(profile, "V0", xm)) + 0.5 * (
        eval_antiderivative(profile, "V1", xp) - eval_antiderivative(profile, "V1", xm)
    )
    return _scalar_or_array(out, t, x)


def grad_V(profile: RadiationProfile, t, x):
    """Vectorised ``(dV/dt, dV/dx)``."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    xp, xm = x + t, x - t
    d0p = eval_derivative(profile, "V0", xp)
    d0m = eval_derivative(profile, "V0", xm)
    v1p = eval_profile(profile, "V1", xp)
    v1m = eval_profile(profile, "V1", xm)
    d1 = 0.5 * (d0p + d0m + v1p - v1m)
    d0 = 0.5 * (d0p - d0m + v1p + v1m)
    return d0, d1


def eval_grad_V(profile: RadiationProfile, t, x) -> FieldGradient:
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be >= 0")
    d0, d1 = grad_V(profile, t, x)
    return FieldGradient(_scalar_or_array(d0, t, x), _scalar_or_array(d1, t, x), AWAY)


def eval_U_stat(a: float, t, x):
    """Evolution of ``-(a/2)|x|`` with zero velocity: ``-(a/4)(|x+t| + |x-t|)``."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    out = -0.25 * a * (np.abs(x + t) + np.abs(x - t))
    return _scalar_or_array(out, t, x)


def _sided_sign(y, side):
    s = np.sign(y)
    on_kink = np.abs(y) <= KINK_TOL
    if np.any(on_kink):
        if side not in (LEFT, RIGHT):
            raise ValueError("point lies on a kink of U_stat; request side='left' or 'right'")
        s = np.where(on_kink, 1.0 if side == RIGHT else -1.0, s)
    return s


def grad_U_stat(a: float, t, x, side=None):
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    sp = _sided_sign(x + t, side)
    sm = _sided_sign(x - t, side)
    d1 = -0.25 * a * (sp + sm)
    d0 = -0.25 * a * (sp - sm)
    return d0, d1


def eval_grad_U_stat(a: float, t, x, side=None) -> FieldGradient:
    """One-sided gradients at the kink loci ``x = +-t`` need an explicit side."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be >= 0")
    d0, d1 = grad_U_stat(a, t, x, side)
    return FieldGradient(_scalar_or_array(d0, t, x), _scalar_or_array(d1, t, x), side or AWAY)


def smallness_check(params, profile: RadiationProfile) -> Smallness:
    """Lower bound ``m_V`` for the dynamical mass; runs refuse to start unless ``m_V > 0``."""
    n = norms(profile)
    m_V = params.bare_mass - abs(params.charge) * (n.sup_V0 + 0.5 * n.L1_V1)
    return Smallness(m_V=float(m_V), ok=bool(m_V > 0))
