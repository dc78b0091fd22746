"""Picard iteration for the integral form of the worldline equations.

The map ``F(q)(t) = int_0^t f(q(s), s) ds`` is iterated on curves sampled
on a uniform grid over ``[0, T_h]``, measured in the exponentially weighted
sup-norm ``sup_t exp(-gamma t) |q(t)|``.  With ``gamma > L`` (a Lipschitz
bound for ``f``) the map contracts with factor ``L / gamma``.

Tail contributions beyond the horizon are weighted by at most
``exp(-gamma T_h)`` and are simply not represented.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .dynamics import ParticleParams, Trajectory, rhs_arrays
from .errors import GridMismatch, MaxIterExceeded, SmallnessViolation
from .free_field import smallness_check
from .profiles import RadiationProfile, norms

LIPSCHITZ_SLACK = 1e-9


@dataclass(frozen=True)
class CurveSpaceSpec:
    horizon: float
    gamma: float
    k_vec: tuple[float, float, float]
    nodes: int = 4096

    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.nodes)


@dataclass
class SampledCurve:
    """Values of ``(Q, p, W)`` at the grid nodes ``t``; linear in between."""

    t: np.ndarray
    values: np.ndarray

    @classmethod
    def zeros(cls, t) -> "SampledCurve":
        t = np.asarray(t, dtype=float)
        return cls(t, np.zeros((len(t), 3)))

    @classmethod
    def from_trajectory(cls, traj: Trajectory, t) -> "SampledCurve":
        t = np.asarray(t, dtype=float)
        return cls(t, traj(t))

    def lipschitz_constants(self) -> np.ndarray:
        dt = np.diff(self.t)
        return np.max(np.abs(np.diff(self.values, axis=0)) / dt[:, None], axis=0)

    def __call__(self, s):
        return np.stack([np.interp(s, self.t, self.values[:, i]) for i in range(3)], axis=-1)


@dataclass
class ContractionReport:
    L_est: float
    gamma: float
    ratio_bound: float
    observed_ratios: list[float] = field(default_factory=list)
    iterations: int = 0
    final_residual: float = np.inf
    sup_residual: float = np.inf
    weighted_converged_at: int | None = None
    distances: list[float] = field(default_factory=list)


def k_vector(params: ParticleParams, profile: RadiationProfile) -> tuple[float, float, float]:
    """Per-component Lipschitz constants ``(1, K, |a|/2)`` of fixed points."""
    a = abs(params.charge)
    n = norms(profile)
    K = 0.5 * a * a + a * n.sup_d1V0 + a * n.sup_V1
    return (1.0, K, 0.5 * a)


def lipschitz_table(params: ParticleParams, profile: RadiationProfile) -> np.ndarray:
    """Bounds ``M[i, j] >= |d f_j / d q_i|`` over the admissible region.

    Rows are the variables (Q, p, W), columns the components of ``f``.
    Every derivative of ``p/S`` or ``m/S`` (``S = sqrt(m**2 + p**2)``) with
    respect to ``m`` or ``p`` is bounded by ``1/m_V``, ``|dm/dQ| <= K`` and
    ``|dm/dW| = |a|``.
    """
    small = smallness_check(params, profile)
    if not small.ok:
        raise SmallnessViolation(f"m_V = {small.m_V:.6g} <= 0")
    mv = small.m_V
    a = abs(params.charge)
    _, K, _ = k_vector(params, profile)
    Kp = norms(profile).lip_d1V
    half_a2 = 0.5 * a * a
    return np.array(
        [
            [K / mv, half_a2 * K / mv + K * K / mv + a * Kp, 0.5 * a * K / mv],
            [1.0 / mv, (half_a2 + K) / mv, 0.5 * a / mv],
            [a / mv, a * (half_a2 + K) / mv, half_a2 / mv],
        ]
    )


def lipschitz_estimate(params: ParticleParams, profile: RadiationProfile) -> float:
    rows = lipschitz_table(params, profile).sum(axis=1)
    return float(np.sqrt(np.sum(rows**2)))


def curve_space(params, profile, horizon, nodes=4096, gamma_factor=2.0) -> CurveSpaceSpec:
    L = lipschitz_estimate(params, profile)
    return CurveSpaceSpec(horizon=float(horizon), gamma=gamma_factor * L,
                          k_vec=k_vector(params, profile), nodes=int(nodes))


def weighted_distance(q1: SampledCurve, q2: SampledCurve, gamma: float) -> float:
    """``sup_t exp(-gamma t) |q2(t) - q1(t)|`` over the nodes (Euclidean in R^3)."""
    if q1.t.shape != q2.t.shape or not np.array_equal(q1.t, q2.t):
        raise GridMismatch("curves live on different grids")
    diff = np.linalg.norm(q2.values - q1.values, axis=1)
    return float(np.max(np.exp(-gamma * q1.t) * diff))


def sup_distance(q1: SampledCurve, q2: SampledCurve) -> float:
    if q1.t.shape != q2.t.shape or not np.array_equal(q1.t, q2.t):
        raise GridMismatch("curves live on different grids")
    return float(np.max(np.abs(q2.values - q1.values)))


def check_admissible(q: SampledCurve, k_vec) -> None:
    if np.any(q.values[0] != 0.0):
        raise ValueError("curve must start at q(0) = 0")
    lip = q.lipschitz_constants()
    bound = np.asarray(k_vec) * (1 + LIPSCHITZ_SLACK)
    if np.any(lip > bound):
        raise ValueError(f"curve Lipschitz constants {lip} exceed {tuple(k_vec)}")


def picard_map(params: ParticleParams, profile: RadiationProfile, q: SampledCurve,
               check: bool = True) -> SampledCurve:
    """One application of ``F``: trapezoidal cumulative integral of ``f`` along ``q``."""
    if check:
        check_admissible(q, k_vector(params, profile))
    Q, p, W = q.values.T
    dQ, dp, dW, _ = rhs_arrays(params, profile, q.t, Q, p, W)
    f = np.stack([dQ, dp, dW], axis=1)
    return SampledCurve(q.t, cumulative_trapezoid(f, q.t, axis=0, initial=0.0))


def solve_fixed_point(
    params: ParticleParams,
    profile: RadiationProfile,
    spec: CurveSpaceSpec,
    tol: float = 1e-9,
    max_iter: int = 200,
    q0: SampledCurve | None = None,
    sup_tol: float | None = None,
):
    """Iterate ``q_{n+1} = F(q_n)`` from ``q0`` (default ``q = 0``).

    Stops once the weighted distance between successive iterates is below
    ``tol``; with ``sup_tol`` it also waits for the unweighted sup-distance,
    which on a long horizon needs more sweeps than the weighted criterion.
    Returns ``(curve, report)``.
    """
    if not tol > 0:
        raise ValueError("tol must be > 0")
    L = lipschitz_estimate(params, profile)
    if not spec.gamma > L:
        raise ValueError(f"gamma = {spec.gamma:.6g} must exceed the Lipschitz estimate {L:.6g}")
    t = spec.grid()
    q = SampledCurve.zeros(t) if q0 is None else q0
    if not np.array_equal(q.t, t):
        raise GridMismatch("initial curve is not on the spec grid")
    report = ContractionReport(L_est=L, gamma=spec.gamma, ratio_bound=L / spec.gamma)
    # rounding in the cumulative sums grows like eps * |k| t; ratios of
    # distances at or below that level carry no information
    weight = np.exp(-spec.gamma * t)
    noise_floor = 64 * np.finfo(float).eps * np.max(weight * t) * np.linalg.norm(spec.k_vec)
    prev = None
    for n in range(1, max_iter + 1):
        q_next = picard_map(params, profile, q)
        d = weighted_distance(q, q_next, spec.gamma)
        ds = sup_distance(q, q_next)
        report.distances.append(d)
        if prev is not None and prev > noise_floor:
            report.observed_ratios.append(d / prev)
        report.iterations = n
        report.final_residual = d
        report.sup_residual = ds
        q, prev = q_next, d
        if d <= tol and report.weighted_converged_at is None:
            report.weighted_converged_at = n
        if d <= tol and (sup_tol is None or ds <= sup_tol):
            return q, report
    raise MaxIterExceeded(f"no convergence in {max_iter} iterations", report=report, curve=q)
