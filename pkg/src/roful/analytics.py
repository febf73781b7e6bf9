"""Regret accounting, complexity bounds, regret certificates and diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.stats import norm

from .environment import GroupStructure
from .linalg import RidgeState
from .policies import PolicyConfig, PolicyKind, RadiusKind, RadiusParams, confidence_radius


@dataclass
class RegretTrace:
    """Per-round record of one policy on one repetition."""

    policy_label: str
    chosen: np.ndarray
    inst_regret: np.ndarray
    gap: np.ndarray
    uncertainty: np.ndarray
    rep: int = 0

    @property
    def horizon(self) -> int:
        return self.inst_regret.shape[0]

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.inst_regret)

    @property
    def final_regret(self) -> float:
        return float(self.inst_regret.sum())


@dataclass(frozen=True)
class BoundCertificate:
    K: float
    p: float
    D: float
    T: int
    delta: float
    q_delta: float
    gap_dependent_bound: float
    gap_independent_bound: float
    notes: tuple[str, ...] = field(default=())


def uncertainty_v(state: RidgeState, a) -> float:
    """``min(sigma^2, ||a||^2_cov)``."""
    a = np.asarray(a, dtype=float)
    if a.shape != (state.dim,):
        raise ValueError(f"expected a vector of dimension {state.dim}, got shape {a.shape}")
    return min(state.sigma**2, max(float(a @ state.cov @ a), 0.0))


def uncertainty_complexity_bound(d: int, T: int, a_bound: float, lam: float, sigma: float) -> float:
    """Elliptical-potential bound ``2 sigma^2 d log(1 + T a^2 lam / (d sigma^2))``."""
    return 2 * sigma**2 * d * math.log1p(T * a_bound**2 * lam / (d * sigma**2))


def roful_complexity_bound(radius: float, d: int, T: int, a_bound: float, lam: float, sigma: float) -> float:
    """Complexity bound for the width-squared structure ``(U - L)^2 = 4 r^2 ||a||^2``."""
    return 4 * radius**2 * uncertainty_complexity_bound(d, T, a_bound, lam, sigma)


def general_regret_bound(K: float, gain_rate: float, D: float, T: int, delta: float, q_delta: float) -> float:
    return K / (delta * gain_rate) + D / delta + T * delta * q_delta


def regret_bounds(
    K: float,
    p: float,
    D: float,
    T: int,
    delta: float | None = None,
    q_delta: float = 1.0,
    notes: Iterable[str] = (),
) -> BoundCertificate:
    """Gap-dependent and gap-independent ROFUL regret bounds.

    With ``delta`` omitted the minimiser ``sqrt((2K/p + D) / T)`` is used.
    """
    if K <= 0 or D < 0 or T < 1:
        raise ValueError("K must be positive, D non-negative and T positive")
    if not 0 < p <= 1:
        raise ValueError(f"optimism parameter must lie in (0, 1], got {p}")
    if not 0 <= q_delta <= 1:
        raise ValueError(f"q_delta must lie in [0, 1], got {q_delta}")
    scale = 2 * K / p + D
    if delta is None:
        delta = math.sqrt(scale / T)
    if delta <= 0:
        raise ValueError("delta must be positive")
    return BoundCertificate(
        K=K,
        p=p,
        D=D,
        T=T,
        delta=delta,
        q_delta=q_delta,
        gap_dependent_bound=scale / delta + T * delta * q_delta,
        gap_independent_bound=2 * math.sqrt(scale * T),
        notes=tuple(notes),
    )


def optimism_parameter(config: PolicyConfig, rho: float) -> float | None:
    """Optimism-in-expectation parameter ``p`` of a configured policy.

    OFUL: 1. Bayesian TS (inflation 1): 1. Inflated TS: ``Phi(-rho/iota)/2``.
    SG: ``alpha^2``. Greedy has no such guarantee and returns None, as does
    SG with ``alpha = 0``.
    """
    if config.kind is PolicyKind.OFUL:
        return 1.0
    if config.kind is PolicyKind.TS:
        if config.inflation == 1.0:
            return 1.0
        if config.inflation == 0:
            return None
        return float(norm.cdf(-rho / config.inflation)) / 2
    if config.kind is PolicyKind.SG:
        return config.alpha**2 if config.alpha > 0 else None
    return None


def boundedness_constant(a_bound: float, theta_bound: float, T: int) -> float:
    """Surrogate ``4 a^2 (theta + sqrt(7 log T))^2`` for Gaussian parameters."""
    return 4 * a_bound**2 * (theta_bound + math.sqrt(7 * math.log(T))) ** 2


def certificate_for_policy(
    config: PolicyConfig,
    params: RadiusParams,
    delta: float | None = None,
    q_delta: float = 1.0,
) -> BoundCertificate | None:
    """Regret certificate for one configured policy; None when the policy
    carries no optimism guarantee (greedy) or ``p`` underflows to zero."""
    rho = confidence_radius(RadiusKind.RHO, params)
    p = optimism_parameter(config, rho)
    if p is None or p <= 0:
        return None
    if config.kind is PolicyKind.TS and config.inflation != 1.0:
        radius = confidence_radius(RadiusKind.RHO_PRIME, params)
    elif config.kind is PolicyKind.TS:
        radius = rho
    else:
        radius = config.radius(params)
    K = roful_complexity_bound(radius, params.d, params.T, params.a_bound, params.lam, params.sigma)
    D = boundedness_constant(params.a_bound, params.theta_bound, params.T)
    notes = (f"radius={radius:.6g}", "D is the Gaussian-prior surrogate 4a^2(theta+sqrt(7 log T))^2")
    return regret_bounds(K, p, D, params.T, delta, q_delta, notes)


# -- gap / margin diagnostics -------------------------------------------------

def empirical_margin(gaps: Sequence[float], z: float) -> float:
    """Fraction of rounds whose gap is at most ``z``."""
    g = np.asarray(gaps, dtype=float)
    if g.size == 0:
        raise ValueError("gap list is empty")
    if z <= 0:
        raise ValueError(f"z must be positive, got {z}")
    return float(np.count_nonzero(g <= z)) / g.size


class MarginFit(NamedTuple):
    c0: float
    delta: float
    z: np.ndarray
    freq: np.ndarray


def fit_margin_constant(gaps: Sequence[float], delta: float | None = None, num: int = 20) -> MarginFit:
    """Least-squares slope through the origin of ``P(gap <= z)`` against ``z``.

    The grid holds ``num`` equispaced points on ``(0, delta]``; ``delta``
    defaults to the 10th percentile of the finite gaps.
    """
    g = np.asarray(gaps, dtype=float)
    finite = g[np.isfinite(g)]
    if delta is None:
        if finite.size == 0:
            raise ValueError("no finite gaps to choose delta from")
        delta = float(np.percentile(finite, 10))
    if delta <= 0:
        raise ValueError("delta must be positive")
    z = delta * np.arange(1, num + 1) / num
    freq = np.array([empirical_margin(g, zi) for zi in z])
    c0 = float(z @ freq / (z @ z))
    return MarginFit(c0, delta, z, freq)


# -- linear expansion ---------------------------------------------------------

class ExpansionTrace(NamedTuple):
    rounds: np.ndarray
    values: np.ndarray
    c2: float


def restricted_op_norm(state: RidgeState, coords: np.ndarray | None = None) -> float:
    """Largest eigenvalue of ``cov`` restricted to ``coords`` (all if None)."""
    sub = state.cov if coords is None else state.cov[np.ix_(coords, coords)]
    if sub.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(sub)[-1])


def linear_expansion_trace(
    states: Iterable[RidgeState],
    group: GroupStructure | None = None,
    blocks: Iterable[int] | None = None,
) -> ExpansionTrace:
    """Operator norm of the covariance on the near-optimal blocks, per state.

    ``c2`` is the median over ``t >= 1`` of ``t * value``.
    """
    coords = None
    if group is not None:
        coords = group.coordinates(range(group.num_groups) if blocks is None else blocks)
    rounds, values = [], []
    for s in states:
        if group is not None and s.dim != group.dim:
            raise ValueError(f"group spans {group.dim} coordinates, state has {s.dim}")
        rounds.append(s.count)
        values.append(restricted_op_norm(s, coords))
    rounds = np.asarray(rounds, dtype=int)
    values = np.asarray(values, dtype=float)
    pos = rounds >= 1
    c2 = float(np.median(rounds[pos] * values[pos])) if pos.any() else float("nan")
    return ExpansionTrace(rounds, values, c2)


def near_optimal_blocks(action_sets, theta_star: np.ndarray, group: GroupStructure, delta: float) -> list[int]:
    """Blocks that ever hold an action within ``delta`` of the round's best."""
    hit = set()
    for X in action_sets:
        X = getattr(X, "actions", X)
        m = X @ theta_star
        for a in X[m >= m.max() - delta]:
            j = group.group_of(a)
            hit.update(range(group.num_groups) if j is None else (j,))
    return sorted(hit)


# -- chi-square tail ----------------------------------------------------------

class TailCheck(NamedTuple):
    empirical: float
    bound: float
    passed: bool


def chi2_tail_check(
    d: int, gamma: float, num_samples: int, rng: np.random.Generator, chunk: int = 100_000
) -> TailCheck:
    """Monte Carlo ``P(X >= 2d + 3 gamma)`` for ``X`` a sum of ``d`` squared
    standard normals, against the bound ``exp(-gamma)``."""
    if d < 1 or gamma <= 0 or num_samples < 1:
        raise ValueError("d, gamma and num_samples must be positive")
    level = 2 * d + 3 * gamma
    hits = 0
    done = 0
    while done < num_samples:
        m = min(chunk, num_samples - done)
        z = rng.standard_normal((m, d))
        hits += int(np.count_nonzero(np.einsum("ij,ij->i", z, z) >= level))
        done += m
    empirical = hits / num_samples
    bound = math.exp(-gamma)
    return TailCheck(empirical, bound, empirical <= bound + 3 * math.sqrt(bound / num_samples))
