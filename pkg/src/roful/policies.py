"""Confidence radii, confidence bounds and the ROFUL family of policies.

Every selection rule breaks ties toward the lowest action index.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .environment import ActionSet
from .linalg import RidgeState, posterior_update, sample_posterior


class RadiusKind(str, enum.Enum):
    RHO = "rho"
    RHO_PRIME = "rho-prime"
    RHO_DOUBLE_PRIME = "rho-double-prime"
    ETA = "eta"


class PolicyKind(str, enum.Enum):
    OFUL = "oful"
    TS = "ts"
    GREEDY = "greedy"
    SG = "sg"


@dataclass(frozen=True)
class RadiusParams:
    """Inputs of the closed-form confidence radii.

    ``d`` is the ambient dimension; ``ETA`` uses the block dimension ``d // k``.
    ``sigma_scaled`` multiplies the first square root of rho/eta by sigma
    (off by default, i.e. the formula exactly as printed).
    """

    d: int
    T: int
    a_bound: float
    sigma: float = 1.0
    lam: float = 1.0
    theta_bound: float = 1.0
    n: int = 1
    k: int = 1
    inflation: float = 1.0
    sigma_scaled: bool = False

    def __post_init__(self):
        if self.T < 2:
            raise ValueError(f"horizon T must be at least 2, got {self.T}")
        if self.d < 1 or self.n < 1 or self.k < 1:
            raise ValueError("d, n and k must be positive")
        if min(self.a_bound, self.sigma, self.lam, self.theta_bound) <= 0:
            raise ValueError("a_bound, sigma, lam and theta_bound must be positive")
        if self.inflation < 0:
            raise ValueError("inflation must be non-negative")


def _ellipsoid_radius(d: int, log_count: float, p: RadiusParams) -> float:
    first = math.sqrt(d * math.log(1 + p.T * p.a_bound**2 / (d * p.sigma**2)) + 7 * log_count)
    if p.sigma_scaled:
        first *= p.sigma
    return first + (p.theta_bound + math.sqrt(7 * log_count)) / math.sqrt(p.lam)


def confidence_radius(kind: RadiusKind | str, p: RadiusParams) -> float:
    kind = RadiusKind(kind)
    log_t = math.log(p.T)
    if kind is RadiusKind.RHO:
        return _ellipsoid_radius(p.d, log_t, p)
    if kind is RadiusKind.RHO_DOUBLE_PRIME:
        return math.sqrt(6 * math.log(2 * p.n * p.T))
    if kind is RadiusKind.RHO_PRIME:
        rho = _ellipsoid_radius(p.d, log_t, p)
        spread = min(2 * p.d + 12 * log_t, 6 * math.log(2 * p.n * p.T))
        return max(rho, p.inflation * math.sqrt(spread))
    if p.d % p.k:
        raise ValueError(f"group count k={p.k} does not divide dimension d={p.d}")
    return _ellipsoid_radius(p.d // p.k, math.log(p.k * p.T), p)


# -- confidence bounds --------------------------------------------------------

def _as_matrix(action_set) -> np.ndarray:
    if isinstance(action_set, ActionSet):
        return action_set.actions
    arr = np.asarray(action_set, dtype=float)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("action set must be a non-empty (n, d) array")
    return arr


def widths(state: RidgeState, actions: np.ndarray) -> np.ndarray:
    """``||a||_cov`` for every row of ``actions``."""
    if actions.shape[1] != state.dim:
        raise ValueError(f"actions have dimension {actions.shape[1]}, state has {state.dim}")
    q = np.einsum("ij,ij->i", actions @ state.cov, actions)
    return np.sqrt(np.maximum(q, 0.0))


def confidence_bounds(state: RidgeState, radius: float, action_set) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper confidence bounds for every action of the set."""
    X = _as_matrix(action_set)
    w = widths(state, X)
    mu = X @ state.theta_hat
    return mu - radius * w, mu + radius * w


def confidence_interval(state: RidgeState, radius: float, a) -> tuple[float, float]:
    a = np.asarray(a, dtype=float)
    if a.shape != (state.dim,):
        raise ValueError(f"expected a vector of dimension {state.dim}, got shape {a.shape}")
    lo, hi = confidence_bounds(state, radius, a[None, :])
    return float(lo[0]), float(hi[0])


def baseline(state: RidgeState, radius: float, action_set) -> float:
    """Largest lower confidence bound over the set."""
    lo, _ = confidence_bounds(state, radius, action_set)
    return float(lo.max())


# -- selection rules ----------------------------------------------------------

def select_greedy(state: RidgeState, action_set) -> int:
    return int(np.argmax(_as_matrix(action_set) @ state.theta_hat))


def select_oful(state: RidgeState, radius: float, action_set) -> int:
    _, hi = confidence_bounds(state, radius, action_set)
    return int(np.argmax(hi))


def select_ts(state: RidgeState, inflation: float, action_set, rng: np.random.Generator) -> int:
    theta = sample_posterior(state, inflation, rng)
    return int(np.argmax(_as_matrix(action_set) @ theta))


def sieve_threshold(lower: np.ndarray, upper: np.ndarray, alpha: float) -> float:
    b = float(lower.max())
    u_max = float(upper.max())
    if alpha >= 1.0:
        return u_max
    # Clamp so rounding can never lift the threshold above the top bound.
    return min(b + alpha * (u_max - b), u_max)


def _sieve_from_bounds(lower, upper, alpha) -> np.ndarray:
    return np.flatnonzero(upper >= sieve_threshold(lower, upper, alpha))


def sieve_actions(state: RidgeState, radius: float, alpha: float, action_set) -> np.ndarray:
    """Indices whose upper bound reaches ``B + alpha * (max U - B)``.

    Never empty: the maximiser of the upper bound always survives.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"sieving rate must lie in [0, 1], got {alpha}")
    lo, hi = confidence_bounds(state, radius, action_set)
    return _sieve_from_bounds(lo, hi, alpha)


def select_sg(state: RidgeState, radius: float, alpha: float, action_set) -> int:
    """Greedy choice among the actions that survive the sieve."""
    X = _as_matrix(action_set)
    kept = sieve_actions(state, radius, alpha, X)
    values = X[kept] @ state.theta_hat
    return int(kept[np.argmax(values)])


Worth = Callable[[RidgeState, np.ndarray, int], float]


def roful_select(worth: Worth, state: RidgeState, action_set) -> int:
    """Play the action of highest worth; ``worth(state, actions, i)``."""
    X = _as_matrix(action_set)
    values = np.array([worth(state, X, i) for i in range(X.shape[0])])
    return int(np.argmax(values))


def greedy_worth(state: RidgeState, X: np.ndarray, i: int) -> float:
    return float(X[i] @ state.theta_hat)


def ucb_worth(radius: float) -> Worth:
    def worth(state, X, i):
        return confidence_interval(state, radius, X[i])[1]
    return worth


def sampled_worth(theta_tilde: np.ndarray) -> Worth:
    def worth(state, X, i):
        return float(X[i] @ theta_tilde)
    return worth


def sg_worth(radius: float, alpha: float) -> Worth:
    """Upper bound at the sieved-greedy choice, lower bound everywhere else."""
    def worth(state, X, i):
        lo, hi = confidence_interval(state, radius, X[i])
        return hi if i == select_sg(state, radius, alpha, X) else lo
    return worth


# -- configured policies ------------------------------------------------------

@dataclass(frozen=True)
class PolicyConfig:
    kind: PolicyKind
    radius_kind: RadiusKind = RadiusKind.RHO
    inflation: float = 1.0
    alpha: float = 0.5
    lam: float = 1.0
    sigma: float = 1.0
    radius_value: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        object.__setattr__(self, "radius_kind", RadiusKind(self.radius_kind))
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"sieving rate must lie in [0, 1], got {self.alpha}")
        if self.inflation < 0:
            raise ValueError(f"inflation must be non-negative, got {self.inflation}")
        if self.lam <= 0 or self.sigma <= 0:
            raise ValueError("lam and sigma must be positive")
        if self.radius_value is not None and self.radius_value < 0:
            raise ValueError("radius override must be non-negative")

    @property
    def label(self) -> str:
        if self.kind is PolicyKind.SG:
            return f"sg({self.alpha:g})"
        if self.kind is PolicyKind.TS and self.inflation != 1.0:
            return f"ts({self.inflation:g})"
        return self.kind.value

    def radius(self, params: RadiusParams) -> float:
        if self.radius_value is not None:
            return self.radius_value
        return confidence_radius(self.radius_kind, params)


class Agent:
    """A policy together with its posterior state, driven round by round."""

    def __init__(self, config: PolicyConfig, dim: int, radius: float, rng: np.random.Generator | None = None):
        self.config = config
        self.radius = float(radius)
        self.state = RidgeState.fresh(dim, config.lam, config.sigma)
        self.rng = rng if rng is not None else np.random.default_rng()

    @property
    def label(self) -> str:
        return self.config.label

    def choose(self, action_set) -> int:
        X = _as_matrix(action_set)
        kind = self.config.kind
        if kind is PolicyKind.GREEDY:
            return select_greedy(self.state, X)
        if kind is PolicyKind.TS:
            return select_ts(self.state, self.config.inflation, X, self.rng)
        lo, hi = confidence_bounds(self.state, self.radius, X)
        if kind is PolicyKind.OFUL:
            return int(np.argmax(hi))
        kept = _sieve_from_bounds(lo, hi, self.config.alpha)
        return int(kept[np.argmax(X[kept] @ self.state.theta_hat)])

    def observe(self, a, reward: float) -> None:
        posterior_update(self.state, a, reward, in_place=True)
