"""Ground-truth linear reward model and the two action-set generators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LinearEnvironment:
    """Mean reward ``<theta_star, a>`` plus Gaussian noise of scale ``noise_sigma``.

    ``noise_sigma = 0`` is accepted and gives noiseless rewards.
    """

    theta_star: np.ndarray
    noise_sigma: float = 1.0
    action_bound: float = 1.0

    def __post_init__(self):
        theta = np.asarray(self.theta_star, dtype=float)
        if theta.ndim != 1 or not np.all(np.isfinite(theta)):
            raise ValueError("theta_star must be a finite vector")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be non-negative, got {self.noise_sigma}")
        if self.action_bound <= 0:
            raise ValueError(f"action_bound must be positive, got {self.action_bound}")
        object.__setattr__(self, "theta_star", theta)

    @property
    def dim(self) -> int:
        return self.theta_star.shape[0]

    def mean_rewards(self, actions: "ActionSet") -> np.ndarray:
        return actions.actions @ self.theta_star


@dataclass(frozen=True)
class ActionSet:
    """The decision set of one round, stored as an ``(n, d)`` array."""

    actions: np.ndarray
    round: int = 1

    def __post_init__(self):
        arr = np.asarray(self.actions, dtype=float)
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise ValueError(f"action set must be a non-empty (n, d) array, got shape {arr.shape}")
        object.__setattr__(self, "actions", arr)

    def __len__(self) -> int:
        return self.actions.shape[0]

    def __getitem__(self, i: int) -> np.ndarray:
        return self.actions[i]

    @property
    def dim(self) -> int:
        return self.actions.shape[1]


@dataclass(frozen=True)
class GroupStructure:
    """``k`` disjoint coordinate blocks of size ``block_dim`` (block ``j`` is
    coordinates ``j*block_dim .. (j+1)*block_dim - 1``)."""

    num_groups: int
    block_dim: int

    def __post_init__(self):
        if self.num_groups < 1 or self.block_dim < 1:
            raise ValueError("num_groups and block_dim must be positive")

    @property
    def dim(self) -> int:
        return self.num_groups * self.block_dim

    def block(self, j: int) -> slice:
        if not 0 <= j < self.num_groups:
            raise IndexError(f"group {j} out of range for {self.num_groups} groups")
        return slice(j * self.block_dim, (j + 1) * self.block_dim)

    def coordinates(self, groups) -> np.ndarray:
        """Coordinate indices spanned by the given groups, in increasing order."""
        groups = sorted(set(int(g) for g in groups))
        if not groups:
            return np.zeros(0, dtype=int)
        return np.concatenate([np.arange(self.block(g).start, self.block(g).stop) for g in groups])

    def group_of(self, a) -> int | None:
        """The single block holding all non-zeros of ``a``; None if ``a`` is
        zero or spans several blocks."""
        a = np.asarray(a, dtype=float)
        if a.shape != (self.dim,):
            raise ValueError(f"expected dimension {self.dim}, got shape {a.shape}")
        nz = np.flatnonzero(a.reshape(self.num_groups, self.block_dim).any(axis=1))
        return int(nz[0]) if nz.size == 1 else None


def sample_theta(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Draw ``theta_star ~ N(0, I_dim)``."""
    return rng.standard_normal(dim)


def sample_sphere(rng: np.random.Generator, dim: int, radius: float) -> np.ndarray:
    """Uniform point on the sphere of the given radius (normalised Gaussian)."""
    if dim < 1 or radius <= 0:
        raise ValueError("dim and radius must be positive")
    while True:
        g = rng.standard_normal(dim)
        norm = np.linalg.norm(g)
        if norm > 0:
            return g * (radius / norm)


def gen_scenario_one(
    rng: np.random.Generator,
    num_arms: int = 10,
    block_dim: int = 12,
    radius: float = 5.0,
    round: int = 1,
) -> ActionSet:
    """One shared context on the sphere, copied into each arm's own block."""
    if num_arms < 1 or block_dim < 1 or radius <= 0:
        raise ValueError("num_arms, block_dim and radius must be positive")
    v = sample_sphere(rng, block_dim, radius)
    actions = np.zeros((num_arms, num_arms * block_dim))
    for i in range(num_arms):
        actions[i, i * block_dim:(i + 1) * block_dim] = v
    return ActionSet(actions, round)


def gen_scenario_two(
    rng: np.random.Generator,
    num_arms: int = 10,
    dim: int = 120,
    radius: float = 5.0,
    round: int = 1,
) -> ActionSet:
    """``num_arms`` independent uniform points on the sphere in ``R^dim``."""
    if num_arms < 1 or dim < 1 or radius <= 0:
        raise ValueError("num_arms, dim and radius must be positive")
    g = rng.standard_normal((num_arms, dim))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    # A zero Gaussian row has probability zero; redraw it rather than divide by 0.
    while np.any(norms == 0):
        bad = np.flatnonzero(norms[:, 0] == 0)
        g[bad] = rng.standard_normal((bad.size, dim))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
    return ActionSet(g * (radius / norms), round)


def draw_reward(env: LinearEnvironment, a, rng: np.random.Generator) -> float:
    a = np.asarray(a, dtype=float)
    if a.shape != (env.dim,):
        raise ValueError(f"expected an action of dimension {env.dim}, got shape {a.shape}")
    mean = float(env.theta_star @ a)
    if env.noise_sigma == 0:
        return mean
    return mean + env.noise_sigma * rng.standard_normal()


def oracle_best(env: LinearEnvironment, action_set: ActionSet) -> tuple[int, float]:
    """Index and value of the best mean reward; ties go to the lowest index."""
    values = env.mean_rewards(action_set)
    i = int(np.argmax(values))
    return i, float(values[i])


def gap_from_values(values) -> float:
    distinct = np.unique(np.asarray(values, dtype=float))
    if distinct.size < 2:
        return float("inf")
    return float(distinct[-1] - distinct[-2])


def gap_of_set(env: LinearEnvironment, action_set: ActionSet) -> float:
    """Best mean reward minus the largest *different* mean reward.

    All copies of the maximum are removed before taking the runner-up, so a
    set whose values are all equal has gap ``inf``.
    """
    return gap_from_values(env.mean_rewards(action_set))
