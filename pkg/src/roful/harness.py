"""Deterministic simulation of linear-bandit policies with common random numbers.

Seeding
-------
Every random stream is a PCG64 generator seeded from
``SeedSequence(entropy=base_seed, spawn_key=(rep, role, *extra))`` with

* role 0: the parameter ``theta_star`` of repetition ``rep``;
* role 1: the action sets of repetition ``rep``;
* role 2: the reward noise of repetition ``rep`` (one draw per round, shared
  by all policies);
* role 3, extra ``crc32(policy label)``: the policy's internal randomness.

Roles 0-2 do not depend on the policies, so all policies of a repetition face
the same parameter, action sets and noise.
"""

from __future__ import annotations

import logging
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .analytics import RegretTrace
from .environment import (
    GroupStructure,
    LinearEnvironment,
    gap_from_values,
    gen_scenario_one,
    gen_scenario_two,
    sample_theta,
)
from .policies import Agent, PolicyConfig, PolicyKind, RadiusKind, RadiusParams

log = logging.getLogger(__name__)

ROLE_THETA = 0
ROLE_ACTIONS = 1
ROLE_NOISE = 2
ROLE_POLICY = 3


class ConfigError(ValueError):
    pass


def stream(base_seed: int, rep: int, role: int, *extra: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=base_seed, spawn_key=(rep, role, *extra))
    return np.random.Generator(np.random.PCG64(seq))


def policy_stream(base_seed: int, rep: int, label: str) -> np.random.Generator:
    return stream(base_seed, rep, ROLE_POLICY, zlib.crc32(label.encode("utf-8")))


def default_policies(alphas: Sequence[float] = (0.2, 0.5, 0.8), lam: float = 1.0, sigma: float = 1.0):
    pols = [
        PolicyConfig(PolicyKind.OFUL, lam=lam, sigma=sigma),
        PolicyConfig(PolicyKind.TS, lam=lam, sigma=sigma),
        PolicyConfig(PolicyKind.GREEDY, lam=lam, sigma=sigma),
    ]
    pols += [PolicyConfig(PolicyKind.SG, alpha=a, lam=lam, sigma=sigma) for a in alphas]
    return pols


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a scenario, a horizon, repetitions and a policy list.

    Scenario 1 embeds one shared context of dimension ``block_dim`` into each
    of ``k`` arm blocks (so ``n == k`` and ``d == k * block_dim``). Scenario 2
    draws ``n`` independent actions on the sphere in ``R^d``.
    """

    scenario: int = 1
    d: int = 120
    k: int = 10
    block_dim: int = 12
    n: int = 10
    horizon: int = 10_000
    reps: int = 50
    seed: int = 0
    policies: tuple[PolicyConfig, ...] = field(default_factory=lambda: tuple(default_policies()))
    sigma: float = 1.0
    lam: float = 1.0
    action_radius: float = 5.0
    theta_bound: float | None = None
    theta_star: tuple[float, ...] | None = None
    workers: int = 1
    out_csv: Path | None = None
    out_svg: Path | None = None
    out_trace: Path | None = None
    thin: int = 10

    def __post_init__(self):
        object.__setattr__(self, "policies", tuple(self.policies))
        self.validate()

    def validate(self) -> None:
        if self.scenario not in (1, 2):
            raise ConfigError(f"scenario must be 1 or 2, got {self.scenario}")
        if self.reps < 1:
            raise ConfigError(f"reps must be at least 1, got {self.reps}")
        if self.horizon < 2:
            raise ConfigError(f"horizon must be at least 2, got {self.horizon}")
        if min(self.d, self.n, self.k, self.block_dim) < 1:
            raise ConfigError("d, n, k and block_dim must be positive")
        if self.scenario == 1:
            if self.d != self.k * self.block_dim:
                raise ConfigError(f"scenario 1 needs d = k * block_dim, got d={self.d}, k={self.k}, block_dim={self.block_dim}")
            if self.n != self.k:
                raise ConfigError(f"scenario 1 has one arm per block, so n must equal k (n={self.n}, k={self.k})")
        if self.sigma <= 0 or self.lam <= 0 or self.action_radius <= 0:
            raise ConfigError("sigma, lambda and action radius must be positive")
        if self.theta_bound is not None and self.theta_bound <= 0:
            raise ConfigError("theta bound must be positive")
        if self.theta_star is not None and len(self.theta_star) != self.d:
            raise ConfigError(f"theta_star has length {len(self.theta_star)}, expected {self.d}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.thin < 1:
            raise ConfigError("thin must be at least 1")
        labels = [p.label for p in self.policies]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate policy labels: {labels}")
        for p in self.policies:
            if p.radius_kind is RadiusKind.ETA and self.scenario != 1 and p.radius_value is None:
                raise ConfigError("radius kind eta needs the grouped structure of scenario 1")

    @property
    def labels(self) -> list[str]:
        return [p.label for p in self.policies]

    @property
    def groups(self) -> GroupStructure | None:
        return GroupStructure(self.k, self.block_dim) if self.scenario == 1 else None

    def radius_params(self, policy: PolicyConfig | None = None) -> RadiusParams:
        return RadiusParams(
            d=self.d,
            T=self.horizon,
            a_bound=self.action_radius,
            sigma=self.sigma,
            lam=self.lam,
            theta_bound=self.theta_bound if self.theta_bound is not None else math.sqrt(self.d),
            n=self.n,
            k=self.k if self.scenario == 1 else 1,
            inflation=policy.inflation if policy is not None else 1.0,
        )

    def environment(self, rep: int) -> LinearEnvironment:
        if self.theta_star is not None:
            theta = np.asarray(self.theta_star, dtype=float)
        else:
            theta = sample_theta(stream(self.seed, rep, ROLE_THETA), self.d)
        return LinearEnvironment(theta, self.sigma, self.action_radius)

    def action_sets(self, rep: int):
        """Yield the ``horizon`` action sets of a repetition."""
        rng = stream(self.seed, rep, ROLE_ACTIONS)
        for t in range(1, self.horizon + 1):
            if self.scenario == 1:
                yield gen_scenario_one(rng, self.k, self.block_dim, self.action_radius, round=t)
            else:
                yield gen_scenario_two(rng, self.n, self.d, self.action_radius, round=t)


PRESETS = {
    "scenario1": dict(scenario=1, d=120, k=10, block_dim=12, n=10),
    "scenario2": dict(scenario=2, d=120, k=10, block_dim=12, n=10),
}


def preset(name: str, **overrides) -> ExperimentConfig:
    try:
        base = dict(PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    base.update(horizon=10_000, reps=50, sigma=1.0, lam=1.0, action_radius=5.0)
    base.update(overrides)
    return ExperimentConfig(**base)


def make_agent(config: ExperimentConfig, policy: PolicyConfig, rep: int) -> Agent:
    policy = replace(policy, lam=config.lam, sigma=config.sigma)
    radius = policy.radius(config.radius_params(policy))
    return Agent(policy, config.d, radius, policy_stream(config.seed, rep, policy.label))


def simulate_repetition(
    config: ExperimentConfig,
    rep: int,
    policies: Sequence[PolicyConfig] | None = None,
    record_states_every: int | None = None,
):
    """Run every policy on repetition ``rep`` in lockstep.

    Returns a list of :class:`RegretTrace`, one per policy. With
    ``record_states_every = m`` it also returns, per policy, copies of the
    posterior state at rounds ``0, m, 2m, ...``.
    """
    policies = list(config.policies if policies is None else policies)
    env = config.environment(rep)
    noise = stream(config.seed, rep, ROLE_NOISE)
    agents = [make_agent(config, p, rep) for p in policies]
    T = config.horizon
    s2 = config.sigma**2
    chosen = np.zeros((len(agents), T), dtype=np.int64)
    regret = np.zeros((len(agents), T))
    unc = np.zeros((len(agents), T))
    gaps = np.zeros(T)
    snapshots = [[] for _ in agents] if record_states_every else None
    if snapshots is not None:
        for j, ag in enumerate(agents):
            snapshots[j].append(ag.state.copy())

    for t, action_set in enumerate(config.action_sets(rep)):
        X = action_set.actions
        means = X @ env.theta_star
        best = means.max()
        gaps[t] = gap_from_values(means)
        eps = env.noise_sigma * noise.standard_normal()
        for j, ag in enumerate(agents):
            i = ag.choose(X)
            a = X[i]
            chosen[j, t] = i
            regret[j, t] = best - means[i]
            unc[j, t] = min(s2, max(float(a @ ag.state.cov @ a), 0.0))
            ag.observe(a, means[i] + eps)
        if snapshots is not None and (t + 1) % record_states_every == 0:
            for j, ag in enumerate(agents):
                snapshots[j].append(ag.state.copy())

    traces = [
        RegretTrace(p.label, chosen[j], regret[j], gaps.copy(), unc[j], rep)
        for j, p in enumerate(policies)
    ]
    if snapshots is not None:
        return traces, snapshots
    return traces


def run_episode(policy: PolicyConfig, config: ExperimentConfig, rep: int = 0) -> RegretTrace:
    """One policy on one repetition."""
    return simulate_repetition(config, rep, [policy])[0]


@dataclass
class AggregateResult:
    """Pointwise mean and sample standard deviation of cumulative regret."""

    labels: list[str]
    horizon: int
    reps: int
    mean: dict[str, np.ndarray]
    sd: dict[str, np.ndarray]
    final: dict[str, np.ndarray]
    traces: dict[str, list[RegretTrace]]

    def curves(self, label: str) -> np.ndarray:
        """``(reps, T)`` array of per-repetition cumulative regret."""
        return np.stack([tr.cumulative for tr in self.traces[label]])


class _Welford:
    def __init__(self, size: int):
        self.n = 0
        self.mean = np.zeros(size)
        self.m2 = np.zeros(size)

    def push(self, x: np.ndarray) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def sd(self) -> np.ndarray:
        if self.n < 2:
            return np.zeros_like(self.mean)
        return np.sqrt(np.maximum(self.m2 / (self.n - 1), 0.0))


def _run_rep(args):
    config, rep = args
    try:
        return rep, simulate_repetition(config, rep)
    except Exception as exc:
        raise RuntimeError(f"repetition {rep} (policies {', '.join(config.labels)}) failed: {exc}") from exc


def run_experiment(config: ExperimentConfig) -> AggregateResult:
    """All repetitions of all policies, aggregated in repetition order.

    Repetitions run in a process pool when ``config.workers > 1``; the result
    does not depend on the number of workers.
    """
    jobs = [(config, rep) for rep in range(config.reps)]
    if config.workers > 1 and config.reps > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_rep, jobs))
    else:
        results = []
        for job in jobs:
            results.append(_run_rep(job))
            log.info("repetition %d/%d done", job[1] + 1, config.reps)
    results.sort(key=lambda r: r[0])

    labels = config.labels
    acc = {lab: _Welford(config.horizon) for lab in labels}
    traces = {lab: [] for lab in labels}
    for rep, rep_traces in results:
        for tr in rep_traces:
            acc[tr.policy_label].push(tr.cumulative)
            traces[tr.policy_label].append(tr)
    return AggregateResult(
        labels=labels,
        horizon=config.horizon,
        reps=config.reps,
        mean={lab: acc[lab].mean for lab in labels},
        sd={lab: acc[lab].sd() for lab in labels},
        final={lab: np.array([tr.final_regret for tr in traces[lab]]) for lab in labels},
        traces=traces,
    )
