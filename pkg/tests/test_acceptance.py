"""Acceptance criteria 1-9. Each test prints one PASS/FAIL line, and the
terminal summary repeats them in criterion order."""

import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from roful.analytics import certificate_for_policy, chi2_tail_check, uncertainty_complexity_bound
from roful.cli import main
from roful.environment import gen_scenario_two, sample_theta
from roful.export import export_csv
from roful.harness import ExperimentConfig, make_agent, preset, run_experiment, simulate_repetition, stream
from roful.linalg import RidgeState, mahalanobis_sq, posterior_update, sample_posterior
from roful.policies import (
    PolicyConfig,
    PolicyKind,
    RadiusKind,
    confidence_bounds,
    confidence_radius,
    select_greedy,
    select_oful,
    select_sg,
    select_ts,
)

REPS = 20
HORIZON = 10_000


@pytest.fixture(scope="module")
def scenario_one():
    return run_experiment(preset("scenario1", horizon=HORIZON, reps=REPS))


@pytest.fixture(scope="module")
def scenario_two():
    return run_experiment(preset("scenario2", horizon=HORIZON, reps=REPS))


def final_stats(result):
    return {lab: (result.final[lab].mean(), result.final[lab].std(ddof=1)) for lab in result.labels}


def summary(s):
    return " ".join(f"{lab}={m:.0f}" for lab, (m, _) in s.items())


def test_criterion_1_scenario_one_ordering(scenario_one, record_criterion):
    s = final_stats(scenario_one)
    (ts, sd_ts), (sg, sd_sg), (greedy, _), (oful, _) = s["ts"], s["sg(0.5)"], s["greedy"], s["oful"]
    tol = 2 * (sd_ts + sd_sg) / math.sqrt(REPS)
    ok = greedy > 2 * ts and abs(sg - ts) < tol
    record_criterion(
        "criterion 1",
        ok,
        f"greedy/ts={greedy / ts:.2f} (>2) |sg(0.5)-ts|={abs(sg - ts):.1f} (<{tol:.1f}); oful={oful:.0f} | {summary(s)}",
    )


def test_criterion_2_scenario_two_ordering(scenario_two, record_criterion):
    s = final_stats(scenario_two)
    floor = min(s["oful"][0], s["ts"][0])
    worst_sg = max(s[f"sg({a:g})"][0] for a in (0.2, 0.5, 0.8))
    ok = worst_sg < floor and s["greedy"][0] < floor
    record_criterion(
        "criterion 2",
        ok,
        f"max sg={worst_sg:.0f} greedy={s['greedy'][0]:.0f} < min(oful, ts)={floor:.0f} | {summary(s)}",
    )


def test_criterion_3_elliptical_potential(record_criterion):
    rng = np.random.default_rng(2024)
    kinds = ["oful", "ts", "greedy", "sg"]
    worst = 0.0
    failures = 0
    for run in range(100):
        d = int(rng.integers(1, 21))
        T = int(rng.integers(2, 2001))
        n = int(rng.integers(1, 11))
        sigma = float(rng.choice([0.5, 1.0, 2.0]))
        lam = float(rng.choice([0.1, 1.0, 3.0]))
        radius = float(rng.uniform(0.5, 5.0))
        kind = kinds[run % 4]
        pol = PolicyConfig(kind, alpha=float(rng.choice([0.2, 0.5, 0.8])), inflation=float(rng.choice([0.5, 1.0, 2.0])))
        cfg = ExperimentConfig(
            scenario=2, d=d, n=n, horizon=T, reps=1, seed=run, sigma=sigma, lam=lam,
            action_radius=radius, policies=(pol,),
        )
        tr = simulate_repetition(cfg, 0)[0]
        total = float(tr.uncertainty.sum())
        bound = uncertainty_complexity_bound(d, T, radius, lam, sigma)
        worst = max(worst, total / bound)
        failures += not total <= bound
    record_criterion("criterion 3", failures == 0, f"violations={failures}/100 max sum_v/bound={worst:.4f}")


def test_criterion_4_policy_equivalences(record_criterion):
    rng = np.random.default_rng(77)
    mismatch = {"sg1=oful": 0, "sg0=greedy": 0, "ts0=greedy": 0}
    done = 0
    while done < 1000:
        d = int(rng.integers(2, 9))
        n = int(rng.integers(2, 9))
        s = RidgeState.fresh(d, float(rng.uniform(0.3, 3)), float(rng.uniform(0.5, 2)))
        for _ in range(int(rng.integers(0, 30))):
            posterior_update(s, rng.standard_normal(d), float(rng.standard_normal() * 2), in_place=True)
        X = rng.standard_normal((n, d))
        r = float(rng.uniform(0.1, 5))
        lo, hi = confidence_bounds(s, r, X)
        mu = X @ s.theta_hat
        if len(np.unique(hi)) < n or len(np.unique(mu)) < n:
            continue
        # a radius large enough that every upper bound clears the best lower bound
        w = np.sqrt(np.einsum("ij,ij->i", X @ s.cov, X))
        need = max((mu[j] - mu[i]) / (w[i] + w[j]) for i in range(n) for j in range(n))
        big = max(need, 0.0) * 2 + 1.0
        lo_b, hi_b = confidence_bounds(s, big, X)
        assert np.all(hi_b >= lo_b.max())
        mismatch["sg1=oful"] += select_sg(s, r, 1.0, X) != select_oful(s, r, X)
        mismatch["sg0=greedy"] += select_sg(s, big, 0.0, X) != select_greedy(s, X)
        mismatch["ts0=greedy"] += select_ts(s, 0.0, X, rng) != select_greedy(s, X)
        done += 1
    ok = not any(mismatch.values())
    record_criterion("criterion 4", ok, f"instances={done} mismatches={mismatch}")


def test_criterion_5_incremental_linear_algebra(record_criterion):
    rng = np.random.default_rng(5)
    cov_err = theta_err = 0.0
    for _ in range(500):
        d = int(rng.integers(1, 21))
        length = int(rng.integers(0, 201))
        lam, sigma = float(rng.uniform(0.2, 5)), float(rng.uniform(0.3, 3))
        X = rng.standard_normal((length, d)) * rng.uniform(0.2, 3)
        y = rng.standard_normal(length) * 2
        s = RidgeState.fresh(d, lam, sigma)
        for a, r in zip(X, y):
            posterior_update(s, a, r, in_place=True)
        gram = np.eye(d) / lam + X.T @ X / sigma**2
        cov_err = max(cov_err, float(np.abs(s.cov - np.linalg.inv(gram)).max()))
        ridge = np.linalg.solve(X.T @ X + (sigma**2 / lam) * np.eye(d), X.T @ y)
        theta_err = max(theta_err, float(np.abs(s.theta_hat - ridge).max()))
    ok = cov_err <= 1e-8 and theta_err <= 1e-8
    record_criterion("criterion 5", ok, f"max cov error={cov_err:.2e} max theta error={theta_err:.2e} (<=1e-8)")


def test_criterion_6_confidence_coverage(record_criterion):
    d, T, reps = 10, 500, 200
    cfg = ExperimentConfig(scenario=2, d=d, n=10, horizon=T, reps=reps, seed=6, policies=(PolicyConfig("oful"),))
    rho = confidence_radius(RadiusKind.RHO, cfg.radius_params())
    fails = 0
    for rep in range(reps):
        theta = sample_theta(stream(cfg.seed, rep, 0), d)
        noise = stream(cfg.seed, rep, 2)
        agent = make_agent(cfg, cfg.policies[0], rep)
        for action_set in cfg.action_sets(rep):
            X = action_set.actions
            lo, hi = confidence_bounds(agent.state, rho, X)
            truth = X @ theta
            fails += not bool(np.all((lo <= truth) & (truth <= hi)))
            i = agent.choose(X)
            agent.observe(X[i], float(truth[i] + noise.standard_normal()))
    rate = fails / (T * reps)
    record_criterion("criterion 6", rate < 0.005, f"rho={rho:.3f} failure rate={rate:.5f} ({fails}/{T * reps}, <0.005)")


def test_criterion_7_sampler_and_tails(record_criterion):
    rng = np.random.default_rng(7)
    d = 6
    s = RidgeState.fresh(d, 2.0, 0.8)
    for _ in range(25):
        posterior_update(s, rng.standard_normal(d), float(rng.standard_normal()), in_place=True)
    a = rng.standard_normal(d)
    iota = 1.7
    draws = sample_posterior(s, iota, rng, size=100_000) @ a
    scale = iota * math.sqrt(mahalanobis_sq(s, a))
    ks = stats.kstest(draws, "norm", args=(float(s.theta_hat @ a), scale))
    tails = {
        (dd, g): chi2_tail_check(dd, g, 1_000_000, np.random.default_rng(100 * dd + int(g)))
        for dd in (1, 10)
        for g in (1.0, 2.0, 5.0)
    }
    ok = ks.pvalue > 0.01 and all(t.passed for t in tails.values())
    detail = " ".join(f"(d={dd},g={g:g}):{t.empirical:.2e}<={t.bound:.2e}" for (dd, g), t in tails.items())
    record_criterion("criterion 7", ok, f"KS p={ks.pvalue:.3f} (>0.01); chi2 {detail}")


def test_criterion_8_certificates(scenario_one, scenario_two, record_criterion):
    lines, ok = [], True
    for name, cfg_name, result in (("I", "scenario1", scenario_one), ("II", "scenario2", scenario_two)):
        cfg = preset(cfg_name, horizon=HORIZON, reps=REPS)
        for pol in cfg.policies:
            if pol.kind is PolicyKind.GREEDY:
                continue
            cert = certificate_for_policy(pol, cfg.radius_params(pol))
            observed = float(result.mean[pol.label][-1])
            ok &= observed < cert.gap_independent_bound
            lines.append(f"{name}/{pol.label}={observed:.0f}<{cert.gap_independent_bound:.3g}")
    record_criterion("criterion 8", ok, " ".join(lines))


def test_criterion_9_determinism(tmp_path, record_criterion):
    cfgs = [
        ExperimentConfig(scenario=1, d=24, k=4, block_dim=6, n=4, horizon=600, reps=3, seed=11),
        ExperimentConfig(scenario=2, d=15, n=7, horizon=600, reps=3, seed=12),
    ]
    same = parallel = True
    for j, cfg in enumerate(cfgs):
        paths = [tmp_path / f"{j}-{tag}.csv" for tag in ("a", "b", "par")]
        export_csv(run_experiment(cfg), paths[0])
        export_csv(run_experiment(cfg), paths[1])
        export_csv(run_experiment(replace(cfg, workers=2)), paths[2])
        data = [p.read_bytes() for p in paths]
        same &= data[0] == data[1]
        parallel &= data[0] == data[2]
    argv = ["run", "--scenario", "2", "--d", "8", "--n", "5", "--horizon", "300", "--reps", "2", "--seed", "3"]
    cli = []
    for tag in ("x", "y"):
        out = tmp_path / f"cli-{tag}.csv"
        assert main([*argv, "--out-csv", str(out)]) == 0
        cli.append(out.read_bytes())
    same &= cli[0] == cli[1]
    record_criterion("criterion 9", same and parallel, f"repeat identical={same} parallel identical={parallel}")
