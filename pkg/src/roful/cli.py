"""Command-line entry point: ``roful run | bounds | diagnose``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import analytics
from .export import export_csv, read_traces, render_plot_svg, write_traces
from .harness import PRESETS, ConfigError, ExperimentConfig, preset, simulate_repetition
from .policies import PolicyConfig, PolicyKind, RadiusKind, RadiusParams, confidence_radius

DEFAULT_ALPHAS = (0.2, 0.5, 0.8)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _add_model_flags(p, run: bool):
    p.add_argument("--scenario", type=int, choices=(1, 2))
    p.add_argument("--d", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--block-dim", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--action-radius", type=float)
    p.add_argument("--theta-bound", type=float)
    p.add_argument("--policy", action="append", choices=[k.value for k in PolicyKind])
    p.add_argument("--alpha", action="append", type=float)
    p.add_argument("--inflation", type=float)
    p.add_argument("--radius-kind", choices=[k.value for k in RadiusKind])
    p.add_argument("--radius-value", type=float)
    if run:
        p.add_argument("--config", type=Path, help="JSON file with the same keys as the flags")
        p.add_argument("--reps", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--out-csv", type=Path)
        p.add_argument("--out-svg", type=Path)
        p.add_argument("--out-trace", type=Path)
        p.add_argument("--thin", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="roful", description="Linear bandit simulations and regret certificates.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run an experiment")
    _add_model_flags(run, run=True)
    run.add_argument("-v", "--verbose", action="store_true")

    bounds = sub.add_parser("bounds", help="print regret certificates")
    _add_model_flags(bounds, run=False)
    bounds.add_argument("--delta", type=float)
    bounds.add_argument("--q-delta", type=float, default=1.0)

    diag = sub.add_parser("diagnose", help="gap, margin and expansion diagnostics of a trace file")
    diag.add_argument("trace", type=Path)
    diag.add_argument("--delta", type=float)
    diag.add_argument("--expansion", action="store_true", help="replay episodes to trace the covariance")
    diag.add_argument("--every", type=_positive_int, default=100)
    return parser


_FILE_KEYS = {
    "scenario", "d", "k", "n", "block_dim", "horizon", "sigma", "lam", "lambda", "action_radius",
    "theta_bound", "policy", "alpha", "inflation", "radius_kind", "radius_value", "reps", "seed",
    "workers", "out_csv", "out_svg", "out_trace", "thin",
}


def _merge_file(args) -> None:
    path = getattr(args, "config", None)
    if path is None:
        return
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    unknown = sorted(set(data) - _FILE_KEYS)
    if unknown:
        raise ConfigError(f"unknown config key(s) in {path}: {', '.join(unknown)}")
    for key, value in data.items():
        attr = "lam" if key == "lambda" else key
        if attr in ("policy", "alpha") and not isinstance(value, list):
            value = [value]
        if attr.startswith("out_") and value is not None:
            value = Path(value)
        if getattr(args, attr, None) is None:
            setattr(args, attr, value)


def _policies(args, lam: float, sigma: float) -> tuple[PolicyConfig, ...]:
    kinds = args.policy or ["oful", "ts", "greedy", "sg"]
    alphas = args.alpha or list(DEFAULT_ALPHAS)
    common = dict(lam=lam, sigma=sigma)
    if args.radius_kind is not None:
        common["radius_kind"] = RadiusKind(args.radius_kind)
    if args.radius_value is not None:
        common["radius_value"] = args.radius_value
    out = []
    for kind in dict.fromkeys(kinds):
        if kind == "sg":
            out += [PolicyConfig(PolicyKind.SG, alpha=a, **common) for a in alphas]
        elif kind == "ts":
            out.append(PolicyConfig(PolicyKind.TS, inflation=1.0 if args.inflation is None else args.inflation, **common))
        else:
            out.append(PolicyConfig(PolicyKind(kind), **common))
    return tuple(out)


def _dimensions(args) -> dict:
    scenario = args.scenario or 1
    base = PRESETS[f"scenario{scenario}"]
    if scenario == 1:
        k = args.k or base["k"]
        n = args.n or k
        if args.block_dim:
            block_dim = args.block_dim
        elif args.d:
            if args.d % k:
                raise ConfigError(f"scenario 1 needs d divisible by k (d={args.d}, k={k})")
            block_dim = args.d // k
        else:
            block_dim = base["block_dim"]
        d = args.d or k * block_dim
    else:
        d, n = args.d or base["d"], args.n or base["n"]
        k, block_dim = args.k or base["k"], args.block_dim or base["block_dim"]
    return dict(scenario=scenario, d=d, k=k, n=n, block_dim=block_dim)


def parse_config(argv=None) -> ExperimentConfig:
    """Build the experiment of ``roful run`` from flags (and ``--config``).

    Defaults are the published settings: d = 120, n = 10, T = 10000,
    50 repetitions, sigma = lambda = 1, actions on the sphere of radius 5.
    """
    args = build_parser().parse_args(["run", *(argv or [])])
    return _config_from_args(args)


def _config_from_args(args) -> ExperimentConfig:
    _merge_file(args)
    try:
        dims = _dimensions(args)
        sigma = 1.0 if args.sigma is None else args.sigma
        lam = 1.0 if args.lam is None else args.lam
        overrides = dict(
            dims,
            horizon=10_000 if args.horizon is None else args.horizon,
            reps=50 if args.reps is None else args.reps,
            seed=0 if args.seed is None else args.seed,
            sigma=sigma,
            lam=lam,
            action_radius=5.0 if args.action_radius is None else args.action_radius,
            theta_bound=args.theta_bound,
            workers=1 if args.workers is None else args.workers,
            out_csv=args.out_csv,
            out_svg=args.out_svg,
            out_trace=args.out_trace,
            thin=10 if args.thin is None else args.thin,
            policies=_policies(args, lam, sigma),
        )
        return preset(f"scenario{dims['scenario']}", **overrides)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _cmd_run(args) -> int:
    from .harness import run_experiment

    config = _config_from_args(args)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    result = run_experiment(config)
    for label in result.labels:
        fin = result.final[label]
        print(f"{label:>10s}  mean={fin.mean():.6g}  sd={fin.std(ddof=1) if fin.size > 1 else 0.0:.6g}")
    if config.out_csv:
        export_csv(result, config.out_csv, thin=config.thin)
    if config.out_svg:
        render_plot_svg(result, config.out_svg)
    if config.out_trace:
        write_traces(result, config.out_trace, config=config_to_dict(config))
    return 0


def config_to_dict(config: ExperimentConfig) -> dict:
    d = dataclasses.asdict(config)
    d["policies"] = [
        {**dataclasses.asdict(p), "kind": p.kind.value, "radius_kind": p.radius_kind.value} for p in config.policies
    ]
    for key in ("out_csv", "out_svg", "out_trace"):
        d[key] = None if d[key] is None else str(d[key])
    if d["theta_star"] is not None:
        d["theta_star"] = list(d["theta_star"])
    return d


def config_from_dict(d: dict) -> ExperimentConfig:
    d = dict(d)
    d["policies"] = tuple(PolicyConfig(**p) for p in d["policies"])
    if d.get("theta_star") is not None:
        d["theta_star"] = tuple(d["theta_star"])
    for key in ("out_csv", "out_svg", "out_trace"):
        d[key] = None if d.get(key) is None else Path(d[key])
    return ExperimentConfig(**d)


def _cmd_bounds(args) -> int:
    dims = _dimensions(args)
    sigma = 1.0 if args.sigma is None else args.sigma
    lam = 1.0 if args.lam is None else args.lam
    T = 10_000 if args.horizon is None else args.horizon
    a_bound = 5.0 if args.action_radius is None else args.action_radius
    theta = args.theta_bound if args.theta_bound is not None else math.sqrt(dims["d"])
    k = dims["k"] if dims["scenario"] == 1 else 1
    for policy in _policies(args, lam, sigma):
        params = RadiusParams(
            d=dims["d"], T=T, a_bound=a_bound, sigma=sigma, lam=lam, theta_bound=theta,
            n=dims["n"], k=k, inflation=policy.inflation,
        )
        cert = analytics.certificate_for_policy(policy, params, args.delta, args.q_delta)
        if cert is None:
            print(f"{policy.label}: no certificate (no optimism guarantee)")
            continue
        print(
            f"{policy.label}: radius={policy.radius(params):.6g} K={cert.K:.6g} p={cert.p:.6g} D={cert.D:.6g} "
            f"delta={cert.delta:.6g} q_delta={cert.q_delta:.6g} "
            f"gap_dependent={cert.gap_dependent_bound:.6g} gap_independent={cert.gap_independent_bound:.6g}"
        )
    params = RadiusParams(d=dims["d"], T=T, a_bound=a_bound, sigma=sigma, lam=lam, theta_bound=theta, n=dims["n"], k=k)
    radii = {kind.value: confidence_radius(kind, params) for kind in RadiusKind if kind is not RadiusKind.ETA or k > 1}
    print("radii: " + " ".join(f"{name}={val:.6g}" for name, val in radii.items()))
    K0 = analytics.uncertainty_complexity_bound(dims["d"], T, a_bound, lam, sigma)
    print(f"uncertainty complexity bound: {K0:.6g}")
    return 0


def _cmd_diagnose(args) -> int:
    config_dict, traces = read_traces(args.trace)
    if not traces:
        raise ConfigError(f"no trace records in {args.trace}")
    by_label: dict[str, list] = {}
    for tr in traces:
        by_label.setdefault(tr.policy_label, []).append(tr)
    config = config_from_dict(config_dict) if config_dict else None

    all_gaps = np.concatenate([tr.gap for tr in traces if tr.policy_label == traces[0].policy_label])
    fit = analytics.fit_margin_constant(all_gaps, args.delta)
    print(f"margin: delta={fit.delta:.6g} q_delta={analytics.empirical_margin(all_gaps, fit.delta):.6g} c0={fit.c0:.6g}")

    for label, trs in by_label.items():
        finals = np.array([tr.final_regret for tr in trs])
        line = f"{label}: reps={len(trs)} mean_regret={finals.mean():.6g}"
        if config is not None:
            bound = analytics.uncertainty_complexity_bound(
                config.d, trs[0].horizon, config.action_radius, config.lam, config.sigma
            )
            worst = max(float(tr.uncertainty.sum()) for tr in trs)
            line += f" max_sum_v={worst:.6g} complexity_bound={bound:.6g}"
        print(line)

    if args.expansion:
        if config is None:
            raise ConfigError("trace file has no config header; cannot replay for --expansion")
        reps = sorted({tr.rep for tr in traces})
        for rep in reps:
            _, snaps = simulate_repetition(config, rep, record_states_every=args.every)
            for policy, states in zip(config.policies, snaps):
                exp = analytics.linear_expansion_trace(states, config.groups)
                print(f"expansion rep={rep} {policy.label}: c2={exp.c2:.6g} final_norm={exp.values[-1]:.6g}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "bounds":
            return _cmd_bounds(args)
        return _cmd_diagnose(args)
    except (ConfigError, OSError) as exc:
        print(f"roful: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
