"""Command-line entry point: ``devicedr <command> [flags]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .claims import NonCompliantError, verify_claims
from .config import load_model
from .env import DeviceEnv, RngStream
from .experiments import gamma_range, load_sweep_config, run_sweep
from .learning import LearnerConfig, learn
from .metrics import baseline_policy, decompose_value, policy_value
from .model import InvalidModelError
from .solver import (
    greedy,
    policy_q,
    save_table,
    stationary_distribution,
    value_iteration,
)

log = logging.getLogger("devicedr")


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return v


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _gamma_grid(text: str) -> list[float]:
    """``start:stop:step`` (inclusive) or a comma-separated list."""
    try:
        if ":" in text:
            start, stop, step = (float(t) for t in text.split(":"))
            return gamma_range(start, stop, step)
        return [float(t) for t in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad gamma grid {text!r}: {exc}") from None


def _existing(text: str) -> Path:
    p = Path(text)
    if not p.is_file():
        raise argparse.ArgumentTypeError(f"no such file: {text}")
    return p


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_solve(args) -> int:
    model = load_model(args.config)
    res = value_iteration(model, tol=args.tol)
    mu = greedy(res.q)
    out = _out_dir(args)
    save_table(out / "q_star.txt", res.q)
    save_table(out / "policy.txt", mu)
    print(f"V*        {policy_value(model, mu, args.tol):.10g}")
    print(f"residual  {res.residual:.3e}")
    print(f"sweeps    {res.iterations}")
    return 0 if res.residual <= args.tol else 1


def cmd_baseline(args) -> int:
    model = load_model(args.config)
    mu = baseline_policy(model)
    dec = decompose_value(model, mu, args.tol)
    print(f"V_base    {policy_value(model, mu, args.tol):.10g}")
    print(f"bill      {dec.a_mu:.10g}")
    print(f"dissat    {dec.b_mu:.10g}")
    if args.out:
        out = _out_dir(args)
        save_table(out / "baseline_policy.txt", mu)
        save_table(out / "baseline_q.txt", policy_q(model, mu, args.tol))
    return 0


def cmd_learn(args) -> int:
    model = load_model(args.config)
    learner = load_sweep_config(args.sweep).learner if args.sweep else LearnerConfig()
    episode_log = open(args.episode_log, "w") if args.episode_log else None
    try:
        res = learn(DeviceEnv(model), learner, RngStream(args.seed), episode_log=episode_log)
    finally:
        if episode_log is not None:
            episode_log.close()
    if args.out:
        save_table(_out_dir(args) / "q_learned.txt", res.q)
    print(f"discounted_cost  {res.discounted_cost:.10g}")
    print(f"steps            {res.steps}")
    print(f"tail_bound       {res.tail_bound:.3e}")
    return 0


def cmd_sweep(args) -> int:
    model = load_model(args.config)
    cfg = load_sweep_config(args.sweep)
    overrides = {}
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.out:
        overrides["output_path"] = args.out
    if overrides:
        from dataclasses import replace
        cfg = replace(cfg, **overrides)
    reports = run_sweep(model, cfg, workers=args.workers, tol=args.tol)
    failed = [r for r in reports if r.error]
    print(f"wrote {len(reports)} rows to {cfg.output_path}", file=sys.stderr)
    return 1 if failed else 0


def cmd_check_theorem1(args) -> int:
    model = load_model(args.config)
    if not model.theorem1_compliant:
        print("refusing: instance does not declare theorem1_compliant", file=sys.stderr)
        return 1
    try:
        results = verify_claims(model, args.gamma_grid, tol=args.tol)
    except NonCompliantError as exc:
        print(f"refusing: {exc}", file=sys.stderr)
        return 1
    for r in results:
        print(f"claim {r.claim}: {'PASS' if r.passed else 'FAIL'}  {r.detail}")
    return 0 if all(r.passed for r in results) else 1


def cmd_stationary(args) -> int:
    model = load_model(args.config)
    pi = stationary_distribution(model.price_chain)
    for price, p in zip(model.price_chain.prices, pi):
        print(f"{price:g}\t{p:.12g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="devicedr", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=_existing, required=True, help="instance JSON file")
        p.add_argument("--tol", type=_positive_float, default=1e-9, help="Bellman residual tolerance")
        p.set_defaults(func=func)
        return p

    p = add("solve", cmd_solve, "value iteration; writes q_star.txt and policy.txt")
    p.add_argument("--out", help="output directory")
    p = add("baseline", cmd_baseline, "evaluate the baseline policy")
    p.add_argument("--out", help="output directory")
    p = add("learn", cmd_learn, "one Q-learning run")
    p.add_argument("--sweep", type=_existing, help="sweep JSON whose 'learner' section is used")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", help="output directory for q_learned.txt")
    p.add_argument("--episode-log", help="per-episode CSV log")
    p = add("sweep", cmd_sweep, "gamma sweep of RDRP and RI to CSV")
    p.add_argument("--sweep", type=_existing, required=True, help="sweep JSON file")
    p.add_argument("--seed", type=_seed, default=None, help="overrides base_seed")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: CPU count)")
    p.add_argument("--out", help="CSV path (overrides output_path)")
    p = add("check-theorem1", cmd_check_theorem1, "verify the baseline/potential claims")
    p.add_argument("--gamma-grid", type=_gamma_grid, default=gamma_range(0.0, 10.0, 0.25),
                   help="start:stop:step or comma list (default 0:10:0.25)")
    add("stationary", cmd_stationary, "stationary distribution of the price chain")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose or args.command == "sweep" else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except InvalidModelError as exc:
        print(f"invalid instance {args.config}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
