"""Command-line driver: ``mdlearn <subcommand> [--config PATH] [--set key=value ...]``.

Exit codes: 0 success, 1 experiment error, 2 usage error, 3 capacity cap exceeded.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import harness as hs
from . import md_engine as md
from . import adversary as adv
from . import geometry as geo
from . import complexity as cx
from .errors import CapacityError
from .experts_online import agnostic_supervised_run

SUBCOMMANDS = ("regret", "counterexample", "oracle-lb", "complexity", "experts", "stability")
U64 = 2 ** 64


class UsageError(Exception):
    pass


def _u64(s: str) -> int:
    try:
        v = int(s, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an unsigned 64-bit integer: {s!r}")
    if not 0 <= v < U64:
        raise argparse.ArgumentTypeError(f"seed out of range: {s}")
    return v


def _positive(s: str) -> int:
    try:
        v = int(s, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}")
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mdlearn", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    sub.required = True
    helps = {
        "regret": "online mirror descent against an adversarial stream, with bounds",
        "counterexample": "ERM versus SGD on the hidden-coordinate distribution",
        "oracle-lb": "first-order methods against the resisting oracle",
        "complexity": "exact complexity measures of a finite class",
        "experts": "agnostic online learning with generated experts",
        "stability": "Monte-Carlo average replace-one stability of a learning rule",
    }
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, help=helps[name], description=helps[name])
        sp.add_argument("--config", metavar="PATH", help="flat JSON object of config keys")
        sp.add_argument("--out", metavar="PATH", help="output file (.csv or .json)")
        sp.add_argument("--seed", type=_u64, metavar="U64", help="master seed")
        sp.add_argument("--trials", type=_positive, metavar="N")
        sp.add_argument("--threads", type=_positive, metavar="N")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", dest="overrides",
                        help="override a config key (repeatable); VALUE is parsed as JSON when possible")
    return p


def _parse_value(v: str):
    try:
        return json.loads(v)
    except json.JSONDecodeError:
        return v


def resolve_config(args) -> hs.ExperimentConfig:
    cfg: dict = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as f:
                cfg = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config {args.config}: {e}")
        if not isinstance(cfg, dict):
            raise UsageError("config must be a flat JSON object")
    for item in args.overrides:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        cfg[k.strip()] = _parse_value(v)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.trials is not None:
        cfg["trials"] = args.trials
    if args.threads is not None:
        cfg["threads"] = args.threads
    elif "threads" not in cfg and os.environ.get("THREADS", "").isdigit():
        cfg["threads"] = max(1, int(os.environ["THREADS"]))
    if args.out is not None:
        cfg["out"] = args.out
    cfg["kind"] = args.subcommand
    unknown = set(cfg) - hs.ExperimentConfig.keys()
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    try:
        return hs.ExperimentConfig.from_dict(cfg)
    except (TypeError, ValueError) as e:
        raise UsageError(f"invalid config: {e}")


def parse(argv=None):
    """Returns (namespace, resolved config); raises SystemExit(2) on usage errors."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args, resolve_config(args)
    except UsageError as e:
        parser.error(str(e))


# ---------------------------------------------------------------- subcommands

def _finite_class(cfg: hs.ExperimentConfig) -> cx.FiniteClass:
    if cfg.class_kind == "full_binary":
        return cx.full_binary_class(cfg.n_points)
    if cfg.class_kind == "constants":
        return cx.FiniteClass(np.array([[1.0] * cfg.n_points, [-1.0] * cfg.n_points]))
    if cfg.class_kind == "values":
        if cfg.values is None:
            raise ValueError("class_kind 'values' needs a 'values' matrix")
        return cx.FiniteClass(np.array(cfg.values, dtype=float))
    raise ValueError(f"unknown class_kind {cfg.class_kind!r}")


def _run_regret(cfg):
    rows = hs.run_regret_experiment(cfg)
    summary = {"bounds": hs.summarize(rows, cfg.tolerance)}
    if len(cfg.n_grid) >= 3:
        summary["rate"] = hs.fit_rate(rows)
    return rows, summary


def _run_counterexample(cfg):
    summary, rows = hs.counterexample_experiment(d=cfg.d, n=cfg.sample_n, trials=cfg.trials,
                                                 seed=cfg.seed, eps=cfg.eps,
                                                 draws=cfg.draws, timing=cfg.timing)
    return rows, summary


def _run_oracle(cfg):
    rows = hs.oracle_complexity_curve(cfg.method, cfg.m_grid, cfg.radius, cfg.seed, cfg.timing)
    return rows, {"bounds": hs.summarize(rows, cfg.tolerance)}


def _run_complexity(cfg):
    F = _finite_class(cfg)
    out = {"class_size": F.size, "n_points": F.n_points, "alpha": cfg.alpha}
    sf = cx.seq_fat(F, cfg.alpha)
    out["seq_fat"] = sf.value
    out["seq_fat_saturated"] = sf.saturated
    out["stat_fat"] = cx.stat_fat(F, cfg.alpha).value
    if F.is_binary():
        out["littlestone"] = cx.littlestone_dim(F).value
    out["stat_rademacher"] = cx.stat_rademacher(F, list(range(F.n_points)))
    out["seq_rademacher"] = cx.seq_rademacher(F, cfg.rad_n).value
    out["seq_rademacher_n"] = cfg.rad_n
    return [], out


def _run_experts(cfg):
    F = _finite_class(cfg)
    n = cfg.n_grid[0]
    rows = []
    for i, s in enumerate(hs.trial_seeds(cfg)):
        rng = np.random.default_rng(s)
        stream = [(int(rng.integers(F.n_points)), float(rng.choice([-1.0, 1.0]))) for _ in range(n)]
        res = agnostic_supervised_run(F, stream, n, max_scale=cfg.max_scale, cap=cfg.expert_cap)
        rows.append(hs.ResultRow("experts/agnostic", n, i, s, "expected_regret", res.regret, res.bound, 0.0,
                                 {"bound_alpha": res.bound_alpha, "frozen_events": res.frozen_events,
                                  "scales": res.scales}))
    return rows, {"bounds": hs.summarize(rows, cfg.tolerance)}


_RULES = {
    "erm": lambda g, lam: (lambda S: md.erm_solve(S, g).h),
    "rerm": lambda g, lam: (lambda S: md.rerm_solve(S, g, lam).h),
    "sgd": lambda g, lam: (lambda S: md.sgd_counterexample(S, g.constraint.radius)),
    "constant": lambda g, lam: (lambda S: np.zeros(g.d)),
}


def _run_stability(cfg):
    n = cfg.sample_n
    if cfg.sampler == "abs_discrete":
        d = cfg.d or 5
        pts = hs.discrete_abs_problem(cfg.support, d, cfg.seed)
        sampler = lambda rng, k: [pts[j] for j in rng.integers(0, len(pts), size=k)]
    elif cfg.sampler == "hidden_biased":
        d = cfg.d or 256
        sampler = lambda rng, k: adv.hidden_coordinate_stream(d, k, True, rng, cfg.eps)
    else:
        raise ValueError(f"unknown sampler {cfg.sampler!r}")
    if cfg.rule not in _RULES:
        raise ValueError(f"unknown rule {cfg.rule!r}; choose one of {sorted(_RULES)}")
    g = geo.euclidean(d, cfg.radius)
    lam = cfg.lam if cfg.lam is not None else 0.1
    est = hs.estimate_ro_stability(_RULES[cfg.rule](g, lam), sampler, n, cfg.trials, cfg.seed)
    out = {"rule": cfg.rule, "n": n, "estimate": est.value, "stderr": est.stderr, "trials": est.trials,
           "low_trials_warning": est.low_trials}
    if cfg.rule == "rerm" and cfg.sampler == "abs_discrete":
        L = 1.0 + lam * cfg.radius
        out["stability_bound"] = 4.0 * L * L / (lam * n)
    return [], out


DISPATCH = {
    "regret": _run_regret,
    "counterexample": _run_counterexample,
    "oracle-lb": _run_oracle,
    "complexity": _run_complexity,
    "experts": _run_experts,
    "stability": _run_stability,
}


def _write(cfg: hs.ExperimentConfig, rows, summary):
    config = cfg.to_dict()
    if cfg.out:
        if cfg.out.endswith(".json") or not rows:
            hs.atomic_write(cfg.out, hs.rows_to_json(rows, config, {"summary": summary}))
        else:
            hs.emit(rows, cfg.out, "csv")
    text = json.dumps(hs._jsonable({"kind": cfg.kind, "summary": summary}), sort_keys=True)
    sys.stdout.write(text + "\n")


def dispatch(cfg: hs.ExperimentConfig) -> int:
    try:
        rows, summary = DISPATCH[cfg.kind](cfg)
        _write(cfg, rows, summary)
    except CapacityError as e:
        print(f"mdlearn: {e}", file=sys.stderr)
        return 3
    except Exception as e:  # experiment failure
        print(f"mdlearn: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    try:
        _, cfg = parse(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else 2
    return dispatch(cfg)


if __name__ == "__main__":
    sys.exit(main())
