"""Experiment orchestration: games, bound checks, rate fits and serialization."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
import tempfile
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import adversary as adv
from . import geometry as geo
from . import losses as ls
from . import md_engine as md
from .complexity import FiniteClass, full_binary_class
from .experts_online import ewa_run

__all__ = [
    "ExperimentConfig", "ResultRow", "derive_seed", "trial_seeds", "run_regret_experiment", "fit_rate",
    "counterexample_experiment", "oracle_complexity_curve", "estimate_ro_stability", "StabilityEstimate",
    "rerm_excess_experiment", "block_sign_experiment", "emit", "rows_to_csv", "read_csv", "summarize",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ["experiment_id", "n", "trial", "seed", "metric_name", "observed", "bound", "margin",
               "runtime_ms"]


# ---------------------------------------------------------------- config and rows

@dataclass
class ExperimentConfig:
    kind: str = "regret"
    geometry: str = "euclidean"
    d: int | None = None  # 16 for games, 2^sample_n for the counterexample
    sample_n: int = 8
    radius: float = 1.0
    policy: str = "lipschitz"
    adversary: str = "linear_tree"
    n_grid: list = field(default_factory=lambda: [64, 256, 1024, 4096])
    trials: int = 10
    seed: int = 0
    seeds: list | None = None
    L_star: float = 0.0
    sigma: float = 1.0
    lam: float | None = None
    eps: float = 0.01
    m_grid: list = field(default_factory=lambda: [4, 16, 64])
    method: str = "md"
    alpha: float = 1.0
    class_kind: str = "full_binary"
    n_points: int = 4
    values: list | None = None
    rad_n: int = 2
    rule: str = "rerm"
    sampler: str = "abs_discrete"
    support: int = 20
    draws: int = 100_000
    max_scale: int = 6
    expert_cap: int = 100_000
    tolerance: float = 0.0
    timing: bool = False
    threads: int = 1
    out: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.seeds is not None and len(self.seeds) < self.trials:
            raise ValueError("seed list shorter than the trial count")
        for name in ("n_grid", "m_grid"):
            g = list(getattr(self, name))
            if not g or any(int(v) != v or v < 1 for v in g):
                raise ValueError(f"{name} must be a non-empty list of positive integers")
            if any(b <= a for a, b in zip(g, g[1:])):
                raise ValueError(f"{name} must be strictly increasing")
            setattr(self, name, [int(v) for v in g])
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @classmethod
    def keys(cls) -> set:
        return {f.name for f in dataclasses.fields(cls)}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        unknown = set(d) - cls.keys()
        if unknown:
            raise KeyError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class ResultRow:
    experiment_id: str
    n: int
    trial: int
    seed: int
    metric_name: str
    observed: float
    bound: float
    runtime_ms: float = 0.0
    bound_info: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        return self.bound - self.observed

    def as_record(self) -> dict:
        return {"experiment_id": self.experiment_id, "n": self.n, "trial": self.trial, "seed": self.seed,
                "metric_name": self.metric_name, "observed": self.observed, "bound": self.bound,
                "margin": self.margin, "runtime_ms": self.runtime_ms}


def derive_seed(master: int, i: int) -> int:
    """Counter-based child seed: a 64-bit word of SeedSequence([master, i])."""
    return int(np.random.SeedSequence([int(master), int(i)]).generate_state(1, np.uint64)[0])


def trial_seeds(cfg: ExperimentConfig) -> list[int]:
    if cfg.seeds is not None:
        return [int(s) for s in cfg.seeds[:cfg.trials]]
    return [derive_seed(cfg.seed, i) for i in range(cfg.trials)]


def _rng(seed: int, *extra) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, extra)]))


def _parallel(fn: Callable, tasks: list, threads: int) -> list:
    if threads <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda t: fn(*t), tasks))


def _clock(cfg: ExperimentConfig):
    t0 = time.perf_counter()
    return lambda: (time.perf_counter() - t0) * 1e3 if cfg.timing else 0.0


# ---------------------------------------------------------------- regret games

def _unit_rows(rng, k: int, d: int) -> np.ndarray:
    X = rng.standard_normal((k, d))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def _geometry(cfg: ExperimentConfig) -> geo.GeometrySpec:
    d = cfg.d or 16
    if cfg.geometry == "euclidean":
        return geo.euclidean(d, cfg.radius)
    if cfg.geometry == "entropic":
        return geo.entropic(d)
    raise ValueError(f"unknown geometry {cfg.geometry!r}")


_COMPATIBLE = {
    "lipschitz": {"linear_tree", "unit_inf", "zero"},
    "smooth": {"smoothed_realizable", "smoothed_noisy"},
    "ucvx": {"regularized_linear"},
}


def _check_combo(cfg: ExperimentConfig):
    if cfg.policy not in _COMPATIBLE:
        raise ValueError(f"unknown policy {cfg.policy!r}")
    if cfg.adversary not in _COMPATIBLE[cfg.policy]:
        raise ValueError(f"adversary {cfg.adversary!r} is incompatible with policy {cfg.policy!r}; "
                         f"choose one of {sorted(_COMPATIBLE[cfg.policy])}")
    if cfg.policy in ("smooth", "ucvx") and cfg.geometry != "euclidean":
        raise ValueError(f"policy {cfg.policy!r} is only wired for the euclidean geometry")
    if cfg.adversary == "unit_inf" and cfg.geometry != "entropic":
        raise ValueError("unit_inf losses need the entropic geometry (l_inf dual norm)")
    if cfg.policy == "ucvx" and not (cfg.lam or 0) > 0:
        raise ValueError("ucvx games need lam > 0")


def _stream(cfg: ExperimentConfig, g: geo.GeometrySpec, n: int, rng):
    """Returns (stream, comparator set or None)."""
    d = g.d
    if cfg.adversary == "linear_tree":
        u = adv.level_tree(_unit_rows(rng, n, d))
        return adv.linear_tree_stream(u, n, rng), None
    if cfg.adversary == "unit_inf":
        X = rng.choice(np.array([-1.0, 1.0]), size=(n, d))
        return [ls.Linear(x) for x in X], None
    if cfg.adversary == "zero":
        return [ls.Linear(np.zeros(d)) for _ in range(n)], None
    if cfg.adversary in ("smoothed_realizable", "smoothed_noisy"):
        h_star = 0.5 * cfg.radius * _unit_rows(rng, 1, d)[0]
        X = _unit_rows(rng, n, d)
        y = X @ h_star
        if cfg.adversary == "smoothed_noisy":
            # the planted point pays exactly 1/4 per round
            y = y + 0.5 * rng.choice(np.array([-1.0, 1.0]), size=n)
            return [ls.SmoothedAbs(x, v) for x, v in zip(X, y)], None
        return [ls.SmoothedAbs(x, v) for x, v in zip(X, y)], [h_star]
    if cfg.adversary == "regularized_linear":
        X = _unit_rows(rng, n, d)
        return [ls.Regularized(ls.Linear(x), cfg.lam) for x in X], None
    raise ValueError(f"unknown adversary {cfg.adversary!r}")


def _regret_trial(cfg: ExperimentConfig, g: geo.GeometrySpec, exp_id: str, n: int, trial: int, seed: int):
    clock = _clock(cfg)
    rng = _rng(seed, n)
    stream, comps = _stream(cfg, g, n, rng)
    sp = geo.sup_psi(g)
    if cfg.policy == "lipschitz":
        X = np.array([z.x for z in stream])
        B = max(float(np.max(np.linalg.norm(X, ord=g.dual_exponent, axis=1))), 1.0)
        trace = md.run_online_md(g, md.LipschitzRate(sp, n, B, g.p), stream, comps, seed=seed)
        bound = B * md.lipschitz_regret_bound(sp, n, g.q)
        info = {"lemma": "md-lipschitz", "sup_psi": sp, "B": B, "q": g.q}
    elif cfg.policy == "smooth":
        H = max(ls.smoothness_constant(z, g) for z in stream)
        L_star = 0.0 if cfg.adversary == "smoothed_realizable" else max(cfg.L_star, 0.25)
        pol = md.SmoothRate(sp, n, H, L_star, g.p)
        trace = md.run_online_md(g, pol, stream, comps, seed=seed)
        bound = md.smooth_regret_bound(sp, n, H, L_star, g.q)
        info = {"lemma": "md-smooth", "sup_psi": sp, "H": H, "L_star": L_star, "branch": pol.branch}
    else:
        trace = md.run_uniformly_convex_md(g, cfg.sigma, 2.0, stream, comparators=comps, seed=seed)
        R_sup = trace.metadata["R_sup"]
        bound = md.ucvx_regret_bound(n, cfg.sigma, 2.0, R_sup)
        info = {"lemma": "md-uniformly-convex", "sigma": cfg.sigma, "q_prime": 2.0, "R_sup": R_sup,
                "branch": trace.metadata["branch"]}
    info["comparator_method"] = trace.comparator_method
    return ResultRow(exp_id, n, trial, seed, "regret", trace.regret, bound, clock(), info)


def run_regret_experiment(cfg: ExperimentConfig) -> list[ResultRow]:
    """One row per (n, trial): learner regret against the adversary and the matching bound."""
    _check_combo(cfg)
    g = _geometry(cfg)
    exp_id = f"regret/{cfg.geometry}/{cfg.policy}/{cfg.adversary}"
    seeds = trial_seeds(cfg)
    tasks = [(cfg, g, exp_id, n, i, s) for n in cfg.n_grid for i, s in enumerate(seeds)]
    return _sorted(_parallel(_regret_trial, tasks, cfg.threads))


def fit_rate(rows: Sequence[ResultRow]) -> dict:
    """Least-squares slope of log(mean observed) against log(n)."""
    by_n: dict[int, list] = {}
    for r in rows:
        by_n.setdefault(r.n, []).append(r.observed)
    if len(by_n) < 3:
        raise ValueError("rate fitting needs at least 3 grid points")
    ns = np.array(sorted(by_n), dtype=float)
    ys = np.array([np.mean(by_n[int(n)]) for n in ns])
    if np.any(ys <= 0):
        raise ValueError("observed values must be positive to fit a log-log rate")
    x, y = np.log(ns), np.log(ys)
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ np.array([slope, icpt])
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss if ss > 0 else 1.0
    return {"exponent": float(slope), "intercept": float(icpt), "r2": r2}


# ---------------------------------------------------------------- hidden-coordinate counterexample

def counterexample_experiment(d: int | None = None, n: int = 8, trials: int = 200, seed: int = 0,
                              eps: float = 0.01, draws: int = 100_000, timing: bool = False):
    """ERM versus SGD on the biased hidden-coordinate distribution.

    Returns (summary dict, rows). Population risks are exact when the point
    has at most 16 non-zero coordinates and Monte Carlo otherwise; the method
    is recorded per row.
    """
    d = 2 ** n if d is None else d
    g = geo.euclidean(d, 1.0)
    L_star = adv.hidden_population_minimum(d, eps)
    sgd_bound = math.sqrt(2.0 * (1.0 + eps) / n)
    exp_id = f"counterexample/d={d}"
    rows, hits, erm_risks, subs = [], [], [], []
    for i in range(trials):
        s = derive_seed(seed, i)
        t0 = time.perf_counter()
        sample = adv.hidden_coordinate_stream(d, n, True, _rng(s, 0), eps)
        U = adv.unobserved_coordinates(sample)
        hits.append(bool(U.size))
        h_sgd = md.sgd_counterexample(sample)
        pr = adv.hidden_population_risk(h_sgd, eps, _rng(s, 1), draws)
        sub = pr.value - L_star
        subs.append(sub)
        ms = (time.perf_counter() - t0) * 1e3 if timing else 0.0
        rows.append(ResultRow(exp_id, n, i, s, "unobserved_coordinate", float(U.size > 0), 1.0 - math.exp(-1.0),
                              ms, {"unobserved": U.tolist()}))
        rows.append(ResultRow(exp_id, n, i, s, "sgd_suboptimality", sub, sgd_bound, ms,
                              {"method": pr.method, "mc_stderr": pr.stderr, "L_star": L_star}))
        if U.size:
            res = md.erm_solve(sample, g)
            pe = adv.hidden_population_risk(res.h, eps, _rng(s, 2), draws)
            erm_risks.append(pe.value)
            rows.append(ResultRow(exp_id, n, i, s, "erm_population_risk", pe.value, 0.5, ms,
                                  {"method": pe.method, "mc_stderr": pe.stderr, "solver": res.method}))
    subs = np.array(subs)
    summary = {
        "d": d, "n": n, "trials": trials, "eps": eps,
        "unobserved_frequency": float(np.mean(hits)),
        "erm_population_risk_mean": float(np.mean(erm_risks)) if erm_risks else math.nan,
        "erm_population_risk_min": float(np.min(erm_risks)) if erm_risks else math.nan,
        "erm_count": len(erm_risks),
        "sgd_suboptimality_mean": float(subs.mean()),
        "sgd_suboptimality_stderr": float(subs.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.nan,
        "sgd_bound": sgd_bound,
        "population_minimum": L_star,
    }
    return summary, _sorted(rows)


# ---------------------------------------------------------------- offline oracle complexity

def oracle_complexity_curve(method: str = "md", m_grid: Sequence[int] = (4, 16, 64), radius: float = 1.0,
                            seed: int = 0, timing: bool = False) -> list[ResultRow]:
    """Suboptimality after m queries against the resisting oracle and against a benign linear loss.

    Resisting rows carry the construction's floor R/sqrt(m) as ``bound`` (a
    lower bound, so a non-positive margin is the expected outcome); benign rows
    carry the MD upper bound 2 (sup Psi / m)^{1/2}.
    """
    rows = []
    for j, m in enumerate(m_grid):
        g = geo.euclidean(m, radius)
        t0 = time.perf_counter()
        oracle = adv.ResistingOracle(adv.orthonormal_pieces(m), m, seed=seed)
        out, _ = md.first_order_method(oracle, g, m, method)
        z = oracle.finalize()
        gap = ls.value(z, out) - adv.min_value(z, g)
        ms = (time.perf_counter() - t0) * 1e3 if timing else 0.0
        rows.append(ResultRow(f"oracle/{method}/resisting", m, 0, seed, "suboptimality", gap,
                              radius / math.sqrt(m), ms, {"kind": "lower", "signs": oracle.signs.tolist()}))
        t0 = time.perf_counter()
        x = _unit_rows(_rng(derive_seed(seed, j)), 1, m)[0]
        zb = ls.Linear(x)
        h = md.offline_optimize(zb, g, m)
        gap_b = ls.value(zb, h) - md.linear_minimizer(g, x)[0]
        ms = (time.perf_counter() - t0) * 1e3 if timing else 0.0
        rows.append(ResultRow("oracle/md/benign", m, 0, seed, "suboptimality", gap_b,
                              md.lipschitz_regret_bound(geo.sup_psi(g), m), ms, {"kind": "upper"}))
    return _sorted(rows)


# ---------------------------------------------------------------- stability

@dataclass
class StabilityEstimate:
    value: float
    stderr: float
    trials: int
    low_trials: bool


def estimate_ro_stability(rule: Callable, sampler: Callable, n: int, trials: int,
                          seed: int = 0) -> StabilityEstimate:
    """Monte-Carlo estimate of |(1/n) sum_i E[l(A(S^(i)); z'_i) - l(A(S); z'_i)]|.

    ``sampler(rng, k)`` returns k loss instances; ``rule(sample)`` returns a point.
    S^(i) is S with its i-th instance replaced by z'_i.
    """
    if trials < 1 or n < 1:
        raise ValueError("n and trials must be >= 1")
    low = trials < 30
    if low:
        warnings.warn("fewer than 30 trials: stderr is unreliable", RuntimeWarning, stacklevel=2)
    vals = np.empty(trials)
    for k in range(trials):
        rng = _rng(derive_seed(seed, k))
        S = list(sampler(rng, n))
        Sp = list(sampler(rng, n))
        h = np.asarray(rule(S))
        diffs = np.empty(n)
        for i in range(n):
            Si = S[:i] + [Sp[i]] + S[i + 1:]
            hi = np.asarray(rule(Si))
            diffs[i] = ls.value(Sp[i], hi) - ls.value(Sp[i], h)
        vals[k] = diffs.mean()
    se = float(vals.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.nan
    return StabilityEstimate(abs(float(vals.mean())), se, trials, low)


def discrete_abs_problem(support: int, d: int, seed: int = 0):
    """Uniform distribution over ``support`` absolute-loss instances with unit-norm x."""
    rng = _rng(seed, 7)
    X = _unit_rows(rng, support, d)
    y = rng.uniform(-1.0, 1.0, size=support)
    return [ls.AbsSupervised(x, v) for x, v in zip(X, y)]


def rerm_excess_experiment(n_grid: Sequence[int] = (128, 512), trials: int = 30, lam: float | None = None,
                           support: int = 20, d: int = 5, radius: float = 1.0, seed: int = 0,
                           timing: bool = False) -> list[ResultRow]:
    """Excess risk of regularized ERM on a discrete absolute-loss problem.

    With ``lam`` given the metric is the excess of the regularized population
    objective, bounded by 4 L^2 / (lam n) with L the Lipschitz constant of the
    regularized loss. With ``lam=None`` lambda = sqrt(16 L^2 / (B^2 n)) and the
    metric is the excess of the plain population risk over the ball, bounded by
    4 sqrt(L^2 B^2 / n) (1 + 8/n).
    """
    pts = discrete_abs_problem(support, d, seed)
    g = geo.euclidean(d, radius)
    L0 = max(ls.lipschitz_bound(z, g) for z in pts)
    pop = ls.BatchLoss(pts)
    rows = []
    for n in n_grid:
        if lam is None:
            lam_n = md.rerm_lambda(L0, radius, n)
            best = md.erm_solve(pts, g).objective
            bound = 4.0 * math.sqrt(L0 ** 2 * radius ** 2 / n) * (1.0 + 8.0 / n)
            metric, info = "excess_risk", {"lemma": "rerm-tuned", "lam": lam_n, "L": L0, "B": radius}
        else:
            lam_n = lam
            best = md.rerm_solve(pts, g, lam).objective
            L = L0 + lam * radius
            bound = 4.0 * L * L / (lam * n)
            metric, info = "regularized_excess_risk", {"lemma": "rerm-strongly-convex", "lam": lam, "L": L}
        for i in range(trials):
            s = derive_seed(seed, i)
            t0 = time.perf_counter()
            idx = _rng(s, n).integers(0, support, size=n)
            res = md.rerm_solve([pts[j] for j in idx], g, lam_n)
            risk = pop.value(res.h) + (0.5 * lam_n * float(res.h @ res.h) if lam is not None else 0.0)
            ms = (time.perf_counter() - t0) * 1e3 if timing else 0.0
            rows.append(ResultRow(f"rerm/{metric}", n, i, s, metric, risk - best, bound, ms,
                                  dict(info, solver=res.method)))
    return _sorted(rows)


# ---------------------------------------------------------------- block-sign lower bound

def block_sign_experiment(F: FiniteClass | None = None, alpha: float = 1.0, n: int = 64, trials: int = 500,
                          seed: int = 0, timing: bool = False):
    """EWA over the rows of F against the block-sign adversary.

    Regret is per round in absolute-loss units, with EWA's expected loss.
    Returns (summary with a 95% normal CI, rows).
    """
    F = full_binary_class(4) if F is None else F
    plan = adv.BlockAdversaryPlan.from_class(F, alpha, n)
    lb = plan.lower_bound()
    rows, regs = [], []
    for i in range(trials):
        s = derive_seed(seed, i)
        t0 = time.perf_counter()
        st = adv.block_sign_stream(plan, _rng(s))
        A = np.abs(F.values[:, st.xs] - st.ys[None, :])
        res = ewa_run(A.T / 2.0)
        reg = (2.0 * res.total - float(A.sum(axis=1).min())) / n
        regs.append(reg)
        ms = (time.perf_counter() - t0) * 1e3 if timing else 0.0
        rows.append(ResultRow(f"block_sign/d={plan.d}", n, i, s, "expected_regret", reg, lb, ms,
                              {"kind": "lower", "alpha": alpha, "d": plan.d, "k": plan.k}))
    regs = np.array(regs)
    m = float(regs.mean())
    se = float(regs.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.nan
    summary = {"mean_regret": m, "stderr": se, "ci95": [m - 1.96 * se, m + 1.96 * se],
               "lower_bound": lb, "d": plan.d, "n": n, "alpha": alpha, "trials": trials}
    return summary, _sorted(rows)


# ---------------------------------------------------------------- serialization

def _sorted(rows):
    return sorted(rows, key=lambda r: (r.experiment_id, r.n, r.trial))


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def rows_to_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in _sorted(rows):
        rec = r.as_record()
        w.writerow([_fmt(rec[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    return o


def rows_to_json(rows: Sequence[ResultRow], config: dict | None = None, extra: dict | None = None) -> str:
    from . import __version__
    recs = []
    for r in _sorted(rows):
        rec = r.as_record()
        rec["bound_info"] = r.bound_info
        recs.append(rec)
    doc = {"version": __version__, "config": config or {}, "rows": recs}
    if extra:
        doc.update(extra)
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def atomic_write(path: str, text: str):
    path = os.path.abspath(path)
    d = os.path.dirname(path)
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(rows: Sequence[ResultRow], path: str, format: str = "csv", config: dict | None = None,
         extra: dict | None = None) -> str:
    """Write rows as CSV or JSON (temp file + rename); returns the path."""
    if format == "csv":
        text = rows_to_csv(rows)
    elif format == "json":
        text = rows_to_json(rows, config, extra)
    else:
        raise ValueError(f"unknown format {format!r}")
    atomic_write(path, text)
    return path


def read_csv(path: str) -> list[ResultRow]:
    out = []
    with open(path, newline="", encoding="utf-8") as f:
        for rec in csv.DictReader(f):
            out.append(ResultRow(rec["experiment_id"], int(rec["n"]), int(rec["trial"]), int(rec["seed"]),
                                 rec["metric_name"], float(rec["observed"]), float(rec["bound"]),
                                 float(rec["runtime_ms"])))
    return out


def summarize(rows: Sequence[ResultRow], tolerance: float = 0.0) -> dict:
    """Counts of upper-bound violations (margin < -tolerance) per experiment."""
    out: dict = {}
    for r in rows:
        s = out.setdefault(r.experiment_id, {"rows": 0, "violations": 0, "min_margin": None})
        s["rows"] += 1
        if r.bound_info.get("kind") == "lower":
            continue
        s["min_margin"] = r.margin if s["min_margin"] is None else min(s["min_margin"], r.margin)
        if r.margin < -tolerance:
            s["violations"] += 1
    return out
