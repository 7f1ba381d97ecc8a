"""Mirror descent: online, averaged, offline, uniformly-convex, plus baselines.

The update is

    h'_{t+1} = grad_psi_star(grad_psi(h_t) - eta * g_t)
    h_{t+1}  = Bregman projection of h'_{t+1} onto the constraint set,

started at h_1 = argmin Psi. Step-size rules and the matching regret bounds
are exposed as plain functions so experiments can audit them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy.optimize import brentq, minimize
from scipy.special import expit

from . import geometry as geo
from . import losses as ls
from .constants import TOL
from .errors import DomainError

# ---------------------------------------------------------------- step sizes


def _positive(**kw):
    for k, v in kw.items():
        if not (v > 0):
            raise ValueError(f"{k} must be positive, got {v}")


def step_size_lipschitz(sup_psi: float, n: int, B: float = 1.0, p: float = 2.0) -> float:
    """eta = (sup Psi / (n B))^{1/p}."""
    _positive(sup_psi=sup_psi, n=n, B=B)
    if not 1 < p <= 2:
        raise ValueError("p must lie in (1, 2]")
    return (sup_psi / (n * B)) ** (1.0 / p)


def smooth_threshold(sup_psi: float, n: int, H: float, p: float = 2.0) -> float:
    """Smallest comparator loss for which the large-loss step size is used."""
    q = p / (p - 1.0)
    return 16.0 * H / p ** (2.0 / p) * (sup_psi / n) ** (2.0 / q)


def smooth_branch(sup_psi: float, n: int, H: float, L_star: float, p: float = 2.0) -> int:
    return 1 if L_star >= smooth_threshold(sup_psi, n, H, p) else 2


def step_size_smooth(sup_psi: float, n: int, H: float, L_star: float, p: float = 2.0) -> float:
    """Two-branch step size for non-negative smooth losses (optimistic rate)."""
    _positive(sup_psi=sup_psi, n=n, H=H)
    if L_star < 0:
        raise ValueError("comparator loss must be non-negative")
    if not 1 < p <= 2:
        raise ValueError("p must lie in (1, 2]")
    if smooth_branch(sup_psi, n, H, L_star, p) == 1:
        return (p * sup_psi / n) ** (1.0 / p) / math.sqrt(4.0 * H * L_star)
    return (p / 2.0) ** (p / 2.0) / (4.0 * H) * (sup_psi / n) ** ((2.0 - p) / p)


def ucvx_threshold(sup_psi: float, sigma: float, q_prime: float, p: float) -> float:
    """Horizon above which the finite step size is used (evaluated literally)."""
    pp = q_prime / (q_prime - 1.0)
    q = p / (p - 1.0)
    base = (2.0 - pp) * sigma ** (pp - 1.0) * sup_psi ** (1.0 / q)
    expo = 1.0 / (2.0 - pp - 1.0 / p)
    if base == 0:
        return math.inf if expo < 0 else 0.0
    if base < 0:
        return math.nan
    return base ** expo


def step_size_ucvx(sup_psi: float, n: int, sigma: float, q_prime: float, p: float = 2.0) -> tuple[float, str]:
    """Returns (eta, branch); eta = inf means Psi is dropped from the regularizer."""
    if q_prime < 2:
        raise ValueError("q' must be >= 2")
    thr = ucvx_threshold(sup_psi, sigma, q_prime, p)
    if n >= thr:  # False for nan as well
        return (sup_psi / n) ** (1.0 / p), "finite"
    return math.inf, "infinite"


# ---------------------------------------------------------------- bounds

def lipschitz_regret_bound(sup_psi: float, n: int, q: float = 2.0) -> float:
    return 2.0 * (sup_psi / n) ** (1.0 / q)


def smooth_regret_bound(sup_psi: float, n: int, H: float, L_star: float, q: float = 2.0) -> float:
    a = sup_psi / n
    return math.sqrt(64.0 * H * L_star) * a ** (1.0 / q) + 40.0 * H * a ** (2.0 / q)


def ucvx_regret_bound(n: int, sigma: float, q_prime: float, R_sup: float,
                      sup_psi: float | None = None, q: float = 2.0) -> float:
    if q_prime == 2:
        return 2.0 * math.log(n) / (sigma * n) + R_sup / n
    pp = q_prime / (q_prime - 1.0)
    terms = [2.0 / ((2.0 - pp) * sigma ** (pp - 1.0) * n ** (pp - 1.0))]
    if sup_psi is not None:
        terms.append(2.0 * sup_psi ** (1.0 / q) / n ** (1.0 / q))
    return min(terms) + R_sup / n


# ---------------------------------------------------------------- policies

@dataclass(frozen=True)
class LipschitzRate:
    sup_psi: float
    n: int
    B: float = 1.0
    p: float = 2.0

    @property
    def eta(self) -> float:
        return step_size_lipschitz(self.sup_psi, self.n, self.B, self.p)

    @property
    def id(self) -> str:
        return f"LipschitzRate(n={self.n},B={self.B},p={self.p})"


@dataclass(frozen=True)
class SmoothRate:
    sup_psi: float
    n: int
    H: float
    L_star: float
    p: float = 2.0

    @property
    def eta(self) -> float:
        return step_size_smooth(self.sup_psi, self.n, self.H, self.L_star, self.p)

    @property
    def branch(self) -> int:
        return smooth_branch(self.sup_psi, self.n, self.H, self.L_star, self.p)

    @property
    def id(self) -> str:
        return f"SmoothRate(n={self.n},H={self.H},L*={self.L_star},p={self.p},branch={self.branch})"


@dataclass(frozen=True)
class UniformlyConvex:
    sigma: float
    q_prime: float
    R_sup: float
    sup_psi: float
    n: int
    p: float = 2.0

    @property
    def eta_branch(self) -> tuple[float, str]:
        return step_size_ucvx(self.sup_psi, self.n, self.sigma, self.q_prime, self.p)

    @property
    def eta(self) -> float:
        return self.eta_branch[0]

    @property
    def id(self) -> str:
        return f"UniformlyConvex(sigma={self.sigma},q'={self.q_prime},branch={self.eta_branch[1]})"


@dataclass(frozen=True)
class Fixed:
    eta_value: float

    @property
    def eta(self) -> float:
        return self.eta_value

    @property
    def id(self) -> str:
        return f"Fixed(eta={self.eta_value})"


StepPolicy = Union[LipschitzRate, SmoothRate, UniformlyConvex, Fixed]


# ---------------------------------------------------------------- the update

@dataclass(frozen=True)
class MDState:
    h_current: np.ndarray
    h_sum: np.ndarray
    t: int  # number of iterates already accumulated into h_sum


def init_state(g: geo.GeometrySpec) -> MDState:
    h1 = geo.argmin_psi(g)
    return MDState(h1, np.zeros(g.d), 0)


class _Mirror:
    """Unchecked mirror-map closures for the hot loop."""

    def __init__(self, g: geo.GeometrySpec):
        self.g = g
        fam, c = g.family, g.constraint
        if fam is geo.Family.EUCLIDEAN:
            self.grad = lambda h: h
            self.grad_star = lambda th: th
            if isinstance(c, geo.L2Ball):
                R = c.radius

                def proj(h):
                    nh = math.sqrt(float(h @ h))
                    return h * (R / nh) if nh > R else h
                self.proj = proj
            elif isinstance(c, geo.NoConstraint):
                self.proj = lambda h: h
            else:
                self.proj = lambda h: geo.project(g, h)
        elif fam is geo.Family.ENTROPIC:
            floor = TOL.entropic_floor

            def step(h, sg, eta):
                lw = np.log(np.maximum(h, floor)) - eta * sg
                lw -= lw.max()
                w = np.exp(lw)
                return w / w.sum()
            self.step = step
            return
        else:
            self.grad = lambda h: geo.grad_psi(g, h)
            self.grad_star = lambda th: geo.grad_psi_star(g, th)
            self.proj = lambda h: geo.project(g, h)
        grad, gstar, proj = self.grad, self.grad_star, self.proj
        self.step = lambda h, sg, eta: proj(gstar(grad(h) - eta * sg))


def md_step(state: MDState, g: geo.GeometrySpec, subgrad, eta: float) -> MDState:
    """One mirror descent update; the current iterate is added to the running sum."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    sg = np.asarray(subgrad, dtype=float)
    if sg.shape != (g.d,):
        raise ValueError("subgradient dimension mismatch")
    h = state.h_current
    if g.family is geo.Family.ENTROPIC:
        if np.any(h < 0):
            raise DomainError("entropic iterate has negative weights")
        h = np.maximum(h, TOL.entropic_floor)
        hp = geo.grad_psi_star(g, geo.grad_psi(g, h) - eta * sg)
    else:
        hp = geo.grad_psi_star(g, geo.grad_psi(g, h) - eta * sg)
    h_next = geo.project(g, hp)
    return MDState(h_next, state.h_sum + state.h_current, state.t + 1)


def averaged_output(state: MDState) -> np.ndarray:
    """Mean of the iterates accumulated so far (the points losses were evaluated at)."""
    if state.t < 1:
        raise ValueError("no iterates accumulated yet")
    return state.h_sum / state.t


# ---------------------------------------------------------------- comparators

def linear_minimizer(g: geo.GeometrySpec, s: np.ndarray) -> tuple[float, np.ndarray]:
    """min_{h in constraint} <s, h> and a minimizer."""
    c = g.constraint
    s = np.asarray(s, dtype=float)
    if isinstance(c, geo.Simplex):
        i = int(np.argmin(s))
        h = np.zeros(g.d)
        h[i] = 1.0
        return float(s[i]), h
    if isinstance(c, geo.NoConstraint):
        raise ValueError("linear minimization over an unbounded set")
    p, rad = geo._ball_exponent(c)
    q = geo.conjugate_exponent(p)
    ns = geo.lp_norm(s, q)
    if ns == 0:
        return 0.0, np.zeros(g.d)
    if p == 1:
        i = int(np.argmax(np.abs(s)))
        h = np.zeros(g.d)
        h[i] = -rad * np.sign(s[i])
        return float(s @ h), h
    if math.isinf(p):
        h = -rad * np.sign(s)
        return float(s @ h), h
    h = -rad * np.sign(s) * (np.abs(s) / ns) ** (q - 1.0)
    return -rad * ns, h


def _ball_quadratic_min(sbar: np.ndarray, lam: float, radius: float) -> np.ndarray:
    """argmin over the l2 ball of <sbar, h> + lam/2 ||h||^2."""
    ns = float(np.linalg.norm(sbar))
    if ns <= lam * radius:
        return -sbar / lam
    return -radius * sbar / ns


@dataclass
class Comparator:
    point: np.ndarray
    value: float          # mean comparator loss used in the regret
    method: str           # analytic | set | numeric-certified
    upper_value: float    # mean loss actually attained by ``point``


def best_comparator(g: geo.GeometrySpec, stream: Sequence, comparators=None,
                    budget: int = 10_000) -> Comparator:
    """Best fixed point in hindsight over the constraint set.

    Uses a closed form for linear (and l2-regularized linear on l2 balls)
    losses, the caller's comparator set when given, and otherwise a numerical
    solve whose value is replaced by a certified lower bound so regret is
    never underestimated.
    """
    batch = ls.BatchLoss(stream)
    if comparators is not None:
        pts = [np.asarray(c, dtype=float) for c in comparators]
        vals = [batch.value(c) for c in pts]
        i = int(np.argmin(vals))
        return Comparator(pts[i], vals[i], "set", vals[i])
    kinds = set(batch.kinds)
    c = g.constraint
    if kinds == {ls.Linear} and not isinstance(c, geo.NoConstraint):
        S = np.mean([z.x if isinstance(z, ls.Linear) else z.inner.x for z in stream], axis=0)
        if not np.any(batch.lam):
            v, h = linear_minimizer(g, S)
            return Comparator(h, v, "analytic", batch.value(h))
        if isinstance(c, geo.L2Ball) and np.all(batch.lam == batch.lam[0]):
            h = _ball_quadratic_min(S, batch.lam[0], c.radius)
            v = batch.value(h)
            return Comparator(h, v, "analytic", v)
    res = erm_solve(stream, g, budget=budget)
    return Comparator(res.h, res.lower_bound, "numeric-certified", res.objective)


# ---------------------------------------------------------------- traces

@dataclass
class RegretTrace:
    losses: np.ndarray
    comparator_losses: np.ndarray
    iterates: np.ndarray
    comparator: np.ndarray
    comparator_value: float
    comparator_method: str
    metadata: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.losses.size

    @property
    def cumulative_regret(self) -> np.ndarray:
        """R_t over prefixes, measured against the final comparator point."""
        t = np.arange(1, self.n + 1)
        return np.cumsum(self.losses - self.comparator_losses) / t

    @property
    def regret(self) -> float:
        return float(np.mean(self.losses) - self.comparator_value)

    @property
    def averaged_iterate(self) -> np.ndarray:
        return self.iterates.mean(axis=0)


def _finish_trace(g, stream, losses, iterates, comparators, meta) -> RegretTrace:
    comp = best_comparator(g, stream, comparators)
    comp_losses = ls.BatchLoss(stream).values(comp.point)
    meta = dict(meta)
    meta.update(geometry=g.id, comparator_method=comp.method,
                comparator_upper_value=comp.upper_value)
    return RegretTrace(np.asarray(losses), comp_losses, np.asarray(iterates), comp.point,
                       comp.value, comp.method, meta)


def run_online_md(g: geo.GeometrySpec, policy: StepPolicy, stream: Sequence,
                  comparators=None, seed=None, h1=None) -> RegretTrace:
    """Online mirror descent on a fixed sequence of loss instances."""
    stream = list(stream)
    if not stream:
        raise ValueError("empty stream")
    n_pol = getattr(policy, "n", None)
    if n_pol is not None and n_pol != len(stream):
        raise ValueError(f"policy horizon {n_pol} differs from stream length {len(stream)}")
    eta = policy.eta
    if not (eta > 0 and math.isfinite(eta)):
        raise ValueError("policy does not give a finite positive step size")
    mirror = _Mirror(g)
    h = geo.argmin_psi(g) if h1 is None else np.asarray(h1, dtype=float)
    n = len(stream)
    losses = np.empty(n)
    its = np.empty((n, g.d))
    for t, z in enumerate(stream):
        its[t] = h
        v, sg = ls.evaluate(z, h)
        losses[t] = v
        h = mirror.step(h, sg, eta)
    meta = {"policy": policy.id, "eta": eta, "seed": seed}
    return _finish_trace(g, stream, losses, its, comparators, meta)


def doubling_trick(g: geo.GeometrySpec, stream: Sequence, make_policy: Callable[[int], StepPolicy]):
    """Restart MD on epochs of length 1, 2, 4, ... for an unknown horizon.

    Plumbing only: the per-epoch guarantees hold, the combined constant is not
    covered by the fixed-horizon bounds.
    """
    stream = list(stream)
    losses, its = [], []
    start, k = 0, 0
    mirror = _Mirror(g)
    while start < len(stream):
        m = min(2 ** k, len(stream) - start)
        eta = make_policy(m).eta
        h = geo.argmin_psi(g)
        for z in stream[start:start + m]:
            its.append(h)
            v, sg = ls.evaluate(z, h)
            losses.append(v)
            h = mirror.step(h, sg, eta)
        start += m
        k += 1
    return _finish_trace(g, stream, losses, its, None, {"policy": "doubling"})


def run_uniformly_convex_md(g: geo.GeometrySpec, sigma: float, q_prime: float, stream: Sequence,
                            psi_geometry: geo.GeometrySpec | None = None,
                            comparators=None, seed=None) -> RegretTrace:
    """Mirror descent with the time-varying regularizer Psi/eta + R + sigma t psi.

    Losses must be ``Regularized`` instances sharing one lambda; R is that
    l2 regularizer. No projection is applied. The comparator ranges over the
    constraint of ``g``.
    """
    stream = list(stream)
    if not stream:
        raise ValueError("empty stream")
    if q_prime < 2:
        raise ValueError("q' must be >= 2")
    lams = {z.lam for z in stream if isinstance(z, ls.Regularized)}
    if len(lams) != 1 or not all(isinstance(z, ls.Regularized) for z in stream):
        raise ValueError("stream must consist of Regularized losses with a common lambda")
    lam = lams.pop()
    n = len(stream)
    psi_g = psi_geometry or geo.euclidean(g.d, None)
    R_sup = 0.5 * lam * ls._radius(g) ** 2
    policy = UniformlyConvex(sigma, q_prime, R_sup, geo.sup_psi(g), n, g.p)
    eta, branch = policy.eta_branch
    inv_eta = 0.0 if math.isinf(eta) else 1.0 / eta
    quad = (g.family is geo.Family.EUCLIDEAN and psi_g.family is geo.Family.EUCLIDEAN)

    def grad_tilde(h, t):
        return inv_eta * geo.grad_psi(g, h) + lam * h + sigma * t * geo.grad_psi(psi_g, h)

    h = np.zeros(g.d) if inv_eta == 0 else geo.argmin_psi(g)
    losses = np.empty(n)
    its = np.empty((n, g.d))
    for t, z in enumerate(stream, start=1):
        its[t - 1] = h
        v, sg = ls.evaluate(z, h)
        losses[t - 1] = v
        theta = grad_tilde(h, t) - sg
        if quad:
            h = theta / (inv_eta + lam + sigma * t)
        else:
            f = lambda u: (inv_eta * geo.psi(g, u) + 0.5 * lam * float(u @ u)
                           + sigma * t * geo.psi(psi_g, u) - float(theta @ u))
            jac = lambda u: grad_tilde(u, t) - theta
            h = minimize(f, h, jac=jac, method="BFGS", options={"gtol": 1e-12}).x
    meta = {"policy": policy.id, "eta": eta, "branch": branch, "seed": seed,
            "R_sup": R_sup, "threshold": ucvx_threshold(policy.sup_psi, sigma, q_prime, g.p)}
    return _finish_trace(g, stream, losses, its, comparators, meta)


# ---------------------------------------------------------------- offline

def first_order_method(oracle: Callable, g: geo.GeometrySpec, m: int, method: str = "md",
                       eta: float | None = None, L: float = 1.0) -> tuple[np.ndarray, list]:
    """Run a deterministic first-order method for exactly m oracle queries.

    The m-th query is the method's output: for ``md`` it is the average of the
    m - 1 preceding iterates (h_1 when m = 1); for ``pgd`` (projected gradient
    descent, step radius/(L sqrt m)) it is the last iterate.
    Returns (output point, list of (query, answer)).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    mirror = _Mirror(g)
    h = geo.argmin_psi(g)
    log = []
    its = []
    k = m - 1 if method == "md" else m
    if method == "md":
        # gradients of norm <= L are rescaled into the unit dual ball
        step = eta if eta is not None else step_size_lipschitz(geo.sup_psi(g), max(k, 1), 1.0, g.p) / L
    elif method == "pgd":
        step = eta if eta is not None else ls._radius(g) / (L * math.sqrt(m))
    else:
        raise ValueError(f"unknown method {method}")
    for t in range(k):
        its.append(h)
        ans = oracle(h)
        log.append((h.copy(), ans))
        if method == "md" or t < k - 1:
            h = mirror.step(h, ans.subgrad, step)
    if method == "md":
        out = np.mean(its, axis=0) if its else h
        log.append((out.copy(), oracle(out)))
        return out, log
    return h, log


def offline_optimize(z: ls.LossInstance, g: geo.GeometrySpec, m: int) -> np.ndarray:
    """MD fed its own gradients for m rounds; returns the averaged iterate."""
    if m < 1:
        raise ValueError("m must be >= 1")
    eta = step_size_lipschitz(geo.sup_psi(g), m, 1.0, g.p)
    mirror = _Mirror(g)
    h = geo.argmin_psi(g)
    total = np.zeros(g.d)
    for _ in range(m):
        total += h
        h = mirror.step(h, ls.evaluate(z, h).subgrad, eta)
    return total / m


def sgd_counterexample(sample: Sequence, radius: float = 1.0) -> np.ndarray:
    """h_1 = 0, eta = 1/sqrt(n), Euclidean projection onto the ball, averaged output."""
    sample = list(sample)
    if not sample:
        raise ValueError("empty sample")
    g = geo.euclidean(sample[0].d, radius)
    n = len(sample)
    eta = 1.0 / math.sqrt(n)
    mirror = _Mirror(g)
    h = np.zeros(g.d)
    total = np.zeros(g.d)
    for z in sample:
        total += h
        h = mirror.step(h, ls.evaluate(z, h).subgrad, eta)
    return total / n


# ---------------------------------------------------------------- ERM baselines

@dataclass
class ErmResult:
    h: np.ndarray
    objective: float
    lower_bound: float
    method: str

    @property
    def suboptimality_estimate(self) -> float:
        return self.objective - self.lower_bound


def _certified_lower(g, batch, h, extra_lam=0.0) -> float:
    v, sg = batch.evaluate(h)
    v += 0.5 * extra_lam * float(h @ h)
    sg = sg + extra_lam * h
    if isinstance(g.constraint, geo.NoConstraint):
        return -math.inf
    m, _ = linear_minimizer(g, sg)
    return v + m - float(sg @ h)


def _aggregate(sample):
    """Merge identical supervised instances into weights."""
    keys, weights, uniq = {}, [], []
    for z in sample:
        base, lam = z, 0.0
        while isinstance(base, ls.Regularized):
            lam += base.lam
            base = base.inner
        if isinstance(base, (ls.Linear, ls.AbsSupervised, ls.SmoothedAbs)):
            key = (type(base).__name__, base.x.tobytes(), getattr(base, "y", 0.0), lam)
        elif isinstance(base, ls.HiddenCoord):
            key = (type(base).__name__, base.x.tobytes(), base.alpha.tobytes(),
                   getattr(base, "eps_bias", 0.0), lam)
        else:
            key = ("id", id(z))
        if key in keys:
            weights[keys[key]] += 1.0
        else:
            keys[key] = len(uniq)
            uniq.append(z)
            weights.append(1.0)
    return uniq, np.array(weights)


def _projected_subgradient(batch, g, budget, extra_lam, L):
    rad = ls._radius(g) if not isinstance(g.constraint, geo.NoConstraint) else 1.0
    c = rad / max(L, 1e-12)
    h = geo.argmin_psi(g)
    best_h, best_v = h, math.inf
    for t in range(1, budget + 1):
        v, sg = batch.evaluate(h)
        v += 0.5 * extra_lam * float(h @ h)
        if v < best_v:
            best_v, best_h = v, h
        sg = sg + extra_lam * h
        step = c / math.sqrt(t) if extra_lam == 0 else min(c / math.sqrt(t), 1.0 / (extra_lam * t))
        h = geo.project(g, h - step * sg) if g.family is not geo.Family.ENTROPIC else \
            geo.project(g, np.maximum(h - step * sg, 0) + 1e-300)
    return best_h, best_v


def _polish(batch, g, h0, extra_lam):
    """Epigraph SLSQP refinement for piecewise-linear or smooth objectives on l2 balls."""
    c = g.constraint
    if g.family is not geo.Family.EUCLIDEAN or not isinstance(c, (geo.L2Ball, geo.NoConstraint)):
        return None
    kinds = set(batch.kinds)
    w, lam = batch.weights, batch.lam
    groups = batch._groups
    if kinds <= {ls.AbsSupervised, ls.Linear} and len(groups) <= 2:
        X = np.zeros((w.size, g.d))
        y = np.zeros(w.size)
        is_abs = np.zeros(w.size, dtype=bool)
        for kind, idx, a, b, _ in groups:
            X[idx], y[idx] = a, b
            is_abs[idx] = kind is ls.AbsSupervised
        d, k = g.d, w.size
        u0 = np.concatenate([h0, np.abs(X @ h0 - y) + 1e-9])

        def f(u):
            h, s = u[:d], u[d:]
            lin = np.where(is_abs, s, X @ h)
            return float(w @ lin) + 0.5 * (float(w @ lam) + extra_lam) * float(h @ h)

        def jac(u):
            h, s = u[:d], u[d:]
            gh = ((w * ~is_abs) @ X) + (float(w @ lam) + extra_lam) * h
            return np.concatenate([gh, np.where(is_abs, w, 0.0)])

        cons = [{"type": "ineq", "fun": lambda u: u[d:] - (X @ u[:d] - y),
                 "jac": lambda u: np.hstack([-X, np.eye(k)])},
                {"type": "ineq", "fun": lambda u: u[d:] + (X @ u[:d] - y),
                 "jac": lambda u: np.hstack([X, np.eye(k)])}]
        if isinstance(c, geo.L2Ball):
            R2 = c.radius ** 2
            cons.append({"type": "ineq", "fun": lambda u: R2 - float(u[:d] @ u[:d]),
                         "jac": lambda u: np.concatenate([-2 * u[:d], np.zeros(k)])})
        res = minimize(f, u0, jac=jac, constraints=cons, method="SLSQP",
                       options={"ftol": 1e-15, "maxiter": 1000})
        h = res.x[:d]
    elif kinds <= {ls.SmoothedAbs, ls.Linear}:
        def f(h):
            v, gr = batch.evaluate(h)
            return v + 0.5 * extra_lam * float(h @ h), gr + extra_lam * h
        cons = []
        if isinstance(c, geo.L2Ball):
            R2 = c.radius ** 2
            cons.append({"type": "ineq", "fun": lambda h: R2 - float(h @ h), "jac": lambda h: -2 * h})
        res = minimize(f, h0, jac=True, constraints=cons, method="SLSQP",
                       options={"ftol": 1e-15, "maxiter": 1000})
        h = res.x
    else:
        return None
    if isinstance(c, geo.L2Ball):
        h = geo.project(g, h)
    return h


def _hidden_coordinate_exact(uniq, weights, g):
    """Structured minimizer for biased hidden-coordinate samples centred at 0.

    Candidate: zero on observed coordinates, the bias-only ball-constrained
    minimizer on unobserved ones. A KKT certificate (each observed
    coordinate's bias gradient absorbed by one sample's norm subgradient) is
    checked; returns None if it cannot be verified.
    """
    if not isinstance(g.constraint, geo.L2Ball) or g.family is not geo.Family.EUCLIDEAN:
        return None
    if not all(type(z) is ls.HiddenCoordBiased for z in uniq):
        return None
    if any(np.any(z.x != 0) for z in uniq):
        return None
    eps = {z.eps_bias for z in uniq}
    if len(eps) != 1:
        return None
    eps = eps.pop()
    d = g.d
    R = g.constraint.radius
    wts = weights / weights.sum()
    A = np.array([z.alpha for z in uniq])
    observed = A.max(axis=0) > 0
    U = np.nonzero(~observed)[0]
    logw = -(np.arange(1, d + 1)) * math.log(2.0)
    h = np.zeros(d)
    if U.size:
        lw = logw[U]
        if U.size * 1.0 <= R * R:
            h[U] = 1.0
        else:
            # h_i = 1 / (1 + mu / w_i) with ||h_U|| = R, solved in log mu
            def gap(lmu):
                return float(np.sum(expit(lw - lmu) ** 2)) - R * R
            lo, hi = lw.min() - 50.0, lw.max() + 50.0
            lmu = brentq(gap, lo, hi, xtol=1e-14, maxiter=TOL.max_bisection)
            h[U] = expit(lw - lmu)
            h *= R / np.linalg.norm(h)
    # KKT certificate on observed coordinates
    grad_bias = 2.0 * eps * np.exp(logw)
    owner = np.argmax(A > 0, axis=0)
    for j in range(len(uniq)):
        mine = observed & (owner == j)
        need = grad_bias[mine] / wts[j]
        if float(np.linalg.norm(need)) > 1.0 + 1e-12:
            return None
    return h


_WARM_START = 200


def erm_solve(sample: Sequence, g: geo.GeometrySpec, budget: int = 10_000, lam: float = 0.0) -> ErmResult:
    """Approximate minimizer of the empirical objective (+ lam/2 ||h||^2).

    Projected subgradient with step c/sqrt(t), c = radius / L, for ``budget``
    passes, followed by an exact refinement when the sample has a structure the
    package can solve directly (piecewise-linear or smooth supervised losses on
    an l2 ball, or biased hidden-coordinate samples).
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    sample = list(sample)
    uniq, weights = _aggregate(sample)
    batch = ls.BatchLoss(uniq, weights)
    obj = lambda h: batch.value(h) + 0.5 * lam * float(h @ h)
    if lam == 0:
        hx = _hidden_coordinate_exact(uniq, weights, g)
        if hx is not None:
            return ErmResult(hx, obj(hx), obj(hx), "hidden-coordinate-kkt")
    L = max(ls.lipschitz_bound(z, g) for z in uniq) + lam * ls._radius(g)
    # short warm start when an exact polish applies, the full budget otherwise
    h_ps, v_ps = _projected_subgradient(batch, g, min(budget, _WARM_START), lam, L)
    method = "projected-subgradient"
    h_pol = _polish(batch, g, h_ps, lam)
    if h_pol is None or obj(h_pol) > v_ps:
        if budget > _WARM_START:
            h_ps, v_ps = _projected_subgradient(batch, g, budget, lam, L)
        h_pol = _polish(batch, g, h_ps, lam) if h_pol is not None else None
    if h_pol is not None and obj(h_pol) <= v_ps:
        h_ps, v_ps, method = h_pol, obj(h_pol), "projected-subgradient+slsqp"
    lower = _certified_lower(g, batch, h_ps, lam)
    return ErmResult(h_ps, v_ps, min(lower, v_ps), method)


def rerm_solve(sample: Sequence, g: geo.GeometrySpec, lam: float, budget: int = 10_000) -> ErmResult:
    """Regularized ERM: minimizes the empirical loss plus lam/2 ||h||^2."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return erm_solve(sample, g, budget, lam)


def rerm_lambda(L: float, B: float, n: int) -> float:
    """lambda = sqrt(16 L^2 / (B^2 n))."""
    return math.sqrt(16.0 * L * L / (B * B * n))
