"""Norms, proxy functions, mirror maps, Bregman divergences and projections.

Three families are supported:

* ``Euclidean``: Psi(h) = 0.5 ||h||_2^2, self-dual.
* ``Entropic``: Psi(h) = sum h_i ln h_i + ln d on the simplex, l1 / l_inf pairing.
* ``LpProxy``: scale * psi_r with
  psi_r(h) = ||h||_r^2 / (2 (r - 1))   for r in (1, 2]
  psi_r(h) = (2^r / r) ||h||_r^r       for r > 2,
  which is max(r, 2)-uniformly convex w.r.t. ||.||_r.

All functions are pure and accept array-likes; they return float64 arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

import numpy as np
from scipy.optimize import brentq

from .constants import TOL
from .errors import DomainError, UnboundedError


class Family(str, Enum):
    EUCLIDEAN = "Euclidean"
    ENTROPIC = "Entropic"
    LPPROXY = "LpProxy"


@dataclass(frozen=True)
class NoConstraint:
    pass


@dataclass(frozen=True)
class L2Ball:
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")


@dataclass(frozen=True)
class L1Ball:
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")


@dataclass(frozen=True)
class Simplex:
    pass


@dataclass(frozen=True)
class LpBall:
    p: float
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if not self.p >= 1:
            raise ValueError("p must be >= 1")


Constraint = Union[NoConstraint, L2Ball, L1Ball, Simplex, LpBall]


@dataclass(frozen=True)
class GeometrySpec:
    family: Family
    d: int
    r: float | None = None
    scale: float = 1.0
    constraint: Constraint = field(default_factory=NoConstraint)

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if int(self.d) != self.d or self.d < 1:
            raise ValueError("dimension must be a positive integer")
        if self.scale < 1:
            raise ValueError("scale must be >= 1")
        if self.family is Family.LPPROXY:
            if self.r is None or not self.r > 1 or not math.isfinite(self.r):
                raise ValueError("LpProxy needs a finite exponent r > 1")
        elif self.r is not None:
            raise ValueError("only LpProxy takes an exponent r")
        if self.family is Family.ENTROPIC and not isinstance(self.constraint, Simplex):
            raise ValueError("Entropic geometry requires the Simplex constraint")

    @property
    def q(self) -> float:
        """Uniform-convexity exponent of Psi."""
        if self.family is Family.LPPROXY:
            return max(self.r, 2.0)
        return 2.0

    @property
    def p(self) -> float:
        q = self.q
        return q / (q - 1.0)

    @property
    def primal_exponent(self) -> float:
        if self.family is Family.EUCLIDEAN:
            return 2.0
        if self.family is Family.ENTROPIC:
            return 1.0
        return float(self.r)

    @property
    def dual_exponent(self) -> float:
        return conjugate_exponent(self.primal_exponent)

    @property
    def id(self) -> str:
        c = self.constraint
        cname = type(c).__name__
        extra = ",".join(f"{k}={v}" for k, v in vars(c).items())
        rpart = f",r={self.r}" if self.r is not None else ""
        return f"{self.family.value}(d={self.d}{rpart},scale={self.scale},{cname}({extra}))"


def euclidean(d: int, radius: float | None = 1.0) -> GeometrySpec:
    c = NoConstraint() if radius is None else L2Ball(radius)
    return GeometrySpec(Family.EUCLIDEAN, d, constraint=c)


def entropic(d: int) -> GeometrySpec:
    return GeometrySpec(Family.ENTROPIC, d, constraint=Simplex())


def lp_proxy(d: int, r: float, scale: float = 1.0, constraint: Constraint | None = None) -> GeometrySpec:
    return GeometrySpec(Family.LPPROXY, d, r=r, scale=scale,
                        constraint=NoConstraint() if constraint is None else constraint)


def conjugate_exponent(p: float) -> float:
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def lp_norm(v: np.ndarray, p: float) -> float:
    if math.isinf(p):
        return float(np.max(np.abs(v))) if v.size else 0.0
    a = np.abs(v)
    m = a.max() if a.size else 0.0
    if m == 0:
        return 0.0
    # rescale to avoid overflow for large p
    return float(m * np.sum((a / m) ** p) ** (1.0 / p))


def _point(g: GeometrySpec, h) -> np.ndarray:
    v = np.asarray(h, dtype=float)
    if v.ndim != 1 or v.shape[0] != g.d:
        raise ValueError(f"dimension mismatch: expected ({g.d},), got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("point has non-finite entries")
    return v


def _check_entropic_domain(v: np.ndarray):
    if np.any(v <= 0):
        raise DomainError("entropic proxy needs strictly positive coordinates")


def norm(g: GeometrySpec, h) -> float:
    """Primal norm of the geometry (l2, l1 or l_r)."""
    return lp_norm(_point(g, h), g.primal_exponent)


def dual_norm(g: GeometrySpec, x) -> float:
    """Dual norm, pairing l_r with l_{r/(r-1)}."""
    return lp_norm(_point(g, x), g.dual_exponent)


def _lp_coeff(g: GeometrySpec) -> float:
    return g.scale / (g.r - 1.0)


def psi(g: GeometrySpec, h) -> float:
    v = _point(g, h)
    if g.family is Family.EUCLIDEAN:
        return 0.5 * float(v @ v)
    if g.family is Family.ENTROPIC:
        _check_entropic_domain(v)
        return float(np.sum(v * np.log(v)) + math.log(g.d))
    r = g.r
    nr = lp_norm(v, r)
    if r <= 2:
        return g.scale * nr ** 2 / (2.0 * (r - 1.0))
    return g.scale * (2.0 ** r / r) * nr ** r


def grad_psi(g: GeometrySpec, h) -> np.ndarray:
    v = _point(g, h)
    if g.family is Family.EUCLIDEAN:
        return v.copy()
    if g.family is Family.ENTROPIC:
        _check_entropic_domain(v)
        return np.log(v) + 1.0
    r = g.r
    pw = np.sign(v) * np.abs(v) ** (r - 1.0)
    if r <= 2:
        nr = lp_norm(v, r)
        if nr == 0:
            return np.zeros_like(v)
        return _lp_coeff(g) * nr ** (2.0 - r) * pw
    return g.scale * 2.0 ** r * pw


def grad_psi_star(g: GeometrySpec, theta) -> np.ndarray:
    """Inverse mirror map.

    For the entropic family this is the conjugate of Psi restricted to the
    simplex (a softmax of theta - 1), so the output always lies on the simplex.
    """
    t = _point(g, theta)
    if g.family is Family.EUCLIDEAN:
        return t.copy()
    if g.family is Family.ENTROPIC:
        z = t - 1.0
        z = z - z.max()
        w = np.exp(z)
        return w / w.sum()
    r = g.r
    if r <= 2:
        rs = r / (r - 1.0)
        nt = lp_norm(t, rs)
        if nt == 0:
            return np.zeros_like(t)
        return (1.0 / _lp_coeff(g)) * nt ** (2.0 - rs) * np.sign(t) * np.abs(t) ** (rs - 1.0)
    return np.sign(t) * (np.abs(t) / (g.scale * 2.0 ** r)) ** (1.0 / (r - 1.0))


def bregman(g: GeometrySpec, h, h0) -> float:
    """Delta_Psi(h || h0) = Psi(h) - Psi(h0) - <grad Psi(h0), h - h0>."""
    v = _point(g, h)
    v0 = _point(g, h0)
    if g.family is Family.EUCLIDEAN:
        dv = v - v0
        return 0.5 * float(dv @ dv)
    if g.family is Family.ENTROPIC:
        _check_entropic_domain(v)
        _check_entropic_domain(v0)
        # generalized KL, exact on the positive orthant
        return float(np.sum(v * np.log(v / v0) - v + v0))
    val = psi(g, v) - psi(g, v0) - float(grad_psi(g, v0) @ (v - v0))
    return max(val, 0.0) if val > -TOL.bregman_floor else val


def argmin_psi(g: GeometrySpec) -> np.ndarray:
    """Minimizer of Psi over the constraint set (starting iterate h_1)."""
    if g.family is Family.ENTROPIC:
        return np.full(g.d, 1.0 / g.d)
    return np.zeros(g.d)


def in_constraint(g: GeometrySpec, h, tol: float = TOL.eq) -> bool:
    v = _point(g, h)
    c = g.constraint
    if isinstance(c, NoConstraint):
        return True
    if isinstance(c, L2Ball):
        return lp_norm(v, 2) <= c.radius + tol
    if isinstance(c, L1Ball):
        return lp_norm(v, 1) <= c.radius + tol
    if isinstance(c, LpBall):
        return lp_norm(v, c.p) <= c.radius + tol
    return bool(np.all(v >= -tol) and abs(v.sum() - 1.0) <= tol)


# ---------------------------------------------------------------- projections

def project_l1_ball(v: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """Euclidean projection onto the l1 ball by sort-and-threshold."""
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    rho = np.nonzero(u * k > css - radius)[0][-1]
    tau = (css[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(a - tau, 0.0)


def _solve_power_sum(a: float, ea: float, mu: float, ep: float, b: np.ndarray) -> np.ndarray:
    """Solve a*u^ea + mu*u^ep = b for u >= 0, elementwise (all exponents > 0)."""
    u = np.zeros_like(b)
    pos = b > 0
    if not np.any(pos):
        return u
    bb = b[pos]
    hi = (bb / a) ** (1.0 / ea)
    if mu > 0:
        hi = np.minimum(hi, (bb / mu) ** (1.0 / ep))
    lo = np.zeros_like(bb)
    for _ in range(TOL.max_bisection):
        mid = 0.5 * (lo + hi)
        f = a * mid ** ea + mu * mid ** ep - bb
        up = f > 0
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
        if np.all(hi - lo <= 1e-15 * np.maximum(hi, 1e-300)):
            break
    u[pos] = 0.5 * (lo + hi)
    return u


def _lp_stationary(g: GeometrySpec, theta: np.ndarray, mu: float, p: float) -> np.ndarray:
    """Point with grad Psi(h) + mu * d/dh (||h||_p^p / p) = theta."""
    r = g.r
    b = np.abs(theta)
    s = np.sign(theta)
    if p == 1:
        b = np.maximum(b - mu, 0.0)
        mu_eff, ep = 0.0, 1.0
    else:
        mu_eff, ep = mu, p - 1.0
    if r > 2:
        a = g.scale * 2.0 ** r
        if mu_eff == 0:
            return s * (b / a) ** (1.0 / (r - 1.0))
        return s * _solve_power_sum(a, r - 1.0, mu_eff, ep, b)
    c = _lp_coeff(g)
    if not np.any(b > 0):
        return np.zeros_like(theta)

    def coords(nrm: float) -> np.ndarray:
        a = c * nrm ** (2.0 - r)
        if mu_eff == 0 or ep == r - 1.0:
            return (b / (a + mu_eff)) ** (1.0 / (r - 1.0))
        return _solve_power_sum(a, r - 1.0, mu_eff, ep, b)

    if r == 2:
        return s * coords(1.0)
    # fixed point N = ||u(N)||_r; the residual is strictly decreasing in N
    res = lambda nrm: lp_norm(coords(nrm), r) - nrm
    hi = 1.0
    while res(hi) > 0:
        hi *= 2.0
    lo = hi / 2.0
    while res(lo) < 0:
        lo /= 2.0
        if lo < 1e-300:
            return np.zeros_like(theta)
    nrm = brentq(res, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=TOL.max_bisection)
    return s * coords(nrm)


def _project_lp_ball(g: GeometrySpec, v: np.ndarray, c: LpBall) -> np.ndarray:
    if lp_norm(v, c.p) <= c.radius:
        return v.copy()
    theta = grad_psi(g, v)
    p = c.p
    cons = lambda mu: lp_norm(_lp_stationary(g, theta, mu, p), p) - c.radius
    hi = 1.0
    while cons(hi) > 0:
        hi *= 2.0
    mu = brentq(cons, 0.0, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=TOL.max_bisection)
    h = _lp_stationary(g, theta, mu, p)
    # remove the last round-off so the result is feasible
    nh = lp_norm(h, p)
    if nh > c.radius:
        h = h * (c.radius / nh)
    return h


def project(g: GeometrySpec, h) -> np.ndarray:
    """Bregman projection of h onto the geometry's constraint set."""
    v = _point(g, h)
    c = g.constraint
    if isinstance(c, NoConstraint):
        return v.copy()
    if isinstance(c, Simplex):
        if np.any(v < 0):
            raise DomainError("simplex projection needs non-negative weights")
        s = v.sum()
        if not s > 0:
            raise DomainError("cannot project a vector with zero mass onto the simplex")
        return v / s
    if g.family is Family.EUCLIDEAN:
        if isinstance(c, L2Ball):
            nv = lp_norm(v, 2)
            return v * (c.radius / nv) if nv > c.radius else v.copy()
        if isinstance(c, L1Ball):
            return project_l1_ball(v, c.radius)
        if c.p == 2:
            nv = lp_norm(v, 2)
            return v * (c.radius / nv) if nv > c.radius else v.copy()
        if c.p == 1:
            return project_l1_ball(v, c.radius)
    if g.family is Family.LPPROXY:
        if isinstance(c, L2Ball):
            c = LpBall(2.0, c.radius)
        elif isinstance(c, L1Ball):
            c = LpBall(1.0, c.radius)
        if isinstance(c, LpBall):
            if math.isinf(c.p):
                raise ValueError("l_inf ball projection is not supported")
            return _project_lp_ball(g, v, c)
    raise ValueError(f"projection onto {c} not supported for {g.family.value}")


# ---------------------------------------------------------------- suprema

def _max_norm_over_ball(r: float, p: float, d: int, radius: float) -> float:
    """max ||h||_r over the radius-ball of l_p in R^d."""
    if r >= p:
        return radius
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    return radius * d ** (1.0 / r - inv_p)


def _ball_exponent(c: Constraint) -> tuple[float, float]:
    if isinstance(c, L2Ball):
        return 2.0, c.radius
    if isinstance(c, L1Ball):
        return 1.0, c.radius
    if isinstance(c, LpBall):
        return c.p, c.radius
    raise UnboundedError(f"sup of Psi over {type(c).__name__} is not finite")


def sup_psi(g: GeometrySpec) -> float:
    """Closed-form supremum of Psi over the constraint set."""
    c = g.constraint
    if g.family is Family.ENTROPIC:
        return math.log(g.d)
    p, rad = _ball_exponent(c)
    if g.family is Family.EUCLIDEAN:
        m = _max_norm_over_ball(2.0, p, g.d, rad)
        return 0.5 * m * m
    m = _max_norm_over_ball(g.r, p, g.d, rad)
    e1 = np.zeros(g.d)
    e1[0] = m
    return psi(g, e1)


# ---------------------------------------------------------------- non-dual pairs

@dataclass(frozen=True)
class NonDualChoice:
    geometry: GeometrySpec
    row: int
    bound_coefficient: float  # regret <= bound_coefficient / n^{1/q}

    def bound(self, n: int) -> float:
        return self.bound_coefficient / n ** (1.0 / self.geometry.q)


def _nondual_coefficient(r: float, p1: float, q2: float, d: int) -> float:
    inv = lambda a: 0.0 if math.isinf(a) else 1.0 / a
    e = max(inv(q2) - 1.0 / r, 0.0) + max(1.0 / r - inv(p1), 0.0)
    return 2.0 * max(2.0, 1.0 / math.sqrt(2.0 * (r - 1.0))) * d ** e


def nondual_geometry(p1: float, p2: float, d: int) -> NonDualChoice:
    """Pick r for H = unit l_{p1} ball against X = unit l_{p2} ball.

    Returns a scaled LpProxy geometry constrained to the l_{p1} ball together
    with the table row used and the constant in the resulting regret bound.
    For p2 = inf the l_r choice r = 1 + 1/ln d is compared against the
    generic row and the smaller evaluated bound wins.
    """
    if not (p1 >= 1 and p2 >= 1 and d >= 1):
        raise ValueError("need p1, p2 >= 1 and d >= 1")
    q2 = conjugate_exponent(p2)
    q1 = conjugate_exponent(p1)
    candidates: list[tuple[float, int]] = []
    if p1 <= 2:
        if p2 < 2:
            candidates.append((2.0, 1))
        elif p2 <= q1:
            candidates.append((q2, 2))
        else:
            candidates.append((p1, 3))
        if math.isinf(p2) and d >= 2:
            candidates.append((1.0 + 1.0 / math.log(d), 6))
    else:
        candidates.append((2.0, 4 if p2 < 2 else 5))
    candidates = [(r, row) for r, row in candidates if r > 1]
    if not candidates:
        raise ValueError("no admissible exponent for this (p1, p2, d)")
    best = min(candidates, key=lambda c: _nondual_coefficient(c[0], p1, q2, d))
    r, row = best
    inv_q2 = 0.0 if math.isinf(q2) else 1.0 / q2
    big_q = max(r, 2.0)
    scale = d ** (big_q * max(inv_q2 - 1.0 / r, 0.0))
    g = lp_proxy(d, r, scale=scale, constraint=LpBall(p1, 1.0))
    return NonDualChoice(g, row, _nondual_coefficient(r, p1, q2, d))
