"""Loss instances z with value and one subgradient at a point h.

Every instance is an immutable dataclass; ``evaluate(z, h)`` returns a
``LossEval``. Kink conventions: sign(0) = 0 for the absolute loss, the zero
vector for the hidden-coordinate norm at h = x, and lowest index on argmax
ties for the max of signed linear pieces.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np

from . import geometry as geo


class LossEval(NamedTuple):
    value: float
    subgrad: np.ndarray


def _vec(x) -> np.ndarray:
    v = np.array(x, dtype=float)
    if v.ndim != 1 or v.size < 1:
        raise ValueError("expected a non-empty 1-d vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    v.setflags(write=False)
    return v


@dataclass(frozen=True, eq=False)
class Linear:
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _vec(self.x))

    @property
    def d(self) -> int:
        return self.x.size


@dataclass(frozen=True, eq=False)
class AbsSupervised:
    x: np.ndarray
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", _vec(self.x))
        if not -1 <= self.y <= 1:
            raise ValueError("label must lie in [-1, 1]")

    @property
    def d(self) -> int:
        return self.x.size


@dataclass(frozen=True, eq=False)
class SmoothedAbs:
    """phi(<h,x> - y) with phi(u) = u^2 on |u| <= 1/2 and |u| - 1/4 outside."""
    x: np.ndarray
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", _vec(self.x))

    @property
    def d(self) -> int:
        return self.x.size


@dataclass(frozen=True, eq=False)
class HiddenCoord:
    """||alpha * (h - x)||_2 with a 0/1 mask alpha."""
    x: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _vec(self.x))
        a = _vec(self.alpha)
        if a.size != self.x.size or not np.all((a == 0) | (a == 1)):
            raise ValueError("mask must be 0/1 with the same dimension as x")
        object.__setattr__(self, "alpha", a)

    @property
    def d(self) -> int:
        return self.x.size


@dataclass(frozen=True, eq=False)
class HiddenCoordBiased(HiddenCoord):
    """Hidden-coordinate loss plus eps * sum_i 2^{-i} (h_i - 1)^2, i = 1..d."""
    eps_bias: float = 0.01

    def __post_init__(self):
        super().__post_init__()
        if self.eps_bias < 0:
            raise ValueError("bias weight must be non-negative")


@dataclass(frozen=True, eq=False)
class Regularized:
    inner: "LossInstance"
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")

    @property
    def d(self) -> int:
        return self.inner.d


@dataclass(frozen=True, eq=False)
class MaxOfSignedLinear:
    """max_i eps_i (<h, -x_i> + s_i)."""
    eps: np.ndarray
    xs: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        e = np.array(self.eps, dtype=float).reshape(-1)
        X = np.array(self.xs, dtype=float)
        s = np.array(self.s, dtype=float).reshape(-1)
        if X.ndim != 2 or X.shape[0] < 1:
            raise ValueError("need at least one piece")
        if e.size != X.shape[0] or s.size != X.shape[0]:
            raise ValueError("piece arrays have inconsistent lengths")
        if not np.all(np.abs(e) == 1):
            raise ValueError("piece signs must be +1 or -1")
        for a in (e, X, s):
            a.setflags(write=False)
        object.__setattr__(self, "eps", e)
        object.__setattr__(self, "xs", X)
        object.__setattr__(self, "s", s)

    @classmethod
    def from_pieces(cls, pieces: Sequence[tuple]) -> "MaxOfSignedLinear":
        eps, xs, s = zip(*pieces)
        return cls(np.array(eps), np.array(xs), np.array(s))

    @property
    def d(self) -> int:
        return self.xs.shape[1]


LossInstance = Union[Linear, AbsSupervised, SmoothedAbs, HiddenCoord, HiddenCoordBiased,
                     Regularized, MaxOfSignedLinear]


def _smoothed(u: float) -> tuple[float, float]:
    if abs(u) <= 0.5:
        return u * u, 2.0 * u
    return abs(u) - 0.25, float(np.sign(u))


def bias_weights(d: int) -> np.ndarray:
    return 0.5 ** np.arange(1, d + 1)


def evaluate(z: LossInstance, h) -> LossEval:
    """Exact value and one subgradient of l(., z) at h."""
    h = np.asarray(h, dtype=float)
    if h.ndim != 1 or h.size != z.d:
        raise ValueError(f"dimension mismatch: loss has d={z.d}, point has shape {h.shape}")
    if isinstance(z, Linear):
        return LossEval(float(z.x @ h), z.x.copy())
    if isinstance(z, AbsSupervised):
        u = float(z.x @ h) - z.y
        return LossEval(abs(u), np.sign(u) * z.x)
    if isinstance(z, SmoothedAbs):
        v, dv = _smoothed(float(z.x @ h) - z.y)
        return LossEval(v, dv * z.x)
    if isinstance(z, HiddenCoord):
        r = z.alpha * (h - z.x)
        nr = float(np.sqrt(r @ r))
        g = r / nr if nr > 0 else np.zeros_like(h)
        if isinstance(z, HiddenCoordBiased):
            w = z.eps_bias * bias_weights(z.d)
            dh = h - 1.0
            return LossEval(nr + float(w @ (dh * dh)), g + 2.0 * w * dh)
        return LossEval(nr, g)
    if isinstance(z, Regularized):
        v, g = evaluate(z.inner, h)
        return LossEval(v + 0.5 * z.lam * float(h @ h), g + z.lam * h)
    if isinstance(z, MaxOfSignedLinear):
        vals = z.eps * (z.s - z.xs @ h)
        i = int(np.argmax(vals))
        return LossEval(float(vals[i]), -z.eps[i] * z.xs[i])
    raise TypeError(f"unknown loss instance {type(z).__name__}")


def value(z: LossInstance, h) -> float:
    return evaluate(z, h).value


def _radius(g: geo.GeometrySpec) -> float:
    """Largest Euclidean norm over the constraint set."""
    c = g.constraint
    if isinstance(c, geo.Simplex):
        return 1.0
    p, rad = geo._ball_exponent(c)
    return geo._max_norm_over_ball(2.0, p, g.d, rad)


def lipschitz_bound(z: LossInstance, g: geo.GeometrySpec) -> float:
    """Conservative bound on the dual norm of any subgradient over the constraint set."""
    dn = lambda x: geo.lp_norm(np.asarray(x, dtype=float), g.dual_exponent)
    if isinstance(z, (Linear, AbsSupervised, SmoothedAbs)):
        return dn(z.x)
    if isinstance(z, HiddenCoord):
        # the norm part contributes a unit l2 vector supported on the mask
        pe = g.dual_exponent
        k = max(1.0, float(np.sum(z.alpha)))
        base = 1.0 if pe >= 2 else k ** (1.0 / pe - 0.5)
        if isinstance(z, HiddenCoordBiased):
            w = 2.0 * z.eps_bias * bias_weights(z.d) * (_radius(g) + 1.0)
            return base + dn(w)
        return base
    if isinstance(z, Regularized):
        lam_part = z.lam * _radius(g) * max(1.0, g.d ** (1.0 / g.dual_exponent - 0.5))
        return lipschitz_bound(z.inner, g) + lam_part
    if isinstance(z, MaxOfSignedLinear):
        return max(dn(x) for x in z.xs)
    raise TypeError(f"unknown loss instance {type(z).__name__}")


def smoothness_constant(z: LossInstance, g: geo.GeometrySpec | None = None) -> float | None:
    """Self-bounding constant H with ||grad l||_* <= sqrt(4 H l), or None.

    For the smoothed absolute loss phi'(u)^2 <= 4 phi(u), so H = ||x||_*^2.
    """
    if isinstance(z, SmoothedAbs):
        dn = geo.lp_norm(z.x, 2.0 if g is None else g.dual_exponent)
        return dn * dn
    return None


class BatchLoss:
    """Vectorized evaluation of a weighted sample of loss instances.

    ``evaluate(h)`` returns the weighted mean value and subgradient, matching
    ``evaluate`` applied instance by instance.
    """

    def __init__(self, sample: Sequence[LossInstance], weights=None):
        sample = list(sample)
        if not sample:
            raise ValueError("empty sample")
        self.d = sample[0].d
        if any(z.d != self.d for z in sample):
            raise ValueError("instances have different dimensions")
        n = len(sample)
        w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
        if w.shape != (n,) or np.any(w < 0):
            raise ValueError("weights must be non-negative, one per instance")
        self.weights = w / w.sum()
        self.lam = np.zeros(n)
        inner = []
        for i, z in enumerate(sample):
            while isinstance(z, Regularized):
                self.lam[i] += z.lam
                z = z.inner
            inner.append(z)
        self.kinds = {}
        for i, z in enumerate(inner):
            self.kinds.setdefault(type(z), []).append(i)
        self._groups = []
        for kind, idx in self.kinds.items():
            idx = np.array(idx)
            zs = [inner[i] for i in idx]
            if kind in (Linear, AbsSupervised, SmoothedAbs):
                X = np.array([z.x for z in zs])
                y = np.array([getattr(z, "y", 0.0) for z in zs])
                self._groups.append((kind, idx, X, y, None))
            elif kind in (HiddenCoord, HiddenCoordBiased):
                X = np.array([z.x for z in zs])
                A = np.array([z.alpha for z in zs])
                eb = np.array([getattr(z, "eps_bias", 0.0) for z in zs])
                self._groups.append((kind, idx, X, A, eb))
            else:
                self._groups.append((kind, idx, zs, None, None))

    def values(self, h) -> np.ndarray:
        return self._eval(np.asarray(h, dtype=float), want_grad=False)[0]

    def evaluate(self, h) -> LossEval:
        h = np.asarray(h, dtype=float)
        vals, grads = self._eval(h, want_grad=True)
        return LossEval(float(self.weights @ vals), self.weights @ grads)

    def value(self, h) -> float:
        return float(self.weights @ self.values(h))

    def _eval(self, h: np.ndarray, want_grad: bool):
        n = self.weights.size
        vals = np.empty(n)
        grads = np.empty((n, self.d)) if want_grad else None
        for kind, idx, a, b, c in self._groups:
            if kind is Linear:
                vals[idx] = a @ h
                if want_grad:
                    grads[idx] = a
            elif kind is AbsSupervised:
                u = a @ h - b
                vals[idx] = np.abs(u)
                if want_grad:
                    grads[idx] = np.sign(u)[:, None] * a
            elif kind is SmoothedAbs:
                u = a @ h - b
                au = np.abs(u)
                inner = au <= 0.5
                vals[idx] = np.where(inner, u * u, au - 0.25)
                if want_grad:
                    grads[idx] = np.where(inner, 2.0 * u, np.sign(u))[:, None] * a
            elif kind in (HiddenCoord, HiddenCoordBiased):
                r = b * (h[None, :] - a)
                nr = np.sqrt(np.einsum("ij,ij->i", r, r))
                v = nr.copy()
                if want_grad:
                    safe = np.where(nr > 0, nr, 1.0)
                    g = np.where((nr > 0)[:, None], r / safe[:, None], 0.0)
                if kind is HiddenCoordBiased:
                    wb = bias_weights(self.d)
                    dh = h - 1.0
                    v = v + c * float(wb @ (dh * dh))
                    if want_grad:
                        g = g + np.outer(c, 2.0 * wb * dh)
                vals[idx] = v
                if want_grad:
                    grads[idx] = g
            else:
                for j, z in zip(idx, a):
                    e = evaluate(z, h)
                    vals[j] = e.value
                    if want_grad:
                        grads[j] = e.subgrad
        if np.any(self.lam):
            vals = vals + 0.5 * self.lam * float(h @ h)
            if want_grad:
                grads = grads + np.outer(self.lam, h)
        return vals, grads
