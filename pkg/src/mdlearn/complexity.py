"""Exact desk-scale complexity calculators for finite classes.

A class is a |F| x |X| table of values in [-1, 1]. Subsets of the class are
Python-int bitmasks over rows. Every calculator checks its size caps first
and raises ``CapacityError`` instead of approximating.

Shattering uses the alpha/2 margin: a node (x, s) splits V into
V+ = {f : f(x) >= s + alpha/2} and V- = {f : f(x) <= s - alpha/2}.
For a column with distinct values a_1 < ... < a_m the witnesses
s = a_i + alpha/2 are non-dominated: any other witness gives a V- no larger
and a V+ no larger than one of them.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import CapacityError

_EPS = 1e-12


@dataclass(frozen=True)
class Caps:
    stat_rademacher_n: int = 22
    stat_fat_X: int = 12
    ldim_F: int = 64
    ldim_X: int = 12
    seq_fat_depth: int = 4
    seq_fat_X: int = 6
    seq_rademacher_n: int = 3
    seq_rademacher_X: int = 6


DEFAULT_CAPS = Caps()


class FiniteClass:
    """Finite real-valued class as a value table; duplicate rows are dropped."""

    def __init__(self, values, row_labels: Sequence | None = None, col_labels: Sequence | None = None):
        V = np.array(values, dtype=float)
        if V.ndim != 2 or V.shape[0] < 1 or V.shape[1] < 1:
            raise ValueError("value table must be a non-empty 2-d array")
        if not np.all(np.isfinite(V)) or np.any(np.abs(V) > 1 + 1e-12):
            raise ValueError("class values must lie in [-1, 1]")
        rows = list(range(V.shape[0])) if row_labels is None else list(row_labels)
        if len(rows) != V.shape[0]:
            raise ValueError("row label count mismatch")
        _, first = np.unique(V, axis=0, return_index=True)
        keep = np.sort(first)
        self.values = V[keep]
        self.values.setflags(write=False)
        self.row_labels = [rows[i] for i in keep]
        self.col_labels = list(range(V.shape[1])) if col_labels is None else list(col_labels)
        if len(self.col_labels) != V.shape[1]:
            raise ValueError("column label count mismatch")

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def n_points(self) -> int:
        return self.values.shape[1]

    @property
    def full_mask(self) -> int:
        return (1 << self.size) - 1

    def is_binary(self) -> bool:
        return bool(np.all(np.abs(self.values) == 1))

    def subclass(self, mask: int) -> "FiniteClass":
        idx = mask_indices(mask)
        return FiniteClass(self.values[idx], [self.row_labels[i] for i in idx], self.col_labels)

    def scaled(self, c: float) -> "FiniteClass":
        return FiniteClass(c * self.values, self.row_labels, self.col_labels)

    def __repr__(self):
        return f"FiniteClass(|F|={self.size}, |X|={self.n_points})"


def full_binary_class(n_points: int) -> FiniteClass:
    """All 2^|X| sign patterns."""
    vals = np.array(list(itertools.product([-1.0, 1.0], repeat=n_points)))
    return FiniteClass(vals)


def mask_indices(mask: int) -> list[int]:
    out, i = [], 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def _popcount(mask: int) -> int:
    return bin(mask).count("1")


def _check(cap: str, limit: int, requested: int):
    if requested > limit:
        raise CapacityError(cap, limit, requested)


# ---------------------------------------------------------------- trees

@dataclass
class BinaryTree:
    """Level-order tree: node i has children 2i+1 (eps = -1) and 2i+2 (eps = +1)."""
    depth: int
    nodes: np.ndarray  # instance indices, length 2^depth - 1

    def node(self, prefix: Sequence[int]) -> int:
        i = 0
        for e in prefix:
            i = 2 * i + (2 if e > 0 else 1)
        return int(self.nodes[i])

    def index(self, prefix: Sequence[int]) -> int:
        i = 0
        for e in prefix:
            i = 2 * i + (2 if e > 0 else 1)
        return i


@dataclass
class WitnessTree:
    depth: int
    values: np.ndarray

    def node(self, prefix: Sequence[int]) -> float:
        i = 0
        for e in prefix:
            i = 2 * i + (2 if e > 0 else 1)
        return float(self.values[i])


@dataclass
class SeqFatResult:
    value: int
    saturated: bool
    tree: BinaryTree | None = None
    witness: WitnessTree | None = None


# ---------------------------------------------------------------- sequential fat

class SeqFatCalculator:
    """Memoized sequential fat-shattering dimension of subclasses of F."""

    def __init__(self, F: FiniteClass, alpha: float, caps: Caps = DEFAULT_CAPS):
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        _check("seq_fat_X", caps.seq_fat_X, F.n_points)
        self.F, self.alpha, self.caps = F, alpha, caps
        self.D = caps.seq_fat_depth
        # per column: list of (witness, mask_minus, mask_plus) on the full class
        self._splits = []
        V = F.values
        for x in range(F.n_points):
            col = V[:, x]
            cuts = []
            for a in np.unique(col):
                s = a + alpha / 2.0
                minus = _mask_where(col <= s - alpha / 2.0 + _EPS)
                plus = _mask_where(col >= s + alpha / 2.0 - _EPS)
                if plus:
                    cuts.append((float(s), minus, plus))
            self._splits.append(cuts)
        self._memo: dict[int, int] = {}

    def fat(self, mask: int) -> int:
        """min(fat_alpha(V), depth cap) for the subclass V given by ``mask``."""
        if mask in self._memo:
            return self._memo[mask]
        best = 0
        if _popcount(mask) >= 2:
            ub = min(self.D, int(math.floor(math.log2(_popcount(mask)) + 1e-12)))
            for cuts in self._splits:
                for _, m_minus, m_plus in cuts:
                    lo, hi = mask & m_minus, mask & m_plus
                    if not lo or not hi:
                        continue
                    v = 1 + min(self.fat(lo), self.fat(hi))
                    if v > best:
                        best = v
                        if best >= ub:
                            break
                if best >= ub:
                    break
            best = min(best, self.D)
        self._memo[mask] = best
        return best

    def result(self, mask: int | None = None) -> SeqFatResult:
        mask = self.F.full_mask if mask is None else mask
        v = self.fat(mask)
        saturated = v >= self.D and self.D < int(math.floor(math.log2(_popcount(mask)) + 1e-12))
        tree, wit = self.certificate(mask, v)
        return SeqFatResult(v, saturated, tree, wit)

    def certificate(self, mask: int, depth: int):
        if depth == 0:
            return None, None
        nodes = np.full(2 ** depth - 1, -1, dtype=int)
        wit = np.full(2 ** depth - 1, np.nan)

        def build(i, m, k):
            if k == 0:
                return
            for x, cuts in enumerate(self._splits):
                for s, m_minus, m_plus in cuts:
                    lo, hi = m & m_minus, m & m_plus
                    if lo and hi and min(self.fat(lo), self.fat(hi)) >= k - 1:
                        nodes[i], wit[i] = x, s
                        build(2 * i + 1, lo, k - 1)
                        build(2 * i + 2, hi, k - 1)
                        return
            raise AssertionError("no split realizes the memoized value")

        build(0, mask, depth)
        return BinaryTree(depth, nodes), WitnessTree(depth, wit)


def _mask_where(b: np.ndarray) -> int:
    m = 0
    for i in np.nonzero(b)[0]:
        m |= 1 << int(i)
    return m


def seq_fat(F: FiniteClass, alpha: float, caps: Caps = DEFAULT_CAPS) -> SeqFatResult:
    """Sequential fat-shattering dimension at scale alpha, with a certificate."""
    return SeqFatCalculator(F, alpha, caps).result()


def verify_seq_shattering(F: FiniteClass, alpha: float, tree: BinaryTree, witness: WitnessTree) -> bool:
    """Check that every sign path through the tree is realized with margin alpha/2."""
    d = tree.depth
    V = F.values
    for eps in itertools.product([-1, 1], repeat=d):
        ok = np.ones(F.size, dtype=bool)
        for t in range(d):
            x = tree.node(eps[:t])
            s = witness.node(eps[:t])
            if x < 0:
                return False
            ok &= eps[t] * (V[:, x] - s) >= alpha / 2.0 - _EPS
        if not ok.any():
            return False
    return True


# ---------------------------------------------------------------- Littlestone

@dataclass
class LdimResult:
    value: int
    tree: BinaryTree | None = None


def littlestone_dim(F: FiniteClass, caps: Caps = DEFAULT_CAPS) -> LdimResult:
    """Littlestone dimension of a binary class by memoized recursion."""
    if not F.is_binary():
        raise ValueError("Littlestone dimension needs a {-1, +1}-valued class")
    _check("ldim_F", caps.ldim_F, F.size)
    _check("ldim_X", caps.ldim_X, F.n_points)
    cols = [(_mask_where(F.values[:, x] < 0), _mask_where(F.values[:, x] > 0)) for x in range(F.n_points)]

    @lru_cache(maxsize=None)
    def ldim(mask: int) -> int:
        best = 0
        for neg, pos in cols:
            a, b = mask & neg, mask & pos
            if a and b:
                best = max(best, 1 + min(ldim(a), ldim(b)))
        return best

    v = ldim(F.full_mask)
    if v == 0:
        return LdimResult(0, None)
    nodes = np.full(2 ** v - 1, -1, dtype=int)

    def build(i, m, k):
        if k == 0:
            return
        for x, (neg, pos) in enumerate(cols):
            a, b = m & neg, m & pos
            if a and b and min(ldim(a), ldim(b)) >= k - 1:
                nodes[i] = x
                build(2 * i + 1, a, k - 1)
                build(2 * i + 2, b, k - 1)
                return

    build(0, F.full_mask, v)
    return LdimResult(v, BinaryTree(v, nodes))


# ---------------------------------------------------------------- statistical fat

@dataclass
class StatFatResult:
    value: int
    points: tuple = ()
    witness: tuple = ()


def stat_fat(F: FiniteClass, alpha: float, caps: Caps = DEFAULT_CAPS) -> StatFatResult:
    """Largest sample alpha-shattered by F (witness from the non-dominated set)."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    _check("stat_fat_X", caps.stat_fat_X, F.n_points)
    V = F.values
    ub = int(math.floor(math.log2(F.size) + 1e-12))
    cand = []
    for x in range(F.n_points):
        col = V[:, x]
        c = []
        for a in np.unique(col):
            s = a + alpha / 2.0
            minus = _mask_where(col <= a + _EPS)
            plus = _mask_where(col >= a + alpha - _EPS)
            if plus:
                c.append((float(s), minus, plus))
        cand.append(c)
    best = StatFatResult(0)

    def dfs(start, cells, pts, wit):
        nonlocal best
        if len(pts) > best.value:
            best = StatFatResult(len(pts), tuple(pts), tuple(wit))
        if best.value >= ub:
            return True
        for x in range(start, F.n_points):
            if len(pts) + 1 + (F.n_points - x - 1) <= best.value:
                break
            for s, minus, plus in cand[x]:
                new = []
                for c in cells:
                    a, b = c & minus, c & plus
                    if not a or not b:
                        break
                    new.extend((a, b))
                else:
                    if dfs(x + 1, new, pts + [x], wit + [s]):
                        return True
        return False

    dfs(0, [F.full_mask], [], [])
    return best


# ---------------------------------------------------------------- Rademacher

def _all_signs(n: int) -> np.ndarray:
    return 1.0 - 2.0 * ((np.arange(2 ** n)[:, None] >> np.arange(n)[None, :]) & 1)


def stat_rademacher(F: FiniteClass, sample: Sequence[int], caps: Caps = DEFAULT_CAPS) -> float:
    """E_eps sup_f (1/n) sum_i eps_i f(z_i), exact over all 2^n sign vectors."""
    n = len(sample)
    if n < 1:
        raise ValueError("sample must be non-empty")
    _check("stat_rademacher_n", caps.stat_rademacher_n, n)
    M = F.values[:, list(sample)]  # |F| x n
    total = 0.0
    chunk = 1 << min(n, 16)
    for start in range(0, 2 ** n, chunk):
        idx = np.arange(start, min(start + chunk, 2 ** n))
        S = 1.0 - 2.0 * ((idx[:, None] >> np.arange(n)[None, :]) & 1)
        total += float(np.sum(np.max(S @ M.T, axis=1)))
    return total / (2 ** n * n)


@dataclass
class SeqRadResult:
    value: float
    tree: BinaryTree


def seq_rademacher(F: FiniteClass, n: int, caps: Caps = DEFAULT_CAPS) -> SeqRadResult:
    """sup over X-valued trees of depth n of E_eps sup_f (1/n) sum_t eps_t f(z_t(eps)).

    Computed exactly by backward induction on the vector of running sums:
    V_0(S) = max_f S_f,  V_k(S) = max_x (V_{k-1}(S + f(x)) + V_{k-1}(S - f(x))) / 2.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    _check("seq_rademacher_n", caps.seq_rademacher_n, n)
    _check("seq_rademacher_X", caps.seq_rademacher_X, F.n_points)
    cols = [F.values[:, x] for x in range(F.n_points)]
    memo: dict = {}

    def V(k: int, S: np.ndarray) -> tuple[float, int]:
        if k == 0:
            return float(S.max()), -1
        key = (k, S.tobytes())
        if key in memo:
            return memo[key]
        best, arg = -math.inf, -1
        for x, c in enumerate(cols):
            v = 0.5 * (V(k - 1, S + c)[0] + V(k - 1, S - c)[0])
            if v > best + 1e-15:
                best, arg = v, x
        memo[key] = (best, arg)
        return best, arg

    S0 = np.zeros(F.size)
    val = V(n, S0)[0] / n
    nodes = np.full(2 ** n - 1, -1, dtype=int)

    def build(i, k, S):
        if k == 0:
            return
        _, x = V(k, S)
        nodes[i] = x
        build(2 * i + 1, k - 1, S - cols[x])
        build(2 * i + 2, k - 1, S + cols[x])

    build(0, n, S0)
    return SeqRadResult(val, BinaryTree(n, nodes))


def tree_rademacher(F: FiniteClass, tree: BinaryTree) -> float:
    """E_eps sup_f (1/n) sum_t eps_t f(z_t(eps)) for a fixed tree."""
    n = tree.depth
    total = 0.0
    for eps in itertools.product([-1, 1], repeat=n):
        s = np.zeros(F.size)
        for t in range(n):
            s += eps[t] * F.values[:, tree.node(eps[:t])]
        total += s.max()
    return total / (2 ** n * n)
