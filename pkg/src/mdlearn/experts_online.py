"""Exponential weights, the Fat-SOA learner and generated experts.

Grid: B_alpha = {-1 + (2k+1) alpha / 2 : (2k+1) alpha <= 4}; the floor
|a|_alpha is the nearest grid level with ties going to the smaller one, and
V(r, x) = {f in V : |f(x)|_alpha = r}. This partition of V by level is
exact for every alpha, including values near +-1 that fall outside the
half-open bins (r - alpha/2, r + alpha/2].
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .complexity import DEFAULT_CAPS, Caps, FiniteClass, SeqFatCalculator, _mask_where
from .errors import CapacityError, ProtocolError

__all__ = [
    "FiniteClass", "grid", "discretize", "ExpertSet", "EwaResult", "ewa_run", "ewa_bound",
    "seq_fat_of_subclass", "fat_soa_run", "SoaResult", "generate_experts", "ExpertBank",
    "agnostic_supervised_run", "agnostic_bound", "multiscale_prior",
]


# ---------------------------------------------------------------- grid

def grid(alpha: float) -> np.ndarray:
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    k = np.arange(int(math.floor((4.0 / alpha - 1.0) / 2.0 + 1e-12)) + 1)
    return -1.0 + (2 * k + 1) * alpha / 2.0


def _floor_index(a, levels: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    dist = np.abs(a[..., None] - levels)
    m = dist.min(axis=-1, keepdims=True)
    # first index within round-off of the minimum: the smaller level wins ties
    return np.argmax(dist <= m + 1e-12, axis=-1)


def discretize(a, alpha: float):
    """Nearest point of B_alpha, ties broken toward the smaller point."""
    levels = grid(alpha)
    out = levels[_floor_index(a, levels)]
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------- EWA

@dataclass
class ExpertSet:
    priors: np.ndarray
    predictions: np.ndarray | None = None  # (N, n) when experts are prediction streams

    def __post_init__(self):
        p = np.asarray(self.priors, dtype=float)
        if p.ndim != 1 or p.size < 1 or np.any(p <= 0) or p.sum() > 1 + 1e-9:
            raise ValueError("priors must be positive with sum <= 1")
        self.priors = p


@dataclass
class EwaResult:
    expected_losses: np.ndarray   # per round, sum_i w_i f_i
    weights: np.ndarray           # (n, N) weights used in each round

    @property
    def total(self) -> float:
        return float(self.expected_losses.sum())


def ewa_run(losses, priors=None, eta: float | None = None) -> EwaResult:
    """Exponentially weighted average forecaster on an (n, N) loss matrix in [0, 1].

    Weights start at the normalized priors and follow w_i <- w_i exp(-eta f_i) / Z
    with eta = 1/sqrt(n) by default; computed in the log domain.
    """
    F = np.asarray(losses, dtype=float)
    if F.ndim != 2 or F.shape[0] < 1 or F.shape[1] < 1:
        raise ValueError("losses must be an (n, N) matrix")
    if np.any(F < 0) or np.any(F > 1) or not np.all(np.isfinite(F)):
        raise ValueError("losses must lie in [0, 1]")
    n, N = F.shape
    p = np.full(N, 1.0 / N) if priors is None else ExpertSet(priors).priors
    if p.size != N:
        raise ValueError("one prior per expert required")
    eta = 1.0 / math.sqrt(n) if eta is None else eta
    logw = np.log(p) - math.log(p.sum())
    W = np.empty((n, N))
    exp_loss = np.empty(n)
    for t in range(n):
        w = np.exp(logw - logsumexp(logw))
        W[t] = w
        exp_loss[t] = float(w @ F[t])
        logw = logw - eta * F[t]
    return EwaResult(exp_loss, W)


def ewa_bound(n: int, best_loss: float, prior: float) -> float:
    """Best cumulative loss + sqrt(n)/8 + sqrt(n) ln(1/p_i)."""
    return best_loss + math.sqrt(n) / 8.0 + math.sqrt(n) * math.log(1.0 / prior)


# ---------------------------------------------------------------- Fat-SOA

def _check_fat_capacity(F: FiniteClass, caps: Caps):
    need = int(math.floor(math.log2(F.size) + 1e-12))
    if need > caps.seq_fat_depth:
        # the capped calculator could not rank level sets exactly
        raise CapacityError("seq_fat_depth", caps.seq_fat_depth, need)


def seq_fat_of_subclass(F: FiniteClass, mask: int, alpha: float, caps: Caps = DEFAULT_CAPS) -> int:
    """Exact sequential fat dimension of the rows of F selected by ``mask`` (-1 if empty)."""
    if mask == 0:
        return -1
    _check_fat_capacity(F, caps)
    return SeqFatCalculator(F, alpha, caps).fat(mask)


class _LevelSets:
    """Shared per-(class, alpha) machinery: level masks and SOA predictions."""

    def __init__(self, F: FiniteClass, alpha: float, caps: Caps):
        _check_fat_capacity(F, caps)
        self.F, self.alpha = F, alpha
        self.levels = grid(alpha)
        self.calc = SeqFatCalculator(F, alpha, caps)
        idx = _floor_index(F.values, self.levels)  # (|F|, |X|)
        self.bins = [[_mask_where(idx[:, x] == r) for r in range(self.levels.size)]
                     for x in range(F.n_points)]
        self._pred = {}

    def fat(self, mask: int) -> int:
        return -1 if mask == 0 else self.calc.fat(mask)

    def argmax_levels(self, mask: int, x: int) -> tuple[list[int], list[int]]:
        fats = [self.fat(mask & b) for b in self.bins[x]]
        top = max(fats)
        return [r for r, f in enumerate(fats) if f == top], fats

    def predict(self, mask: int, x: int) -> float:
        key = (mask, x)
        if key not in self._pred:
            R, _ = self.argmax_levels(mask, x)
            self._pred[key] = float(np.mean(self.levels[R]))
        return self._pred[key]


@dataclass
class SoaResult:
    predictions: np.ndarray
    mistake_count: int
    updates: list = field(default_factory=list)  # (t, fat before, fat after)
    argmax_sets: list = field(default_factory=list)
    fats: list = field(default_factory=list)     # (fat of V_t, largest level-set fat) per round


def fat_soa_run(F: FiniteClass, alpha: float, stream: Sequence[tuple[int, float]],
                caps: Caps = DEFAULT_CAPS, _levels: _LevelSets | None = None) -> SoaResult:
    """Realizable Fat-SOA over a stream of (instance index, label)."""
    ls_ = _levels or _LevelSets(F, alpha, caps)
    V = F.full_mask
    preds, updates, argsets, fats = [], [], [], []
    mistakes = 0
    for t, (x, y) in enumerate(stream):
        R, lf = ls_.argmax_levels(V, x)
        argsets.append(tuple(R))
        fats.append((ls_.fat(V), max(lf)))
        p = float(np.mean(ls_.levels[R]))
        preds.append(p)
        if abs(p - y) > alpha:
            mistakes += 1
            r = int(_floor_index(y, ls_.levels))
            V_new = V & ls_.bins[x][r]
            if V_new == 0:
                raise ProtocolError(f"round {t}: label {y} is not realizable by the version space")
            updates.append((t, ls_.fat(V), ls_.fat(V_new)))
            V = V_new
    return SoaResult(np.array(preds), mistakes, updates, argsets, fats)


# ---------------------------------------------------------------- experts

def expert_count(n: int, fat: int, n_levels: int) -> int:
    return sum(math.comb(n, L) * (n_levels - 1) ** L for L in range(fat + 1))


@dataclass
class ExpertBank:
    """Experts running Fat-SOA with forced labels at chosen rounds.

    ``forced[e, t] = k > 0`` means expert e plays, at round t, the k-th level
    of B_alpha after removing the level its own SOA prediction falls in; its
    version space is then restricted to that level at x_t (frozen if this
    would empty it).
    """
    F: FiniteClass
    alpha: float
    n: int
    fat: int
    forced: np.ndarray
    levels_obj: _LevelSets = field(repr=False)
    frozen_events: int = 0

    @property
    def size(self) -> int:
        return self.forced.shape[0]

    def predictions(self, xs: Sequence[int]) -> np.ndarray:
        """(N, len(xs)) predictions; round t only uses x_1..x_t."""
        xs = list(xs)
        if len(xs) > self.n:
            raise ValueError("stream longer than the expert horizon")
        lv = self.levels_obj
        levels = lv.levels
        N = self.size
        masks = [self.F.full_mask]
        mask_id = {self.F.full_mask: 0}
        state = np.zeros(N, dtype=np.int64)
        P = np.empty((N, len(xs)))
        frozen = 0
        K = levels.size
        for t, x in enumerate(xs):
            uniq = np.unique(state)
            pred = {}
            base = {}
            for s in uniq:
                p = lv.predict(masks[s], x)
                pred[s] = p
                base[s] = int(_floor_index(p, levels))
            P[:, t] = np.array([pred[s] for s in uniq])[np.searchsorted(uniq, state)]
            k = self.forced[:, t]
            hit = np.nonzero(k > 0)[0]
            if hit.size:
                key = state[hit] * K + k[hit]
                ukeys, inv = np.unique(key, return_inverse=True)
                new_state = np.empty(ukeys.size, dtype=np.int64)
                yval = np.empty(ukeys.size)
                for j, kk in enumerate(ukeys):
                    s, off = divmod(int(kk), K)
                    others = [r for r in range(K) if r != base[s]]
                    r = others[off - 1]
                    yval[j] = levels[r]
                    m = masks[s] & lv.bins[x][r]
                    if m == 0:
                        m = masks[s]
                        frozen += int(np.sum(inv == j))
                    if m not in mask_id:
                        mask_id[m] = len(masks)
                        masks.append(m)
                    new_state[j] = mask_id[m]
                P[hit, t] = yval[inv]
                state[hit] = new_state[inv]
        self.frozen_events = frozen
        return P


def generate_experts(F: FiniteClass, alpha: float, n: int, cap: int = 100_000,
                     caps: Caps = DEFAULT_CAPS) -> ExpertBank:
    """All experts (L <= fat, rounds i_1 < ... < i_L, one of |B_alpha| - 1 labels each)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    lv = _LevelSets(F, alpha, caps)
    fat = lv.fat(F.full_mask)
    K = lv.levels.size
    count = expert_count(n, fat, K)
    if count > cap:
        raise CapacityError("experts", cap, count)
    forced = np.zeros((count, n), dtype=np.int16)
    e = 0
    for L in range(fat + 1):
        if L and K == 1:
            break
        for rounds in itertools.combinations(range(n), L):
            for offs in itertools.product(range(1, K), repeat=L):
                forced[e, list(rounds)] = offs
                e += 1
    assert e == count
    return ExpertBank(F, alpha, n, fat, forced, lv)


# ---------------------------------------------------------------- agnostic learning

def multiscale_prior(i: int) -> float:
    return 6.0 / (math.pi ** 2 * i * i)


def agnostic_bound(alpha: float, fat: int, n: int) -> float:
    """alpha + sqrt(fat ln(2n/alpha) / n) + (3 + 2 ln ln(1/alpha)) / sqrt(n)."""
    return (alpha + math.sqrt(fat * math.log(2.0 * n / alpha) / n)
            + (3.0 + 2.0 * math.log(math.log(1.0 / alpha))) / math.sqrt(n))


@dataclass
class AgnosticResult:
    expected_losses: np.ndarray   # per round, absolute loss of the mixture
    comparator_losses: np.ndarray
    regret: float
    bound: float
    bound_alpha: float
    scales: list                  # (i, alpha, fat, n_experts)
    frozen_events: int


def agnostic_supervised_run(F: FiniteClass, stream: Sequence[tuple[int, float]], n: int | None = None,
                            max_scale: int = 10, cap: int = 100_000,
                            caps: Caps = DEFAULT_CAPS) -> AgnosticResult:
    """EWA over experts generated at alpha_i = 2^-i, i = 1..max_scale.

    Each scale's experts share the prior 6/(pi^2 i^2) uniformly. Losses are
    |prediction - y| in [0, 2]; EWA sees them halved. Regret is per round in
    absolute-loss units, against the best function of F in hindsight.
    """
    stream = list(stream)
    n = len(stream) if n is None else n
    if n != len(stream) or n < 1:
        raise ValueError("stream length must equal n >= 1")
    xs = [x for x, _ in stream]
    ys = np.array([y for _, y in stream], dtype=float)
    preds, priors, scales = [], [], []
    total = 0
    frozen = 0
    banks = []
    for i in range(1, max_scale + 1):
        a = 2.0 ** -i
        lv = _LevelSets(F, a, caps)
        fat = lv.fat(F.full_mask)
        cnt = expert_count(n, fat, lv.levels.size)
        total += cnt
        if total > cap:
            raise CapacityError("experts", cap, total)
        banks.append((i, a, fat))
    for i, a, fat in banks:
        bank = generate_experts(F, a, n, cap, caps)
        P = bank.predictions(xs)
        frozen += bank.frozen_events
        preds.append(P)
        priors.append(np.full(bank.size, multiscale_prior(i) / bank.size))
        scales.append((i, a, fat, bank.size))
    P = np.vstack(preds)
    p = np.concatenate(priors)
    losses = np.abs(P - ys[None, :]).T / 2.0
    res = ewa_run(losses, p, 1.0 / math.sqrt(n))
    exp_abs = 2.0 * res.expected_losses
    comp = np.abs(F.values[:, xs] - ys[None, :])
    best = int(np.argmin(comp.sum(axis=1)))
    regret = float(exp_abs.mean() - comp[best].mean())
    bvals = [(agnostic_bound(a, fat, n), a) for _, a, fat, _ in scales]
    b, ba = min(bvals)
    return AgnosticResult(exp_abs, comp[best], regret, b, ba, scales, frozen)
