"""Lower-bound data generators and the resisting first-order oracle."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from . import geometry as geo
from . import losses as ls
from .complexity import DEFAULT_CAPS, BinaryTree, Caps, FiniteClass, WitnessTree, seq_fat, verify_seq_shattering
from .errors import ProtocolError

__all__ = [
    "hidden_coordinate_stream", "unobserved_coordinates", "PopulationRisk", "hidden_population_risk",
    "hidden_population_minimum", "BlockAdversaryPlan", "block_sign_stream", "BlockStream",
    "VectorTree", "level_tree", "linear_tree_stream", "tree_signs", "tree_expected_sup",
    "ResistingOracle", "orthonormal_pieces", "min_value", "resisting_value",
]

_MC_DRAWS = 100_000
_EXACT_SUPPORT = 16


# ---------------------------------------------------------------- hidden coordinate

def hidden_coordinate_stream(d: int, n: int, bias: bool = False, rng_seed=None,
                             eps: float = 0.01) -> list:
    """n i.i.d. instances with x = 0 and a uniform 0/1 mask over d coordinates."""
    if d < 1 or n < 1:
        raise ValueError("d and n must be >= 1")
    rng = np.random.default_rng(rng_seed)
    masks = rng.integers(0, 2, size=(n, d)).astype(float)
    zero = np.zeros(d)
    if bias:
        return [ls.HiddenCoordBiased(zero, a, eps) for a in masks]
    return [ls.HiddenCoord(zero, a) for a in masks]


def unobserved_coordinates(sample: Sequence) -> np.ndarray:
    """Indices j with alpha_j = 0 in every instance."""
    A = np.array([z.alpha for z in sample])
    return np.nonzero(A.max(axis=0) == 0)[0]


@dataclass(frozen=True)
class PopulationRisk:
    value: float
    stderr: float
    method: str  # "exact" or "monte-carlo"


def _masked_norm_mean(h2: np.ndarray, rng, draws: int) -> tuple[float, float, str]:
    """E sqrt(sum_i a_i h2_i) with a_i i.i.d. fair bits."""
    supp = np.nonzero(h2 > 0)[0]
    w = h2[supp]
    k = supp.size
    if k == 0:
        return 0.0, 0.0, "exact"
    if k <= _EXACT_SUPPORT:
        idx = np.arange(2 ** k)
        bits = ((idx[:, None] >> np.arange(k)[None, :]) & 1).astype(float)
        return float(np.mean(np.sqrt(bits @ w))), 0.0, "exact"
    # one 256-entry table of partial sums per byte of mask bits
    nbytes = (k + 7) // 8
    wp = np.zeros(8 * nbytes)
    wp[:k] = w
    bits = ((np.arange(256)[:, None] >> (7 - np.arange(8))[None, :]) & 1).astype(float)
    tables = bits @ wp.reshape(nbytes, 8).T  # (256, nbytes)
    cols = np.arange(nbytes)
    total = total2 = 0.0
    done = 0
    chunk = 20_000
    while done < draws:
        b = min(chunk, draws - done)
        raw = rng.integers(0, 256, size=(b, nbytes), dtype=np.uint8)
        v = np.sqrt(tables[raw, cols].sum(axis=1))
        total += float(v.sum())
        total2 += float(v @ v)
        done += b
    mean = total / draws
    var = max(total2 / draws - mean * mean, 0.0)
    return mean, math.sqrt(var / (draws - 1)), "monte-carlo"


def hidden_population_risk(h, eps: float = 0.0, rng_seed=None, draws: int = _MC_DRAWS) -> PopulationRisk:
    """Risk of h under the uniform-mask distribution with x = 0, plus the bias term.

    Exact enumeration when h has at most 16 non-zero coordinates, Monte Carlo
    over ``draws`` masks otherwise. The bias term is deterministic.
    """
    h = np.asarray(h, dtype=float)
    mean, se, method = _masked_norm_mean(h * h, np.random.default_rng(rng_seed), draws)
    bias = eps * float(ls.bias_weights(h.size) @ (h - 1.0) ** 2) if eps else 0.0
    return PopulationRisk(mean + bias, se, method)


def hidden_population_minimum(d: int, eps: float) -> float:
    """Attained at h = 0: eps (1 - 2^-d)."""
    return eps * (1.0 - 2.0 ** -d)


# ---------------------------------------------------------------- block-sign adversary

@dataclass
class BlockAdversaryPlan:
    F: FiniteClass
    alpha: float
    tree: BinaryTree
    witness: WitnessTree
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("block size must be >= 1")
        if self.tree is None or self.tree.depth < 1:
            raise ValueError("plan needs a shattered tree of depth >= 1")
        if not verify_seq_shattering(self.F, self.alpha, self.tree, self.witness):
            raise ValueError("tree is not alpha-shattered by the class with this witness")

    @property
    def d(self) -> int:
        return self.tree.depth

    @property
    def n(self) -> int:
        return self.k * self.d

    @classmethod
    def from_class(cls, F: FiniteClass, alpha: float, n: int, caps: Caps = DEFAULT_CAPS) -> "BlockAdversaryPlan":
        res = seq_fat(F, alpha, caps)
        if res.value < 1:
            raise ValueError("class does not shatter any tree at this scale")
        if n % res.value:
            raise ValueError(f"n={n} is not a multiple of the tree depth {res.value}")
        return cls(F, alpha, res.tree, res.witness, n // res.value)

    def lower_bound(self) -> float:
        """alpha sqrt(d / (8 n))."""
        return self.alpha * math.sqrt(self.d / (8.0 * self.n))


@dataclass
class BlockStream:
    xs: np.ndarray       # instance indices
    ys: np.ndarray       # labels in {-1, +1}
    block_signs: np.ndarray

    def __iter__(self):
        return iter(zip(self.xs.tolist(), self.ys.tolist()))

    def __len__(self):
        return self.xs.size


def block_sign_stream(plan: BlockAdversaryPlan, rng_seed=None) -> BlockStream:
    """Uniform +-1 labels; block j is played at the tree node reached by earlier block signs.

    A block's sign is the sign of its label sum, with ties going to +1.
    """
    rng = np.random.default_rng(rng_seed)
    ys = rng.choice(np.array([-1.0, 1.0]), size=plan.n)
    xs = np.empty(plan.n, dtype=int)
    signs = np.empty(plan.d, dtype=int)
    for j in range(plan.d):
        sl = slice(j * plan.k, (j + 1) * plan.k)
        xs[sl] = plan.tree.node(signs[:j])
        signs[j] = 1 if ys[sl].sum() >= 0 else -1
    return BlockStream(xs, ys, signs)


# ---------------------------------------------------------------- linear tree adversary

@dataclass
class VectorTree:
    """Tree of dual vectors in level order: node i has children 2i+1 (-1), 2i+2 (+1)."""
    depth: int
    vectors: np.ndarray  # (2^depth - 1, d)

    def __post_init__(self):
        V = np.asarray(self.vectors, dtype=float)
        if V.ndim != 2 or V.shape[0] != 2 ** self.depth - 1:
            raise ValueError("vectors must have shape (2^depth - 1, d)")
        self.vectors = V

    def node(self, prefix: Sequence[int]) -> np.ndarray:
        i = 0
        for e in prefix:
            i = 2 * i + (2 if e > 0 else 1)
        return self.vectors[i]


@dataclass
class _LevelTree:
    rows: np.ndarray  # (depth, d)

    @property
    def depth(self) -> int:
        return self.rows.shape[0]

    def node(self, prefix: Sequence[int]) -> np.ndarray:
        return self.rows[len(prefix)]


def level_tree(rows) -> _LevelTree:
    """Tree whose nodes depend only on the depth."""
    R = np.asarray(rows, dtype=float)
    if R.ndim != 2 or R.shape[0] < 1:
        raise ValueError("rows must be a non-empty (depth, d) array")
    return _LevelTree(R)


def tree_signs(n: int, rng_seed=None) -> np.ndarray:
    return np.random.default_rng(rng_seed).choice(np.array([-1, 1]), size=n)


def linear_tree_stream(u, n: int, rng_seed=None) -> list:
    """x_t = eps_t u_t(eps_1..eps_{t-1}) along a Rademacher path."""
    if n < 1 or n > u.depth:
        raise ValueError("n must be in [1, tree depth]")
    eps = tree_signs(n, rng_seed)
    return [ls.Linear(eps[t] * u.node(eps[:t])) for t in range(n)]


def tree_expected_sup(u, n: int, g: geo.GeometrySpec) -> float:
    """E_eps sup_{h in H} <h, -(1/n) sum_t eps_t u_t(eps)> by enumeration of all 2^n paths."""
    from .md_engine import linear_minimizer
    if n > 20:
        raise ValueError("enumeration limited to n <= 20")
    total = 0.0
    for eps in itertools.product([-1, 1], repeat=n):
        s = sum(eps[t] * u.node(eps[:t]) for t in range(n))
        total += -linear_minimizer(g, np.asarray(s, dtype=float))[0]
    return total / (2 ** n * n)


# ---------------------------------------------------------------- resisting oracle

def orthonormal_pieces(m: int, d: int | None = None) -> list:
    d = m if d is None else d
    if d < m:
        raise ValueError("need d >= m for orthonormal pieces")
    return [(np.eye(d)[i], 0.0) for i in range(m)]


@dataclass
class ResistingOracle:
    """First-order oracle that builds a max of signed linear pieces adaptively.

    On each query h it commits the remaining piece with the largest
    |<h, -x_i> + s_i| (lowest index on ties) with sign +1 when that quantity
    is >= 0, and answers with the value and subgradient of the max of the
    committed pieces.
    """
    pieces: list
    m: int
    seed: int | None = None
    _remaining: list = field(init=False)
    _order: list = field(init=False, default_factory=list)
    _signs: list = field(init=False, default_factory=list)
    queries: list = field(init=False, default_factory=list)
    answers: list = field(init=False, default_factory=list)
    _final: ls.MaxOfSignedLinear | None = field(init=False, default=None)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if len(self.pieces) < self.m:
            raise ValueError("need at least m pieces")
        self._X = np.array([np.asarray(x, dtype=float) for x, _ in self.pieces])
        self._s = np.array([float(s) for _, s in self.pieces])
        self._remaining = list(range(len(self.pieces)))

    @property
    def t(self) -> int:
        return len(self._order)

    def _current(self) -> ls.MaxOfSignedLinear:
        idx = self._order
        return ls.MaxOfSignedLinear(np.array(self._signs, dtype=float), self._X[idx], self._s[idx])

    def query(self, h) -> ls.LossEval:
        if self._final is not None or self.t >= self.m:
            raise ProtocolError(f"oracle accepts at most m={self.m} queries")
        h = np.asarray(h, dtype=float)
        rem = np.array(self._remaining)
        v = self._s[rem] - self._X[rem] @ h
        j = int(np.argmax(np.abs(v)))
        i = int(rem[j])
        self._order.append(i)
        self._signs.append(1 if v[j] >= 0 else -1)
        self._remaining.remove(i)
        ans = ls.evaluate(self._current(), h)
        self.queries.append(h.copy())
        self.answers.append(ans)
        return ans

    __call__ = query

    def finalize(self) -> ls.MaxOfSignedLinear:
        if self._final is None:
            if self.t == 0:
                raise ProtocolError("no queries were made")
            self._final = self._current()
        return self._final

    @property
    def signs(self) -> np.ndarray:
        return np.array(self._signs, dtype=int)

    def transcript(self) -> str:
        return json.dumps({
            "seed": self.seed,
            "pieces": [[np.asarray(x, dtype=float).tolist(), float(s)] for x, s in self.pieces],
            "order": list(self._order),
            "signs": list(self._signs),
            "queries": [q.tolist() for q in self.queries],
            "answers": [[a.value, a.subgrad.tolist()] for a in self.answers],
        })


def _is_orthonormal(X: np.ndarray) -> bool:
    return np.allclose(X @ X.T, np.eye(X.shape[0]), atol=1e-14)


def min_value(z: ls.MaxOfSignedLinear, g: geo.GeometrySpec) -> float:
    """inf over H of max_i eps_i (s_i - <h, x_i>) on a Euclidean ball."""
    if g.family is not geo.Family.EUCLIDEAN or not isinstance(g.constraint, geo.L2Ball):
        raise ValueError("min_value supports Euclidean l2 balls")
    R = g.constraint.radius
    return -resisting_value(z.xs, z.eps, z.s, R)


def resisting_value(xs, eps, s, radius: float = 1.0) -> float:
    """sup_{||h|| <= radius} min_i eps_i (<h, x_i> - s_i).

    Closed form R / sqrt(m) for orthonormal pieces with s = 0; otherwise an
    SLSQP epigraph solve started from the normalized sign combination.
    """
    X = np.atleast_2d(np.asarray(xs, dtype=float))
    e = np.asarray(eps, dtype=float).reshape(-1)
    s = np.asarray(s, dtype=float).reshape(-1)
    m, d = X.shape
    if np.all(s == 0) and _is_orthonormal(X):
        return radius / math.sqrt(m)
    A = e[:, None] * X
    b = e * s
    h0 = A.sum(axis=0)
    nh = np.linalg.norm(h0)
    h0 = radius * h0 / nh if nh > 0 else np.zeros(d)
    u0 = np.concatenate([h0, [float(np.min(A @ h0 - b))]])
    cons = [{"type": "ineq", "fun": lambda u: A @ u[:d] - b - u[d],
             "jac": lambda u: np.hstack([A, -np.ones((m, 1))])},
            {"type": "ineq", "fun": lambda u: radius ** 2 - float(u[:d] @ u[:d]),
             "jac": lambda u: np.concatenate([-2 * u[:d], [0.0]])}]
    res = minimize(lambda u: -u[d], u0, jac=lambda u: np.concatenate([np.zeros(d), [-1.0]]),
                   constraints=cons, method="SLSQP", options={"ftol": 1e-15, "maxiter": 1000})
    h = res.x[:d]
    nh = np.linalg.norm(h)
    if nh > radius:
        h *= radius / nh
    return float(np.min(A @ h - b))
