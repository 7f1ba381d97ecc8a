import itertools
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mdlearn import complexity as cx
from mdlearn.errors import CapacityError

TWO_CONST = cx.FiniteClass([[1.0, 1.0, 1.0], [-1.0, -1.0, -1.0]])
WIT_GRID = np.linspace(-1.5, 1.5, 97)  # step 1/32, contains all quarter-grid midpoints


def _quarter_class(rng, rows, cols):
    return cx.FiniteClass(rng.integers(-4, 5, size=(rows, cols)) / 4.0)


# ---------------------------------------------------------------- independent oracles

def _fat_oracle(V, alpha, depth_cap=4):
    """Sequential fat by direct tree search with witnesses on a fine grid."""
    V = np.asarray(V)
    half = alpha / 2

    @lru_cache(maxsize=None)
    def shatters(rows, depth):
        if depth == 0:
            return len(rows) > 0
        idx = np.array(rows)
        for x in range(V.shape[1]):
            col = V[idx, x]
            for s in WIT_GRID:
                plus = tuple(idx[col >= s + half - 1e-12])
                minus = tuple(idx[col <= s - half + 1e-12])
                if plus and minus and shatters(plus, depth - 1) and shatters(minus, depth - 1):
                    return True
        return False

    d = 0
    while d < depth_cap and shatters(tuple(range(V.shape[0])), d + 1):
        d += 1
    return d


def _stat_fat_exhaustive(V, alpha, grid):
    n = V.shape[1]
    best = 0
    for k in range(1, n + 1):
        found = False
        for pts in itertools.combinations(range(n), k):
            sub = V[:, pts]
            for s in itertools.product(grid, repeat=k):
                s = np.array(s)
                up = np.all((sub >= s + alpha / 2 - 1e-12) | (sub <= s - alpha / 2 + 1e-12), axis=1)
                signs = {tuple(np.where(r >= s, 1, -1)) for r, ok in zip(sub, up) if ok}
                if len(signs) == 2 ** k:
                    found = True
                    break
            if found:
                break
        if not found:
            break
        best = k
    return best


def _ldim_oracle(V):
    V = np.asarray(V)

    @lru_cache(maxsize=None)
    def shatters(rows, depth):
        if depth == 0:
            return len(rows) > 0
        idx = np.array(rows)
        for x in range(V.shape[1]):
            p = tuple(idx[V[idx, x] > 0])
            m = tuple(idx[V[idx, x] < 0])
            if p and m and shatters(p, depth - 1) and shatters(m, depth - 1):
                return True
        return False

    d = 0
    while shatters(tuple(range(V.shape[0])), d + 1):
        d += 1
    return d


def _seq_rad_oracle(V, n):
    """Enumerate every X-valued tree of depth n and every sign path."""
    V = np.asarray(V)
    X = V.shape[1]
    best = -np.inf
    for nodes in itertools.product(range(X), repeat=2 ** n - 1):
        tot = 0.0
        for eps in itertools.product([-1, 1], repeat=n):
            i, s = 0, np.zeros(V.shape[0])
            for e in eps:
                s += e * V[:, nodes[i]]
                i = 2 * i + (2 if e > 0 else 1)
            tot += s.max()
        best = max(best, tot / (2 ** n * n))
    return best


# ---------------------------------------------------------------- class

def test_finite_class_dedup_and_validation():
    F = cx.FiniteClass([[1, 0], [1, 0], [0, 1]])
    assert F.size == 2
    with pytest.raises(ValueError):
        cx.FiniteClass([[2.0]])
    with pytest.raises(ValueError):
        cx.FiniteClass([])


# ---------------------------------------------------------------- Rademacher

def test_stat_rademacher_examples():
    assert cx.stat_rademacher(cx.FiniteClass([[0.3, -0.2]]), [0, 1]) == 0.0
    assert cx.stat_rademacher(TWO_CONST, [0]) == pytest.approx(1.0)
    assert cx.stat_rademacher(TWO_CONST, [0, 1]) == pytest.approx(0.5)


def test_stat_rademacher_scaling(rng):
    for _ in range(20):
        F = _quarter_class(rng, 5, 4)
        r = cx.stat_rademacher(F, [0, 1, 2, 3])
        for c in (0.5, -1.0):
            assert cx.stat_rademacher(F.scaled(c), [0, 1, 2, 3]) == pytest.approx(abs(c) * r)


def test_stat_rademacher_cap():
    with pytest.raises(CapacityError):
        cx.stat_rademacher(TWO_CONST, [0] * 23)


def test_seq_rademacher_examples():
    assert cx.seq_rademacher(TWO_CONST, 2).value == pytest.approx(0.5)
    F = cx.FiniteClass([[1, 0.5], [-0.5, 0.25], [0, -1]])
    assert cx.seq_rademacher(F, 1).value == pytest.approx(
        max(cx.stat_rademacher(F, [x]) for x in range(2)))


def test_seq_rademacher_matches_tree_enumeration(rng):
    for _ in range(15):
        F = _quarter_class(rng, 4, 3)
        res = cx.seq_rademacher(F, 2)
        assert res.value == pytest.approx(_seq_rad_oracle(F.values, 2), abs=1e-12)
        assert cx.tree_rademacher(F, res.tree) == pytest.approx(res.value, abs=1e-12)


def test_seq_rademacher_dominates_stat(rng):
    for _ in range(15):
        F = _quarter_class(rng, 4, 3)
        for n in (1, 2):
            s = max(cx.stat_rademacher(F, list(p)) for p in itertools.product(range(3), repeat=n))
            assert cx.seq_rademacher(F, n).value >= s - 1e-12


def test_seq_rademacher_cap():
    with pytest.raises(CapacityError):
        cx.seq_rademacher(TWO_CONST, 4)


# ---------------------------------------------------------------- fat / Ldim

def test_dimension_examples():
    single = cx.FiniteClass([[0.5, -0.5]])
    assert cx.stat_fat(single, 0.5).value == 0
    assert cx.seq_fat(single, 0.5).value == 0
    assert cx.littlestone_dim(cx.FiniteClass([[1.0, -1.0]])).value == 0
    with pytest.raises(ValueError):
        cx.littlestone_dim(single)
    assert cx.stat_fat(TWO_CONST, 2.0).value == 1
    assert cx.stat_fat(cx.full_binary_class(3), 2.0).value == 3
    assert cx.littlestone_dim(TWO_CONST).value == 1
    assert cx.littlestone_dim(cx.full_binary_class(3)).value == 3


def test_ldim_matches_tree_search(rng):
    for _ in range(40):
        V = np.unique(rng.choice([-1.0, 1.0], size=(rng.integers(1, 12), 4)), axis=0)
        F = cx.FiniteClass(V)
        res = cx.littlestone_dim(F)
        assert res.value == _ldim_oracle(F.values)
        assert res.value <= np.log2(F.size) + 1e-12


def test_seq_fat_matches_fine_grid_search(rng):
    for _ in range(30):
        F = _quarter_class(rng, int(rng.integers(2, 8)), 3)
        for alpha in (0.5, 1.0):
            res = cx.seq_fat(F, alpha)
            assert res.value == _fat_oracle(F.values, alpha)
            if res.value:
                assert cx.verify_seq_shattering(F, alpha, res.tree, res.witness)


def test_stat_fat_matches_fine_grid_search(rng):
    for _ in range(15):
        F = _quarter_class(rng, int(rng.integers(2, 7)), 3)
        for alpha in (0.5, 1.0):
            assert cx.stat_fat(F, alpha).value == _stat_fat_exhaustive(F.values, alpha, np.arange(-1, 1.0001, 0.125))


def test_binary_seq_fat_equals_ldim(rng):
    for _ in range(25):
        V = np.unique(rng.choice([-1.0, 1.0], size=(rng.integers(1, 10), 4)), axis=0)
        F = cx.FiniteClass(V)
        ld = cx.littlestone_dim(F).value
        for alpha in (0.25, 1.0, 2.0):
            assert cx.seq_fat(F, alpha).value == ld
        assert cx.seq_fat(F, 2.5).value == 0


@settings(max_examples=40)
@given(st.integers(0, 2 ** 31 - 1))
def test_fat_invariants(seed):
    rng = np.random.default_rng(seed)
    F = _quarter_class(rng, int(rng.integers(1, 9)), 4)
    prev_seq, prev_stat = None, None
    for alpha in (0.25, 0.5, 1.0, 1.5, 2.0):
        sq, sf = cx.seq_fat(F, alpha).value, cx.stat_fat(F, alpha).value
        assert sq >= sf
        if prev_seq is not None:
            assert sq <= prev_seq and sf <= prev_stat
        prev_seq, prev_stat = sq, sf
    # inclusion monotonicity
    sub = F.subclass(F.full_mask >> 1) if F.size > 1 else F
    assert cx.seq_fat(sub, 0.5).value <= cx.seq_fat(F, 0.5).value
    assert cx.stat_fat(sub, 0.5).value <= cx.stat_fat(F, 0.5).value


def test_seq_fat_certificate_tampering_detected():
    F = cx.full_binary_class(2)
    res = cx.seq_fat(F, 1.0)
    assert res.value == 2
    bad = cx.WitnessTree(res.witness.depth, res.witness.values + 1.5)
    assert not cx.verify_seq_shattering(F, 1.0, res.tree, bad)


def test_caps():
    with pytest.raises(CapacityError):
        cx.seq_fat(cx.full_binary_class(7), 1.0)
    with pytest.raises(CapacityError):
        cx.littlestone_dim(cx.full_binary_class(7))
    caps = cx.Caps(seq_fat_depth=1)
    res = cx.seq_fat(cx.full_binary_class(3), 1.0, caps)
    assert res.value == 1 and res.saturated
    with pytest.raises(ValueError):
        cx.seq_fat(TWO_CONST, 0.0)
