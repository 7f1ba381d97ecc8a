import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mdlearn import complexity as cx
from mdlearn import experts_online as ex
from mdlearn.errors import CapacityError, ProtocolError

CONSTS = cx.FiniteClass([[1.0, 1.0], [-1.0, -1.0]])


def _quarter_class(rng, rows, cols):
    return cx.FiniteClass(rng.integers(-4, 5, size=(rows, cols)) / 4.0)


# ---------------------------------------------------------------- discretization

def test_grid_and_discretize_examples():
    np.testing.assert_allclose(ex.grid(1.0), [-0.5, 0.5])
    np.testing.assert_allclose(ex.grid(0.5), [-0.75, -0.25, 0.25, 0.75])
    assert ex.discretize(0.0, 1.0) == -0.5
    assert ex.discretize(0.8, 0.5) == 0.75
    for a in ex.grid(0.25):
        assert ex.discretize(a, 0.25) == a
    with pytest.raises(ValueError):
        ex.discretize(0.3, 0.0)


@given(st.floats(-1, 1), st.sampled_from([2.0, 1.0, 0.5, 0.25, 0.125]))
def test_discretize_is_nearest(a, alpha):
    g = ex.grid(alpha)
    v = ex.discretize(a, alpha)
    d = np.abs(g - a)
    assert abs(v - a) == pytest.approx(d.min(), abs=1e-12)
    assert v == g[np.nonzero(d <= d.min() + 1e-12)[0][0]]  # smaller on ties


# ---------------------------------------------------------------- EWA

def test_ewa_examples():
    res = ex.ewa_run([[0.3], [0.9], [0.0]])
    np.testing.assert_allclose(res.expected_losses, [0.3, 0.9, 0.0])
    res = ex.ewa_run([[0.0, 1.0], [0.0, 1.0]], priors=[0.5, 0.5])
    assert res.weights[1, 0] == pytest.approx(1 / (1 + math.exp(-1 / math.sqrt(2))))
    assert res.weights[1, 0] == pytest.approx(0.670, abs=1e-3)
    assert res.total == pytest.approx(0.830, abs=1e-3)
    assert res.total <= ex.ewa_bound(2, 0.0, 0.5)
    assert ex.ewa_bound(2, 0.0, 0.5) == pytest.approx(1.157, abs=1e-3)


def test_ewa_identical_experts_keep_priors():
    res = ex.ewa_run(np.tile([[0.2], [0.7], [0.4]], (1, 3)), priors=[0.2, 0.3, 0.5])
    np.testing.assert_allclose(res.weights, np.tile([0.2, 0.3, 0.5], (3, 1)), atol=1e-15)


def test_ewa_errors():
    with pytest.raises(ValueError):
        ex.ewa_run([[1.5, 0.0]])
    with pytest.raises(ValueError):
        ex.ewa_run([[0.5, 0.0]], priors=[0.8, 0.8])
    with pytest.raises(ValueError):
        ex.ewa_run([[0.5, 0.0]], priors=[1.0])


def test_ewa_log_domain_long_horizon():
    n = 100_000
    F = np.zeros((n, 3))
    F[:, 0] = 1.0
    res = ex.ewa_run(F, priors=[0.98, 0.01, 0.01])
    assert np.all(np.isfinite(res.weights))
    np.testing.assert_allclose(res.weights.sum(axis=1), 1.0, atol=1e-12)


@given(st.integers(1, 40), st.integers(1, 6), st.integers(0, 2 ** 31 - 1))
def test_ewa_bound_every_expert(n, N, seed):
    rng = np.random.default_rng(seed)
    F = rng.uniform(size=(n, N))
    p = rng.uniform(0.1, 1, size=N)
    p /= p.sum()
    res = ex.ewa_run(F, priors=p)
    np.testing.assert_allclose(res.weights.sum(axis=1), 1.0, atol=1e-12)
    for i in range(N):
        assert res.total <= ex.ewa_bound(n, F[:, i].sum(), p[i]) + 1e-9


# ---------------------------------------------------------------- Fat-SOA

def _realizable_stream(rng, F, n):
    h = F.values[rng.integers(F.size)]
    xs = rng.integers(0, F.n_points, size=n)
    return [(int(x), float(h[x])) for x in xs]


def test_soa_singleton_class_no_mistakes(rng):
    F = cx.FiniteClass([[0.3, -0.6]])
    res = ex.fat_soa_run(F, 0.5, _realizable_stream(rng, F, 20))
    assert res.mistake_count == 0


def test_soa_two_constants_alpha_two():
    F = cx.FiniteClass([[1.0], [-1.0]])
    for ys in itertools.product([-1.0, 1.0], repeat=4):
        if len(set(ys)) > 1:
            continue
        res = ex.fat_soa_run(F, 2.0, [(0, y) for y in ys])
        assert res.mistake_count <= 1


def test_soa_random_classes(rng):
    for _ in range(100):
        F = _quarter_class(rng, int(rng.integers(1, 13)), int(rng.integers(1, 6)))
        if math.floor(math.log2(F.size)) > 4:
            continue
        alpha = float(rng.choice([0.5, 1.0]))
        fat = cx.seq_fat(F, alpha).value
        res = ex.fat_soa_run(F, alpha, _realizable_stream(rng, F, 15))
        assert res.mistake_count <= fat
        for _, before, after in res.updates:
            assert after < before
        for R, (fat_v, top) in zip(res.argmax_sets, res.fats):
            if top < fat_v:
                continue  # every level loses a dimension, any prediction is safe
            assert len(R) <= 2
            if len(R) == 2:
                assert R[1] - R[0] == 1


def test_argmax_levels_may_split_below_full_fat():
    # both singleton level sets tie at fat 0 < fat(V) = 1, two levels apart
    F = cx.FiniteClass([[-0.75], [0.25]])
    res = ex.fat_soa_run(F, 0.5, [(0, 0.25)])
    assert res.argmax_sets[0] == (0, 2) and res.fats[0] == (1, 0)


def test_soa_unrealizable_stream_raises():
    with pytest.raises(ProtocolError):
        ex.fat_soa_run(CONSTS, 0.5, [(0, 1.0), (1, -1.0)])


def test_seq_fat_of_subclass_delegates(rng):
    F = _quarter_class(rng, 6, 3)
    for mask in range(1, F.full_mask + 1, 7):
        assert ex.seq_fat_of_subclass(F, mask, 0.5) == cx.seq_fat(F.subclass(mask), 0.5).value
    assert ex.seq_fat_of_subclass(F, 0, 0.5) == -1
    with pytest.raises(CapacityError):
        ex.seq_fat_of_subclass(cx.full_binary_class(5), 1, 1.0)


# ---------------------------------------------------------------- experts

def test_expert_count_formula(rng):
    for _ in range(10):
        F = _quarter_class(rng, int(rng.integers(1, 6)), 3)
        for alpha, n in ((1.0, 4), (0.5, 3)):
            bank = ex.generate_experts(F, alpha, n)
            fat = cx.seq_fat(F, alpha).value
            K = ex.grid(alpha).size
            assert bank.size == sum(math.comb(n, L) * (K - 1) ** L for L in range(fat + 1))


def test_zero_fat_single_expert():
    F = cx.FiniteClass([[0.2, 0.1]])
    assert ex.generate_experts(F, 0.5, 6).size == 1


def test_expert_cap():
    with pytest.raises(CapacityError):
        ex.generate_experts(cx.full_binary_class(3), 0.125, 20, cap=1000)


def _tracks(bank, F, n, alpha):
    for xs in itertools.product(range(F.n_points), repeat=n):
        P = bank.predictions(xs)
        H = F.values[:, list(xs)]
        ok = np.all(np.abs(P[:, None, :] - H[None, :, :]) <= alpha + 1e-12, axis=2).any(axis=0)
        if not ok.all():
            return False
    return True


def test_tracking_expert_exists_two_constants():
    bank = ex.generate_experts(CONSTS, 1.0, 3)
    assert _tracks(bank, CONSTS, 3, 1.0)


def test_tracking_expert_exists_random(rng):
    for _ in range(8):
        F = _quarter_class(rng, int(rng.integers(2, 6)), 2)
        assert _tracks(ex.generate_experts(F, 0.5, 3), F, 3, 0.5)


def test_predictions_are_causal(rng):
    F = _quarter_class(rng, 5, 3)
    bank = ex.generate_experts(F, 0.5, 4)
    full = bank.predictions([0, 2, 1, 2])
    np.testing.assert_array_equal(bank.predictions([0, 2])[:, :2], full[:, :2])


# ---------------------------------------------------------------- agnostic

def test_agnostic_bound_formula():
    a, fat, n = 0.5, 1, 64
    want = a + math.sqrt(fat * math.log(2 * n / a) / n) + (3 + 2 * math.log(math.log(2))) / 8
    assert ex.agnostic_bound(a, fat, n) == pytest.approx(want)
    assert ex.multiscale_prior(1) == pytest.approx(6 / math.pi ** 2)


def test_agnostic_two_constants_adversarial(rng):
    n = 64
    stream = [(int(rng.integers(2)), float(rng.choice([-1.0, 1.0]))) for _ in range(n)]
    res = ex.agnostic_supervised_run(CONSTS, stream, max_scale=6)
    assert res.regret <= ex.agnostic_bound(0.5, 1, n)
    assert res.regret <= res.bound


def test_agnostic_realizable_loss_small(rng):
    n = 64
    stream = [(int(rng.integers(2)), 1.0) for _ in range(n)]
    res = ex.agnostic_supervised_run(CONSTS, stream, max_scale=4)
    assert np.all(res.comparator_losses == 0)
    # zero-loss expert at every scale: EWA guarantee in absolute-loss units
    p = ex.multiscale_prior(1) / res.scales[0][3]
    assert res.expected_losses.sum() <= 2 * (math.sqrt(n) / 8 + math.sqrt(n) * math.log(1 / p))


def test_agnostic_cap():
    with pytest.raises(CapacityError):
        ex.agnostic_supervised_run(CONSTS, [(0, 1.0)] * 64, max_scale=10)
