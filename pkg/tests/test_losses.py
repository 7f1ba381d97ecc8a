import numpy as np
import pytest
from hypothesis import given, strategies as st

from mdlearn import geometry as geo
from mdlearn import losses as ls


def _random_instances(rng, d=4):
    x = rng.normal(size=d)
    a = rng.integers(0, 2, size=d)
    xs = rng.normal(size=(3, d))
    return [
        ls.Linear(x),
        ls.AbsSupervised(x / np.linalg.norm(x), rng.uniform(-1, 1)),
        ls.SmoothedAbs(x / np.linalg.norm(x), rng.uniform(-1, 1)),
        ls.HiddenCoord(rng.normal(size=d), a),
        ls.HiddenCoordBiased(np.zeros(d), a, 0.01),
        ls.Regularized(ls.AbsSupervised(x / np.linalg.norm(x), 0.3), 0.5),
        ls.MaxOfSignedLinear(rng.choice([-1.0, 1.0], size=3), xs, rng.normal(size=3)),
    ]


def test_eval_examples():
    v, g = ls.evaluate(ls.Linear([1, 2]), [0, 0])
    assert v == 0 and np.array_equal(g, [1, 2])
    # <h,x> - y = 1 on the linear branch
    assert ls.value(ls.SmoothedAbs([1.0, 0.0], 0.0), [1.0, 0.0]) == pytest.approx(0.75)
    v, g = ls.evaluate(ls.HiddenCoord([0, 0], [1, 1]), [1, 0])
    assert v == pytest.approx(1.0) and np.allclose(g, [1, 0])
    assert ls.value(ls.HiddenCoordBiased([0.0], [0.0], 0.01), [1.0]) == 0.0
    v, g = ls.evaluate(ls.MaxOfSignedLinear.from_pieces([(1, [1.0, 0.0], 0.0)]), [0.3, 0])
    assert v == pytest.approx(-0.3) and np.allclose(g, [-1, 0])


def test_smoothed_abs_is_c1_at_the_kink():
    z = ls.SmoothedAbs([1.0], 0.0)
    for s in (-1, 1):
        lo, hi = s * (0.5 - 1e-9), s * (0.5 + 1e-9)
        assert ls.value(z, [lo]) == pytest.approx(ls.value(z, [hi]), abs=1e-8)
        assert ls.evaluate(z, [lo]).subgrad[0] == pytest.approx(ls.evaluate(z, [hi]).subgrad[0], abs=1e-8)


def test_kink_conventions():
    assert np.array_equal(ls.evaluate(ls.AbsSupervised([1.0, 1.0], 0.0), [0, 0]).subgrad, [0, 0])
    assert np.array_equal(ls.evaluate(ls.HiddenCoord([0.5, 0.5], [1, 1]), [0.5, 0.5]).subgrad, [0, 0])
    # ties between pieces go to the lowest index
    z = ls.MaxOfSignedLinear([1.0, 1.0], [[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0])
    assert np.array_equal(ls.evaluate(z, [0.0, 0.0]).subgrad, [-1.0, -0.0])


def test_invalid_instances():
    with pytest.raises(ValueError):
        ls.HiddenCoord([0.0, 0.0], [0.5, 1.0])
    with pytest.raises(ValueError):
        ls.Regularized(ls.Linear([1.0]), 0.0)
    with pytest.raises(ValueError):
        ls.MaxOfSignedLinear([0.5], [[1.0]], [0.0])
    with pytest.raises(ValueError):
        ls.evaluate(ls.Linear([1.0, 2.0]), [1.0])


def test_subgradient_inequality(rng):
    for _ in range(40):
        for z in _random_instances(rng):
            for _ in range(25):
                h, hp = rng.normal(size=(2, z.d))
                v, g = ls.evaluate(z, h)
                assert ls.value(z, hp) >= v + g @ (hp - h) - 1e-9


def test_convexity_along_segments(rng):
    for _ in range(40):
        for z in _random_instances(rng):
            h, hp = rng.normal(size=(2, z.d))
            assert ls.value(z, (h + hp) / 2) <= (ls.value(z, h) + ls.value(z, hp)) / 2 + 1e-9


def test_self_bounding_smoothed_abs(rng):
    for _ in range(1000):
        x = rng.normal(size=3)
        x /= max(1.0, np.linalg.norm(x))
        z = ls.SmoothedAbs(x, rng.uniform(-1, 1))
        H = ls.smoothness_constant(z)
        v, g = ls.evaluate(z, rng.normal(size=3))
        assert np.linalg.norm(g) <= np.sqrt(4 * H * v) + 1e-9


def test_biased_loss_strictly_convex(rng):
    z = ls.HiddenCoordBiased(np.zeros(5), [1, 0, 1, 0, 0], 0.01)
    for _ in range(100):
        h, hp = rng.normal(size=(2, 5))
        v, g = ls.evaluate(z, hp)
        assert ls.value(z, h) - v - g @ (h - hp) > 0


def test_lipschitz_examples():
    g = geo.euclidean(3)
    assert ls.lipschitz_bound(ls.Linear([1.0, 2.0, 2.0]), g) == pytest.approx(3.0)
    for a in ([0, 0, 0], [1, 0, 1], [1, 1, 1]):
        assert ls.lipschitz_bound(ls.HiddenCoord(np.zeros(3), a), g) == pytest.approx(1.0)
    gb = geo.euclidean(3, 2.0)
    z = ls.Regularized(ls.Linear([1.0, 0.0, 0.0]), 0.5)
    assert ls.lipschitz_bound(z, gb) == pytest.approx(1.0 + 0.5 * 2.0)


def test_lipschitz_bound_dominates_sampled_subgradients(rng):
    for g in (geo.euclidean(4), geo.entropic(4)):
        for _ in range(30):
            for z in _random_instances(rng):
                L = ls.lipschitz_bound(z, g)
                for _ in range(20):
                    h = geo.project(g, np.abs(rng.normal(size=4)) + 1e-3)
                    sg = ls.evaluate(z, h).subgrad
                    assert geo.dual_norm(g, sg) <= L + 1e-9


def test_smoothness_constant():
    assert ls.smoothness_constant(ls.SmoothedAbs([1.0, 0.0], 0.0)) == 1.0
    assert ls.smoothness_constant(ls.SmoothedAbs([0.5, 0.0], 0.0)) == 0.25
    assert ls.smoothness_constant(ls.Linear([1.0])) is None


def test_smoothness_constant_matches_second_difference_scan():
    # largest second difference of phi(<h,x> - y) along x, |x| = 1/2
    x = np.array([0.5, 0.0])
    z = ls.SmoothedAbs(x, 0.1)
    ts = np.linspace(-4, 4, 8001)
    e = 1e-4
    vals = [(ls.value(z, [t + e, 0]) - 2 * ls.value(z, [t, 0]) + ls.value(z, [t - e, 0])) / e ** 2 for t in ts]
    assert max(vals) / 2 == pytest.approx(0.25, rel=1e-3)  # phi'' = 2 on the quadratic part


@given(st.integers(1, 6), st.integers(0, 2 ** 31 - 1))
def test_batch_matches_instances(n, seed):
    rng = np.random.default_rng(seed)
    sample = [_random_instances(rng)[k] for k in rng.integers(0, 7, size=n)]
    w = rng.uniform(0.1, 2, size=n)
    batch = ls.BatchLoss(sample, w)
    h = rng.normal(size=4)
    evs = [ls.evaluate(z, h) for z in sample]
    wn = w / w.sum()
    v, g = batch.evaluate(h)
    assert v == pytest.approx(sum(wi * e.value for wi, e in zip(wn, evs)), rel=1e-12, abs=1e-12)
    np.testing.assert_allclose(g, sum(wi * e.subgrad for wi, e in zip(wn, evs)), rtol=1e-10, atol=1e-12)


def test_arrays_are_read_only():
    z = ls.Linear([1.0, 2.0])
    with pytest.raises(ValueError):
        z.x[0] = 5.0
