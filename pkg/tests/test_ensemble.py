import numpy as np
import pytest

from nucleitool.core import PredictionMaps, ShapeMismatch
from nucleitool.ensemble import EmptyEnsemble, average_predictions


def random_pred(rng, h=10, w=12):
    tp = rng.uniform(size=(7, h, w))
    tp /= tp.sum(axis=0)
    return PredictionMaps(rng.uniform(size=(h, w)), rng.uniform(-1, 1, size=(2, h, w)),
                          rng.uniform(-1, 1, size=(2, h, w)), tp)


def close(a, b, tol=1e-12):
    for x, y in zip(a.arrays(), b.arrays()):
        np.testing.assert_allclose(x, y, atol=tol, rtol=0)


def test_single_member_is_identity(rng):
    p = random_pred(rng)
    close(average_predictions([p]), p)


def test_k_copies_identity(rng):
    p = random_pred(rng)
    close(average_predictions([p] * 5), p)


def test_pixel_average():
    a = PredictionMaps(np.full((8, 8), 0.2), np.zeros((2, 8, 8)), np.zeros((2, 8, 8)), np.full((7, 8, 8), 1 / 7))
    b = PredictionMaps(np.full((8, 8), 0.6), np.zeros((2, 8, 8)), np.zeros((2, 8, 8)), np.full((7, 8, 8), 1 / 7))
    np.testing.assert_allclose(average_predictions([a, b]).np_prob, 0.4, atol=1e-15)


def test_permutation_invariant_bitwise(rng):
    preds = [random_pred(rng) for _ in range(5)]
    ref = average_predictions(preds)
    for perm in ([4, 3, 2, 1, 0], [2, 0, 4, 1, 3]):
        out = average_predictions([preds[i] for i in perm])
        for x, y in zip(out.arrays(), ref.arrays()):
            assert x.tobytes() == y.tobytes()


def test_ranges_preserved(rng):
    for _ in range(10):
        out = average_predictions([random_pred(rng) for _ in range(rng.integers(1, 6))])
        assert 0 <= out.np_prob.min() and out.np_prob.max() <= 1
        assert -1 <= out.hv.min() and out.hv.max() <= 1
        assert -1 <= out.dg.min() and out.dg.max() <= 1
        np.testing.assert_allclose(out.tp_prob.sum(axis=0), 1, atol=1e-12)


def test_errors(rng):
    with pytest.raises(EmptyEnsemble):
        average_predictions([])
    with pytest.raises(ShapeMismatch):
        average_predictions([random_pred(rng, 8, 8), random_pred(rng, 8, 9)])
