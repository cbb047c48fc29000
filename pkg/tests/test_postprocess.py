import numpy as np
import pytest
from skimage.segmentation import watershed as sk_watershed

from nucleitool.core import PredictionMaps, connected_components
from nucleitool.encoder import encode_targets
from nucleitool.postprocess import (
    SOBEL_X,
    PostprocessParams,
    assign_classes,
    combine_energies,
    correlate3x3,
    energy_map,
    extract_markers,
    postprocess,
    postprocess_maps,
    sobel_gradients,
    watershed,
)
from nucleitool.synthetic import random_blobs, touching_pair

from conftest import make_label


def loop_correlate(img, k):
    h, w = img.shape
    out = np.zeros((h, w))
    for r in range(h):
        for c in range(w):
            for i in range(3):
                for j in range(3):
                    rr = min(max(r + i - 1, 0), h - 1)
                    cc = min(max(c + j - 1, 0), w - 1)
                    out[r, c] += k[i, j] * img[rr, cc]
    return out


def test_sobel_constant():
    gx, gy = sobel_gradients(np.full((6, 7), 3.5))
    assert not gx.any() and not gy.any()


def test_sobel_ramp():
    img = np.tile(np.arange(9, dtype=float), (7, 1))
    gx, gy = sobel_gradients(img)
    assert (gx[1:-1, 1:-1] == 8).all()
    assert (gy == 0).all()


def test_sobel_transpose(rng):
    img = rng.normal(size=(7, 9))
    gx, gy = sobel_gradients(img)
    gxt, gyt = sobel_gradients(img.T)
    np.testing.assert_allclose(gxt, gy.T, atol=1e-12)
    np.testing.assert_allclose(gyt, gx.T, atol=1e-12)


def test_sobel_matches_direct_loop(rng):
    img = rng.normal(size=(6, 8))
    gx, gy = sobel_gradients(img)
    np.testing.assert_allclose(gx, loop_correlate(img, SOBEL_X), atol=1e-12)
    np.testing.assert_allclose(gy, loop_correlate(img, SOBEL_X.T), atol=1e-12)


def test_energy_all_zero():
    assert not energy_map(np.zeros((2, 8, 8))).any()


def test_energy_step_edge_ridge():
    g = np.zeros((2, 8, 16))
    g[0, :, :8] = -1
    g[0, :, 8:] = 1
    e = energy_map(g)
    # |gx| = 8 on columns 7 and 8, zero elsewhere
    np.testing.assert_allclose(e[:, 7:9], 8 / (8 + 1e-6))
    assert not e[:, :7].any() and not e[:, 9:].any()


def test_energy_range(rng):
    for _ in range(10):
        e = energy_map(rng.uniform(-1, 1, size=(2, 12, 12)))
        assert e.min() >= 0 and e.max() <= 1


def test_combine():
    e = np.array([[0.2, 0.5]])
    np.testing.assert_array_equal(combine_energies(e, np.zeros_like(e)), e)
    assert combine_energies(np.array([0.2]), np.array([0.7]))[0] == 0.7


def test_combine_commutes_and_min_rule(rng):
    a, b = rng.uniform(size=(2, 9, 9))
    np.testing.assert_array_equal(combine_energies(a, b), combine_energies(b, a))
    np.testing.assert_array_equal(np.minimum(1 - a, 1 - b), 1 - combine_energies(a, b))


def test_markers_empty():
    assert not extract_markers(np.zeros((8, 8)), np.zeros((8, 8))).any()


def test_markers_single_blob():
    p = np.zeros((16, 16))
    p[2:10, 3:12] = 1
    m = extract_markers(p, np.zeros_like(p))
    np.testing.assert_array_equal(m, (p > 0).astype(int))


def ridge_case():
    p = np.zeros((8, 16))
    p[:] = 1
    e = np.zeros((8, 16))
    e[:, 7:9] = 1.0
    return p, e


def test_markers_split_by_ridge():
    p, e = ridge_case()
    m = extract_markers(p, e)
    assert m.max() == 2
    assert (m[:, :7] == 1).all() and (m[:, 9:] == 2).all()


def test_markers_drop_small():
    p = np.zeros((16, 16))
    p[0:3, 0:3] = 1  # 9 pixels
    p[8:12, 8:12] = 1
    m = extract_markers(p, np.zeros_like(p), PostprocessParams(min_size=10))
    assert m.max() == 1 and m[9, 9] == 1


def test_watershed_single_marker():
    fg = np.zeros((8, 8), bool)
    fg[1:6, 1:7] = True
    markers = np.zeros((8, 8), int)
    markers[3, 3] = 1
    out = watershed(np.random.default_rng(0).uniform(size=(8, 8)), markers, fg)
    np.testing.assert_array_equal(out, fg.astype(int))


def test_watershed_ridge_split():
    p, e = ridge_case()
    fg = p > 0.5
    markers = np.zeros((8, 16), int)
    markers[:, :2] = 1
    markers[:, 14:] = 2
    out = watershed(e, markers, fg)
    assert (out[:, :8] == 1).all() and (out[:, 8:] == 2).all()


def test_watershed_unreachable_stays_zero():
    fg = np.zeros((8, 8), bool)
    fg[0:2, 0:2] = True
    fg[5:8, 5:8] = True
    markers = np.zeros((8, 8), int)
    markers[0, 0] = 1
    out = watershed(np.zeros((8, 8)), markers, fg)
    assert (out[0:2, 0:2] == 1).all() and not out[5:, 5:].any()


def test_watershed_rejects_markers_outside_fg():
    with pytest.raises(ValueError):
        watershed(np.zeros((4, 4)), np.ones((4, 4), int), np.zeros((4, 4), bool))


def test_watershed_matches_skimage(rng):
    # continuous random elevations make ties vanishingly unlikely
    for _ in range(25):
        fg = rng.uniform(size=(20, 20)) < 0.8
        elev = rng.uniform(size=(20, 20))
        seeds = connected_components(fg & (rng.uniform(size=(20, 20)) < 0.03), 8)
        ours = watershed(elev, seeds, fg)
        theirs = sk_watershed(elev, seeds, mask=fg, connectivity=2)
        np.testing.assert_array_equal(ours, theirs)


def test_assign_majority():
    inst = np.zeros((4, 4), int)
    inst[0:2, 0:2] = 1
    tp = np.zeros((7, 4, 4))
    tp[0] = 1
    tp[:, inst == 1] = 0
    tp[3, inst == 1] = 1
    assert assign_classes(inst, tp) == {1: 3}


def test_assign_vote_count():
    inst = np.ones((2, 5), int)
    tp = np.zeros((7, 2, 5))
    tp[2, 0, :] = 0.9
    tp[2, 1, 0] = 0.9
    tp[4, 1, 1:] = 0.9
    tp[0] = 0.05  # background never the argmax
    # 6 votes for class 2, 4 for class 4
    assert assign_classes(inst, tp) == {1: 2}


def test_assign_background_fallback():
    inst = np.ones((2, 2), int)
    tp = np.zeros((7, 2, 2))
    tp[0] = 0.6
    tp[5] = [[0.3, 0.2], [0.3, 0.3]]
    tp[1] = [[0.1, 0.2], [0.05, 0.05]]
    tp[6] = [[0.0, 0.0], [0.05, 0.05]]
    # means over the instance: class 5 -> 0.275, class 1 -> 0.1, class 6 -> 0.025
    assert assign_classes(inst, tp) == {1: 5}


def test_assign_tie_goes_to_smaller_id():
    inst = np.ones((1, 2), int)
    tp = np.zeros((7, 1, 2))
    tp[4, 0, 0] = 1
    tp[2, 0, 1] = 1
    assert assign_classes(inst, tp) == {1: 2}


def zero_prediction(h=16, w=16):
    tp = np.zeros((7, h, w))
    tp[0] = 1
    return PredictionMaps(np.zeros((h, w)), np.zeros((2, h, w)), np.zeros((2, h, w)), tp)


def test_postprocess_zero_prediction():
    assert len(postprocess(zero_prediction())) == 0


def test_round_trip_separated_blobs(rng):
    lab = random_blobs(rng, shape=(96, 96), n_range=(4, 6))
    out = postprocess(encode_targets(lab).as_prediction())
    assert len(out) == lab.inst.max()
    inst, cls = out.to_maps()
    for k in range(1, lab.inst.max() + 1):
        gt = lab.inst == k
        ids = np.unique(inst[gt])
        ids = ids[ids > 0]
        assert len(ids) == 1
        pred = inst == ids[0]
        assert (gt & pred).sum() / (gt | pred).sum() >= 0.95
        assert cls[pred][0] == lab.cls[gt][0]


def test_touching_pair_splits(rng):
    for _ in range(5):
        lab = touching_pair(rng)
        assert len(postprocess(encode_targets(lab).as_prediction())) == 2


def test_output_is_contiguous_partition_of_fg(rng):
    lab = random_blobs(rng, shape=(64, 64), n_range=(3, 5))
    pred = encode_targets(lab).as_prediction()
    pred.hv = pred.hv + rng.normal(scale=0.1, size=pred.hv.shape)
    pred.np_prob = np.clip(pred.np_prob + rng.normal(scale=0.2, size=pred.np_prob.shape), 0, 1)
    inst, _ = postprocess_maps(pred)
    ids = np.unique(inst[inst > 0])
    np.testing.assert_array_equal(ids, np.arange(1, len(ids) + 1))
    assert not inst[pred.np_prob <= 0.5].any()
    first = [np.flatnonzero(inst.ravel() == k)[0] for k in ids]
    assert first == sorted(first)


def test_deterministic(rng):
    lab = random_blobs(rng, shape=(64, 64), n_range=(3, 6))
    pred = encode_targets(lab).as_prediction()
    a, _ = postprocess_maps(pred)
    b, _ = postprocess_maps(pred)
    assert a.tobytes() == b.tobytes()


def test_min_size_monotone(rng):
    lab = random_blobs(rng, shape=(96, 96), n_range=(6, 10), axis_range=(3.0, 9.0))
    pred = encode_targets(lab).as_prediction()
    counts = [postprocess_maps(pred, PostprocessParams(min_size=m))[0].max() for m in (0, 5, 10, 30, 80, 200)]
    assert all(a >= b for a, b in zip(counts, counts[1:]))


@pytest.mark.parametrize("kw", [dict(t_fg=0.0), dict(t_fg=1.0), dict(t_energy=1.5), dict(min_size=-1)])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        PostprocessParams(**kw)


def test_small_label_round_trip():
    inst = np.zeros((24, 24), int)
    inst[2:18, 2:18] = 1
    out = postprocess(encode_targets(make_label(inst, inst * 4)).as_prediction())
    assert len(out) == 1 and out[0].cls == 4 and out[0].area == 256
