import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from softlabel.errors import DimensionError
from softlabel.labels import SoftLabelMap
from softlabel.losses import (EXCLUDE_MC, INCLUDE_MC, LossMap, PredictionMap, ce_loss, export_loss_map,
                              kl_loss, soft_entropy)
from softlabel.resample import KernelSpec, downsample_labels
from softlabel.synthetic import random_labels


def _soft_from_dists(dists, shape, ignore=None):
    planes = np.asarray(dists, dtype=np.float64).T.reshape((-1,) + shape)
    return SoftLabelMap.from_dense(planes, ignore)


def _matching_pred(soft):
    dense = soft.to_dense(dtype=np.float64)
    valid = soft.valid_mass()
    return PredictionMap(np.where(valid > 0, dense / np.where(valid > 0, valid, 1), 1.0 / soft.num_classes))


def random_dists(rng, n, c, sparsity=0.5):
    raw = rng.random((n, c))
    raw[rng.random((n, c)) < sparsity] = 0
    raw[np.arange(n), rng.integers(0, c, n)] += 0.1
    return raw / raw.sum(axis=1, keepdims=True)


def test_prediction_map_validation():
    with pytest.raises(ValueError):
        PredictionMap(np.full((2, 1, 1), 0.6))
    with pytest.raises(ValueError):
        PredictionMap(np.array([[[1.5]], [[-0.5]]]))
    p = PredictionMap.from_labels(np.array([[1, 0]]), 3)
    assert p.data[:, 0, 0].tolist() == [0, 1, 0]


def test_kl_zero_when_equal():
    soft = _soft_from_dists([[0.25, 0.75]], (1, 1))
    value, lmap = kl_loss(_matching_pred(soft), soft)
    assert abs(value) <= 1e-12
    assert lmap.included.all()


def test_kl_known_value():
    soft = _soft_from_dists([[1.0, 0.0]], (1, 1))
    value, lmap = kl_loss(PredictionMap(np.full((2, 1, 1), 0.5)), soft)
    assert math.isclose(value, math.log(2), abs_tol=1e-12)
    assert math.isclose(lmap.values[0, 0], 0.693147, abs_tol=1e-6)


def test_kl_ce_match_dense_oracle():
    rng = np.random.default_rng(0)
    dists = random_dists(rng, 16, 5)
    soft = _soft_from_dists(dists, (4, 4))
    pred = PredictionMap(np.moveaxis(random_dists(rng, 16, 5, 0.2).reshape(4, 4, 5), -1, 0))
    _, kl = kl_loss(pred, soft)
    _, ce = ce_loss(pred, soft)
    for r in range(4):
        for c in range(4):
            entries, _ = soft.pixel(r, c)
            total = sum(entries.values())
            q = {k: v / total for k, v in entries.items()}
            g = pred.data[:, r, c]
            assert abs(kl.values[r, c] - total * oracles.kl_pixel(q, g)) <= 1e-9
            assert abs(ce.values[r, c] - total * oracles.ce_pixel(q, g)) <= 1e-9


def test_ce_entropy_identities():
    one = _soft_from_dists([[0, 1.0, 0]], (1, 1))
    assert ce_loss(_matching_pred(one), one)[0] == 0.0
    half = _soft_from_dists([[0.5, 0.5]], (1, 1))
    pred = _matching_pred(half)
    assert math.isclose(ce_loss(pred, half)[0], math.log(2), abs_tol=1e-12)
    assert abs(kl_loss(pred, half)[0]) <= 1e-12


def test_ce_minus_kl_is_entropy_random():
    rng = np.random.default_rng(3)
    soft = _soft_from_dists(random_dists(rng, 64, 6), (8, 8))
    pred = PredictionMap(np.moveaxis(random_dists(rng, 64, 6, 0.0).reshape(8, 8, 6), -1, 0))
    _, kl = kl_loss(pred, soft)
    _, ce = ce_loss(pred, soft)
    np.testing.assert_allclose(ce.values - kl.values, soft_entropy(soft), atol=1e-9, rtol=0)


def test_ignore_mass_handling():
    soft = SoftLabelMap(1, 3, 2, [0, 1, 2, 2], [0, 1], [0.5, 1.0], [0.5, 0.0, 1.0])
    pred = PredictionMap(np.array([[[0.5, 0.5, 0.5]], [[0.5, 0.5, 0.5]]]))
    value, lmap = kl_loss(pred, soft)
    assert lmap.included.tolist() == [[True, True, False]]
    np.testing.assert_allclose(lmap.values, [[0.5 * math.log(2), math.log(2), 0.0]])
    assert math.isclose(value, 0.75 * math.log(2))
    # partially ignored pixels are multi-class under the single-class rule
    _, lmap = kl_loss(pred, soft, EXCLUDE_MC)
    assert lmap.included.tolist() == [[False, True, False]]


def test_probability_floor():
    soft = _soft_from_dists([[1.0, 0.0]], (1, 1))
    value, _ = kl_loss(PredictionMap(np.array([[[0.0]], [[1.0]]])), soft)
    assert math.isclose(value, -math.log(1e-12))


def test_shape_mismatch():
    soft = _soft_from_dists([[1.0, 0.0]], (1, 1))
    with pytest.raises(DimensionError):
        kl_loss(PredictionMap(np.full((2, 1, 2), 0.5)), soft)
    with pytest.raises(DimensionError):
        ce_loss(PredictionMap(np.full((4, 1, 1), 0.25)), soft)
    with pytest.raises(ValueError):
        kl_loss(PredictionMap(np.full((2, 1, 1), 0.5)), soft, "sometimes")


def test_exclude_mc_is_noop_on_nearest_labels():
    rng = np.random.default_rng(7)
    lab = random_labels(rng, 32, 32, 5, ignore_fraction=0.1)
    soft = downsample_labels(lab, KernelSpec("nearest", "1/4"))
    pred = PredictionMap(np.moveaxis(random_dists(rng, 64, 5, 0.0).reshape(8, 8, 5), -1, 0))
    for fn in (kl_loss, ce_loss):
        a, ma = fn(pred, soft, INCLUDE_MC)
        b, mb = fn(pred, soft, EXCLUDE_MC)
        assert a == b
        assert np.array_equal(ma.values, mb.values)


@given(st.integers(0, 2**31), st.integers(2, 6))
@settings(max_examples=50, deadline=None)
def test_kl_nonnegative(seed, c):
    rng = np.random.default_rng(seed)
    lab = random_labels(rng, 8, 8, c, ignore_fraction=0.2)
    soft = downsample_labels(lab, KernelSpec("bilinear", "1/2"))
    pred = PredictionMap(np.moveaxis(random_dists(rng, 16, c, 0.3).reshape(4, 4, c), -1, 0))
    _, lmap = kl_loss(pred, soft)
    assert (lmap.values >= -1e-12).all()
    value, _ = kl_loss(_matching_pred(soft), soft)
    assert abs(value) <= 1e-9


def test_export_loss_map():
    zero = LossMap(np.zeros((2, 2)), np.ones((2, 2), bool))
    assert (export_loss_map(zero) == 0).all()
    lm = LossMap(np.array([[0.0, 2.0, 4.0]]), np.ones((1, 3), bool))
    assert export_loss_map(lm).tolist() == [[0.0, 0.5, 1.0]]
    assert export_loss_map(lm, normalize=False).tolist() == [[0.0, 2.0, 4.0]]
    excluded = LossMap(np.array([[9.0, 1.0]]), np.array([[False, True]]))
    assert export_loss_map(excluded).tolist() == [[0.0, 1.0]]


@given(st.integers(0, 2**31))
@settings(max_examples=30)
def test_normalized_map_peaks_at_one(seed):
    rng = np.random.default_rng(seed)
    vals = rng.random((5, 5)) * 10
    inc = rng.random((5, 5)) < 0.7
    inc[0, 0] = True
    out = export_loss_map(LossMap(np.where(inc, vals, 0.0), inc))
    assert out.max() == pytest.approx(1.0)
    assert (out[~inc] == 0).all()
