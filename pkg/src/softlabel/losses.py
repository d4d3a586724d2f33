"""KL and cross-entropy between a predicted probability map and soft labels.

A pixel's valid-class weights are renormalized to a distribution before the
divergence is taken, and the result is then scaled by the valid mass
``1 - ignore_mass``. Fully ignored pixels are excluded. The scalar loss is the
mean over included pixels.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .labels import EPS, SoftLabelMap, is_single_class

PROB_FLOOR = 1e-12
INCLUDE_MC = "include_mc"
EXCLUDE_MC = "exclude_mc"


@dataclass(frozen=True, eq=False)
class PredictionMap:
    """``(C, H, W)`` per-pixel class probabilities."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise DimensionError(f"prediction must have shape (C, H, W), got {data.shape}")
        if not np.isfinite(data).all() or (data < 0).any():
            raise ValueError("probabilities must be finite and non-negative")
        sums = data.sum(axis=0)
        if (np.abs(sums - 1.0) > 1e-5).any():
            r, c = np.argwhere(np.abs(sums - 1.0) > 1e-5)[0]
            raise ValueError(f"probabilities at ({r}, {c}) sum to {sums[r, c]:.7g}")
        data = np.ascontiguousarray(data)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def num_classes(self):
        return self.data.shape[0]

    @property
    def shape(self):
        return self.data.shape[1:]

    @classmethod
    def from_labels(cls, labels, num_classes):
        """One-hot prediction from an ``(H, W)`` array of class IDs."""
        labels = np.asarray(labels)
        if labels.min() < 0 or labels.max() >= num_classes:
            raise ValueError("hard prediction contains ids outside the class range")
        data = np.zeros((num_classes,) + labels.shape)
        np.put_along_axis(data, labels[None].astype(np.int64), 1.0, axis=0)
        return cls(data)

    def argmax(self):
        return self.data.argmax(axis=0).astype(np.int32)


@dataclass(frozen=True, eq=False)
class LossMap:
    values: np.ndarray
    included: np.ndarray

    @property
    def shape(self):
        return self.values.shape


def _check(pred, soft):
    if pred.shape != soft.shape:
        raise DimensionError(f"prediction {pred.shape} and labels {soft.shape} differ in size")
    if pred.num_classes != soft.num_classes:
        raise DimensionError(f"prediction has {pred.num_classes} classes, labels have {soft.num_classes}")


def _entry_terms(pred, soft):
    pix = soft.pixel_index()
    valid = soft.valid_mass().reshape(-1)
    q = soft.weights.astype(np.float64) / valid[pix]
    g = pred.data.reshape(pred.num_classes, -1)[soft.class_ids.astype(np.int64), pix]
    return pix, q, np.log(np.maximum(g, PROB_FLOOR)), valid


def _reduce(per_entry, pix, valid, soft, mc_mode):
    n = soft.num_pixels
    raw = np.bincount(pix, weights=per_entry, minlength=n)
    included = valid > EPS
    if mc_mode == EXCLUDE_MC:
        included &= is_single_class(soft).reshape(-1)
    elif mc_mode != INCLUDE_MC:
        raise ValueError(f"mc_mode must be {INCLUDE_MC!r} or {EXCLUDE_MC!r}, got {mc_mode!r}")
    values = np.where(included, raw * valid, 0.0)
    count = int(included.sum())
    scalar = float(values[included].sum() / count) if count else 0.0
    return scalar, LossMap(values.reshape(soft.shape), included.reshape(soft.shape))


def kl_loss(pred: PredictionMap, soft: SoftLabelMap, mc_mode=INCLUDE_MC):
    """Returns ``(mean_loss, LossMap)``."""
    _check(pred, soft)
    pix, q, log_g, valid = _entry_terms(pred, soft)
    return _reduce(q * (np.log(q) - log_g), pix, valid, soft, mc_mode)


def ce_loss(pred: PredictionMap, soft: SoftLabelMap, mc_mode=INCLUDE_MC):
    _check(pred, soft)
    pix, q, log_g, valid = _entry_terms(pred, soft)
    return _reduce(-q * log_g, pix, valid, soft, mc_mode)


def soft_entropy(soft: SoftLabelMap) -> np.ndarray:
    """Per-pixel entropy (nats) of the renormalized valid distribution, scaled by valid mass."""
    pix = soft.pixel_index()
    valid = soft.valid_mass().reshape(-1)
    q = soft.weights.astype(np.float64) / valid[pix]
    h = np.bincount(pix, weights=-q * np.log(q), minlength=soft.num_pixels)
    return (h * valid).reshape(soft.shape)


def export_loss_map(loss_map: LossMap, normalize=True) -> np.ndarray:
    out = np.where(loss_map.included, loss_map.values, 0.0)
    if normalize:
        peak = out.max() if out.size else 0.0
        if peak > 0:
            out = out / peak
    return out.astype(np.float32)
