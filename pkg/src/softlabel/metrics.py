"""Information-conservation metrics for down-sampled labels, plus IoU/mIoU."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DimensionError, SoftLabelError
from .labels import LabelImage, SoftLabelMap


@dataclass
class ClassHistogram:
    """Per-class pixel count (hard) or summed weight (soft), with ignore tracked apart."""

    counts: np.ndarray
    ignore: float = 0.0
    includes_ignore: bool = True

    @property
    def num_classes(self):
        return len(self.counts)

    @property
    def total(self):
        return float(self.counts.sum()) + float(self.ignore)

    @property
    def valid_total(self):
        return float(self.counts.sum())

    def merge(self, other: "ClassHistogram") -> "ClassHistogram":
        if other.num_classes != self.num_classes:
            raise DimensionError("cannot merge histograms with different class counts")
        return ClassHistogram(self.counts + other.counts, self.ignore + other.ignore)

    def distribution(self):
        total = self.valid_total
        return self.counts / total if total > 0 else np.zeros_like(self.counts, dtype=np.float64)


def _region_bounds(shape, region):
    if region is None:
        return 0, 0, shape[0], shape[1]
    top, left, h, w = region
    if top < 0 or left < 0 or h < 1 or w < 1 or top + h > shape[0] or left + w > shape[1]:
        raise IndexError(f"region {tuple(region)} outside image of size {shape}")
    return top, left, h, w


def class_histogram(labels, region=None, exact=False) -> ClassHistogram:
    """``region`` is ``(top, left, height, width)``. ``exact`` sums soft weights as Fractions."""
    top, left, h, w = _region_bounds(labels.shape, region)
    if isinstance(labels, LabelImage):
        sub = labels.data[top:top + h, left:left + w].reshape(-1)
        valid = sub != labels.ignore
        counts = np.bincount(sub[valid], minlength=labels.num_classes).astype(np.float64)
        return ClassHistogram(counts, float((~valid).sum()))
    if isinstance(labels, SoftLabelMap):
        if region is not None:
            labels = labels.crop(top, left, h, w)
        cid = labels.class_ids.astype(np.int64)
        if exact:
            counts = [Fraction(0)] * labels.num_classes
            for k, v in zip(cid.tolist(), labels.weights.tolist()):
                counts[k] += Fraction(v)
            ignore = sum((Fraction(v) for v in labels.ignore_mass.tolist()), Fraction(0))
            return ClassHistogram(np.array(counts, dtype=object), ignore)
        counts = np.bincount(cid, weights=labels.weights.astype(np.float64), minlength=labels.num_classes)
        return ClassHistogram(counts, float(labels.ignore_mass.astype(np.float64).sum()))
    raise TypeError(f"expected LabelImage or SoftLabelMap, got {type(labels).__name__}")


def entropy(hist: ClassHistogram) -> float:
    """Shannon entropy (nats) of the valid-class distribution."""
    total = hist.valid_total
    if not total > 0:
        raise SoftLabelError("entropy of an empty histogram is undefined")
    p = np.asarray(hist.counts, dtype=np.float64) / total
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


@dataclass
class RetentionReport:
    """Percent class-mass change after down-sampling, relative to proportional conservation.

    ``per_class[c]`` is ``None`` for classes absent from the original.
    """

    per_class_pct_diff: list
    scale: Fraction
    strategy: str
    original: ClassHistogram = field(repr=False, default=None)
    down: ClassHistogram = field(repr=False, default=None)

    def to_dict(self, miou=None):
        return {
            "strategy": self.strategy,
            "gamma": str(self.scale),
            "per_class": {str(c): (None if v is None else float(v))
                          for c, v in enumerate(self.per_class_pct_diff)},
            "miou": miou,
        }

    def to_json(self, miou=None):
        return json.dumps(self.to_dict(miou), indent=2, sort_keys=True) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["class_id", "original_mass", "downsampled_mass", "pct_diff"])
        for c, v in enumerate(self.per_class_pct_diff):
            writer.writerow([c, _fmt(self.original.counts[c]), _fmt(self.down.counts[c]),
                             "NA" if v is None else repr(float(v))])
        return buf.getvalue()


def _fmt(x):
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


def infer_strategy(down, kernel_kind=None):
    if isinstance(down, LabelImage):
        return "nearest"
    return f"soft_{kernel_kind}" if kernel_kind else "soft"


def retention_from_histograms(original: ClassHistogram, down: ClassHistogram, scale, strategy) -> RetentionReport:
    scale = Fraction(scale)
    exact = down.counts.dtype == object
    pct = []
    for n_c, m_c in zip(original.counts, down.counts):
        if n_c == 0:
            pct.append(None)
        elif exact:
            pct.append(100 * (Fraction(m_c) / (scale ** 2 * Fraction(n_c)) - 1))
        else:
            pct.append(100.0 * (float(m_c) / (float(scale) ** 2 * float(n_c)) - 1.0))
    return RetentionReport(pct, scale, strategy, original, down)


def retention_report(original: LabelImage, down, scale, strategy=None, exact=False) -> RetentionReport:
    scale = Fraction(scale)
    expected = tuple(max(1, math.floor(scale * n)) for n in original.shape)
    if tuple(down.shape) != expected:
        raise DimensionError(f"down-sampled size {tuple(down.shape)} does not match scale {scale} "
                             f"of original {original.shape} (expected {expected})")
    if down.num_classes != original.num_classes:
        raise DimensionError("class counts differ between original and down-sampled labels")
    hist_down = class_histogram(down, exact=exact and isinstance(down, SoftLabelMap))
    return retention_from_histograms(class_histogram(original), hist_down, scale,
                                     strategy or infer_strategy(down))


@dataclass
class ConfusionMatrix:
    """Rows are ground truth, columns are predictions."""

    counts: np.ndarray

    @property
    def num_classes(self):
        return self.counts.shape[0]

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.counts.shape != self.counts.shape:
            raise DimensionError("cannot merge confusion matrices of different size")
        return ConfusionMatrix(self.counts + other.counts)


def confusion(pred: LabelImage, gt: LabelImage) -> ConfusionMatrix:
    """Ground-truth ignore pixels are skipped; predictions must be valid where evaluated."""
    if pred.shape != gt.shape:
        raise DimensionError(f"prediction {pred.shape} and ground truth {gt.shape} differ in size")
    if pred.num_classes != gt.num_classes:
        raise DimensionError("prediction and ground truth disagree on the number of classes")
    c = gt.num_classes
    evaluated = gt.data != gt.ignore
    g = gt.data[evaluated].astype(np.int64)
    p = pred.data[evaluated].astype(np.int64)
    if (p >= c).any():
        raise DimensionError("prediction carries the ignore label at evaluated pixels")
    return ConfusionMatrix(np.bincount(g * c + p, minlength=c * c).reshape(c, c))


def iou(cm: ConfusionMatrix):
    """Per-class IoU (NaN where TP+FP+FN is zero) and the mean over defined classes."""
    counts = cm.counts.astype(np.float64)
    if counts.sum() == 0:
        raise SoftLabelError("IoU of an empty confusion matrix is undefined")
    tp = np.diag(counts)
    denom = counts.sum(axis=1) + counts.sum(axis=0) - tp
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class = np.where(denom > 0, tp / denom, np.nan)
    return per_class, float(np.nanmean(per_class))
