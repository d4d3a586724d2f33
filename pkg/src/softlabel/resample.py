"""Separable nearest / bilinear / area kernels shared by color and label down-sampling.

Tap positions and weights are derived in exact rational arithmetic per axis and
cached; both the color path and the label path consume the same cached taps,
which is what makes the two outputs pixel-aligned.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import DimensionError, KernelError
from .labels import LabelImage, SoftLabelMap

KINDS = ("nearest", "bilinear", "area")
ALIGNMENTS = ("half_pixel_center", "top_left")


def parse_scale(value) -> Fraction:
    """Accept ``Fraction``, int, ``"1/8"``, ``"0.5"``; floats are taken exactly."""
    if isinstance(value, Fraction):
        scale = value
    elif isinstance(value, str):
        scale = Fraction(value.strip())
    else:
        scale = Fraction(value)
    if scale <= 0:
        raise KernelError(f"scale must be positive, got {value!r}")
    return scale


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "bilinear"
    scale: Fraction = Fraction(1, 2)
    alignment: str = "half_pixel_center"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise KernelError(f"unknown kernel kind {self.kind!r}; expected one of {KINDS}")
        if self.alignment not in ALIGNMENTS:
            raise KernelError(f"unknown alignment {self.alignment!r}; expected one of {ALIGNMENTS}")
        object.__setattr__(self, "scale", parse_scale(self.scale))

    def out_len(self, n):
        return max(1, math.floor(self.scale * n))

    def out_size(self, in_size):
        return (self.out_len(in_size[0]), self.out_len(in_size[1]))

    def max_taps_per_axis(self):
        if self.kind == "nearest":
            return 1
        if self.kind == "bilinear":
            return 2
        footprint = 1 / self.scale
        aligned = self.alignment == "half_pixel_center" and footprint.denominator == 1
        return math.ceil(footprint) + (0 if aligned else 1)

    def to_dict(self):
        return {"kind": self.kind, "scale": str(self.scale), "alignment": self.alignment}


@dataclass(frozen=True)
class TapSet:
    target: tuple
    taps: tuple  # ((row, col), weight) sorted by (row, col)

    def total(self):
        return sum(w for _, w in self.taps)


def _source_coord(t, kernel):
    # pixel-center coordinate in the source grid that target index t maps to
    if kernel.alignment == "half_pixel_center":
        return (t + Fraction(1, 2)) / kernel.scale - Fraction(1, 2)
    return t / kernel.scale


def _clamp(i, n):
    return min(max(i, 0), n - 1)


def _axis_taps_one(t, n, kernel):
    s = _source_coord(t, kernel)
    acc = {}
    if kernel.kind == "nearest":
        acc[_clamp(math.ceil(s - Fraction(1, 2)), n)] = Fraction(1)
    elif kernel.kind == "bilinear":
        lo = math.floor(s)
        frac = s - lo
        for j, w in ((lo, 1 - frac), (lo + 1, frac)):
            if w:
                j = _clamp(j, n)
                acc[j] = acc.get(j, 0) + w
    else:
        half = 1 / (2 * kernel.scale)
        a, b = s + Fraction(1, 2) - half, s + Fraction(1, 2) + half
        norm = b - a
        for j in range(math.floor(a), math.ceil(b)):
            w = (min(b, j + 1) - max(a, j)) / norm
            if w > 0:
                j = _clamp(j, n)
                acc[j] = acc.get(j, 0) + w
    return sorted(acc.items())


@lru_cache(maxsize=256)
def axis_taps_exact(kernel: KernelSpec, in_len: int, out_len: int) -> tuple:
    """Per target index along one axis: sorted ``((source_index, Fraction weight), ...)``."""
    return tuple(tuple(_axis_taps_one(t, in_len, kernel)) for t in range(out_len))


@lru_cache(maxsize=256)
def axis_taps(kernel: KernelSpec, in_len: int, out_len: int):
    """Index and float64 weight arrays of shape ``(out_len, K)``; unused slots carry weight 0."""
    exact = axis_taps_exact(kernel, in_len, out_len)
    k = max(len(t) for t in exact)
    idx = np.zeros((out_len, k), dtype=np.int64)
    wts = np.zeros((out_len, k), dtype=np.float64)
    for t, taps in enumerate(exact):
        for slot, (j, w) in enumerate(taps):
            idx[t, slot] = j
            wts[t, slot] = float(w)
        if len(taps) < k:
            idx[t, len(taps):] = taps[-1][0]
    idx.setflags(write=False)
    wts.setflags(write=False)
    return idx, wts


def taps_for(kernel: KernelSpec, out_size, in_size, target) -> TapSet:
    u, v = target
    if not (0 <= u < out_size[0] and 0 <= v < out_size[1]):
        raise IndexError(f"target {target} outside output {out_size}")
    rows = axis_taps_exact(kernel, in_size[0], out_size[0])[u]
    cols = axis_taps_exact(kernel, in_size[1], out_size[1])[v]
    taps = tuple(((h, w), float(wr * wc)) for h, wr in rows for w, wc in cols)
    return TapSet((u, v), taps)


@dataclass(frozen=True, eq=False)
class ColorImage:
    """Channel-first float image with values nominally in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or data.shape[0] != 3:
            raise DimensionError(f"color image must have shape (3, H, W), got {data.shape}")
        if not np.isfinite(data).all():
            raise ValueError("color image contains non-finite values")
        data = np.ascontiguousarray(data)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def height(self):
        return self.data.shape[1]

    @property
    def width(self):
        return self.data.shape[2]

    @property
    def shape(self):
        return self.data.shape[1:]

    @classmethod
    def from_uint8(cls, rgb):
        """From an ``(H, W, 3)`` 8-bit array."""
        return cls(np.moveaxis(np.asarray(rgb), -1, 0) / 255.0)

    def to_uint8(self):
        return np.moveaxis(np.clip(np.rint(self.data * 255.0), 0, 255).astype(np.uint8), 0, -1)

    def __eq__(self, other):
        if not isinstance(other, ColorImage):
            return NotImplemented
        return np.array_equal(self.data, other.data)


def _window(n_out, window):
    if window is None:
        return 0, n_out
    start, stop = window
    if not 0 <= start <= stop <= n_out:
        raise IndexError(f"window {window} outside 0..{n_out}")
    return start, stop


def resample_planes(planes, kernel: KernelSpec, rows=None, cols=None):
    """Apply the separable kernel to a ``(P, H, W)`` array; ``rows``/``cols`` restrict the output window."""
    planes = np.asarray(planes, dtype=np.float64)
    _, h, w = planes.shape
    out_h, out_w = kernel.out_size((h, w))
    r0, r1 = _window(out_h, rows)
    c0, c1 = _window(out_w, cols)
    iy, wy = axis_taps(kernel, h, out_h)
    ix, wx = axis_taps(kernel, w, out_w)
    iy, wy = iy[r0:r1], wy[r0:r1]
    ix, wx = ix[c0:c1], wx[c0:c1]
    tmp = np.zeros((planes.shape[0], r1 - r0, w))
    for k in range(iy.shape[1]):
        tmp += wy[None, :, k, None] * planes[:, iy[:, k], :]
    out = np.zeros((planes.shape[0], r1 - r0, c1 - c0))
    for k in range(ix.shape[1]):
        out += wx[None, None, :, k] * tmp[:, :, ix[:, k]]
    return out


def _check_size(kernel, in_size):
    if min(in_size) < 1:
        raise DimensionError(f"input size {in_size} is degenerate")
    return kernel.out_size(in_size)


def downsample_color(img: ColorImage, kernel: KernelSpec, rows=None, cols=None) -> ColorImage:
    _check_size(kernel, img.shape)
    return ColorImage(resample_planes(img.data, kernel, rows, cols))


def downsample_labels(label: LabelImage, kernel: KernelSpec, rows=None, cols=None) -> SoftLabelMap:
    """Accumulate the kernel's tap weights per class of the tapped source pixels.

    Weights are accumulated in float64 over the (row, col)-sorted tap list and
    stored as float32. Taps landing on ignore pixels feed ``ignore_mass``.
    """
    h, w = label.shape
    out_h, out_w = _check_size(kernel, (h, w))
    r0, r1 = _window(out_h, rows)
    c0, c1 = _window(out_w, cols)
    iy, wy = axis_taps(kernel, h, out_h)
    ix, wx = axis_taps(kernel, w, out_w)
    iy, wy = iy[r0:r1], wy[r0:r1]
    ix, wx = ix[c0:c1], wx[c0:c1]
    oh, ow = r1 - r0, c1 - c0
    ky, kx = iy.shape[1], ix.shape[1]
    c = label.num_classes

    keys = label.data[iy[:, None, :, None], ix[None, :, None, :]]
    keys = np.where(keys == label.ignore, c, keys).reshape(oh * ow, ky * kx)
    weights = (wy[:, None, :, None] * wx[None, :, None, :]).reshape(oh * ow, ky * kx)
    # zero-weight padding slots sort past the ignore key and are dropped below
    keys = np.where(weights > 0, keys, c + 1)
    order = np.argsort(keys, axis=1, kind="stable")
    keys = np.take_along_axis(keys, order, axis=1).reshape(-1)
    weights = np.take_along_axis(weights, order, axis=1).reshape(-1)
    pix = np.repeat(np.arange(oh * ow), ky * kx)

    live = keys <= c
    keys, weights, pix = keys[live], weights[live], pix[live]
    starts = np.flatnonzero(np.concatenate([[True], (keys[1:] != keys[:-1]) | (pix[1:] != pix[:-1])]))
    seg_w = np.add.reduceat(weights, starts) if len(starts) else np.zeros(0)
    seg_k = keys[starts]
    seg_p = pix[starts]

    is_ign = seg_k == c
    ignore_mass = np.zeros(oh * ow)
    ignore_mass[seg_p[is_ign]] = seg_w[is_ign]
    seg_w, seg_k, seg_p = seg_w[~is_ign], seg_k[~is_ign], seg_p[~is_ign]
    offsets = np.zeros(oh * ow + 1, dtype=np.int64)
    np.cumsum(np.bincount(seg_p, minlength=oh * ow), out=offsets[1:])
    return SoftLabelMap(oh, ow, c, offsets, seg_k, seg_w, ignore_mass)


def downsample_labels_nn(label: LabelImage, kernel: KernelSpec) -> LabelImage:
    """Categorical nearest-neighbour baseline."""
    if kernel.kind != "nearest":
        raise KernelError(f"nearest-neighbour label path needs kind='nearest', got {kernel.kind!r}")
    h, w = label.shape
    out_h, out_w = _check_size(kernel, (h, w))
    iy, _ = axis_taps(kernel, h, out_h)
    ix, _ = axis_taps(kernel, w, out_w)
    return LabelImage(label.data[iy[:, 0][:, None], ix[:, 0][None, :]], label.num_classes, label.ignore)


def upsample(img, kernel: KernelSpec):
    """Enlarge a ColorImage or SoftLabelMap with the same tap machinery (scale > 1)."""
    if kernel.scale <= 1:
        raise KernelError(f"upsample needs scale > 1, got {kernel.scale}")
    if isinstance(img, ColorImage):
        return downsample_color(img, kernel)
    if isinstance(img, SoftLabelMap):
        # soft inputs are already mixtures, so resample the dense planes and re-sparsify
        dense = img.to_dense(with_ignore=True, dtype=np.float64)
        out = resample_planes(dense, kernel)
        return SoftLabelMap.from_dense(out[:-1], out[-1])
    raise TypeError(f"cannot upsample {type(img).__name__}")


def resize_pair(color: ColorImage, label: LabelImage, kernel: KernelSpec, rows=None, cols=None):
    """Paired resize at any scale: one kernel instance for color and labels."""
    if color.shape != label.shape:
        raise DimensionError(f"color {color.shape} and label {label.shape} differ in size")
    return downsample_color(color, kernel, rows, cols), downsample_labels(label, kernel, rows, cols)

