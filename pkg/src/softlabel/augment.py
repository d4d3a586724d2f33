"""Seeded random-resize + random-crop augmentation of color/label pairs.

The scale is drawn relative to the source image size, so it composes directly
with the resampling kernels. Randomness comes from a Philox generator keyed by
``(seed, sample_index)``: every sample is reproducible on its own, independent
of processing order or worker layout.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .errors import ConfigError
from .labels import LabelImage, SoftLabelMap
from .resample import ColorImage, KernelSpec, downsample_color, downsample_labels

SCALE_DENOMINATOR = 4096
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class AugmentSpec:
    crop_size: tuple
    scale_range: tuple = (0.5, 2.0)
    kernel_kind: str = "bilinear"
    alignment: str = "half_pixel_center"
    seed: int = 0
    pad: bool = True

    def __post_init__(self):
        ch, cw = self.crop_size
        lo, hi = self.scale_range
        if ch < 1 or cw < 1:
            raise ConfigError(f"crop size must be at least 1x1, got {self.crop_size}")
        if not 0 < lo <= hi:
            raise ConfigError(f"scale range must satisfy 0 < lo <= hi, got {self.scale_range}")
        if self.kernel_kind not in ("bilinear", "area", "nearest"):
            raise ConfigError(f"unsupported augmentation kernel {self.kernel_kind!r}")

    def check_image(self, height, width):
        """Without padding, even the largest resize must cover the crop."""
        if self.pad:
            return
        hi = Fraction(self.scale_range[1])
        if int(hi * height) < self.crop_size[0] or int(hi * width) < self.crop_size[1]:
            raise ConfigError(f"crop {self.crop_size} exceeds a {height}x{width} image resized by "
                              f"at most {self.scale_range[1]} and padding is disabled")


@dataclass(frozen=True)
class AppliedParams:
    scale: str            # exact rational, e.g. "2731/4096"
    crop_origin: tuple    # (top, left) in resized-then-padded coordinates
    pad: tuple            # (bottom, right) rows/cols appended before cropping
    resized_size: tuple
    sample_index: int

    @property
    def gamma(self) -> Fraction:
        return Fraction(self.scale)

    def to_dict(self):
        d = asdict(self)
        d["crop_origin"] = list(self.crop_origin)
        d["pad"] = list(self.pad)
        d["resized_size"] = list(self.resized_size)
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(str(d["scale"]), tuple(d["crop_origin"]), tuple(d["pad"]),
                   tuple(d["resized_size"]), int(d["sample_index"]))


def sample_rng(seed, sample_index) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed & _MASK64, sample_index & _MASK64]))


def draw_scale(spec: AugmentSpec, rng) -> Fraction:
    lo, hi = spec.scale_range
    u = rng.uniform(lo, hi)
    # quantized to a fixed rational grid so the kernel stays exact
    q = Fraction(round(u * SCALE_DENOMINATOR), SCALE_DENOMINATOR)
    return max(q, Fraction(1, SCALE_DENOMINATOR))


def draw_params(spec: AugmentSpec, in_size, sample_index) -> AppliedParams:
    spec.check_image(*in_size)
    rng = sample_rng(spec.seed, sample_index)
    scale = draw_scale(spec, rng)
    kernel = KernelSpec(spec.kernel_kind, scale, spec.alignment)
    rh, rw = kernel.out_size(in_size)
    ch, cw = spec.crop_size
    if not spec.pad and (rh < ch or rw < cw):
        raise ConfigError(f"resized image {rh}x{rw} is smaller than crop {ch}x{cw} and padding is disabled")
    pad = (max(0, ch - rh), max(0, cw - rw))
    top = int(rng.integers(0, rh + pad[0] - ch + 1))
    left = int(rng.integers(0, rw + pad[1] - cw + 1))
    return AppliedParams(str(scale), (top, left), pad, (rh, rw), sample_index)


def apply_params(color: ColorImage, label: LabelImage, spec: AugmentSpec, params: AppliedParams):
    """Deterministic half of :func:`augment`: resize and crop with recorded parameters.

    Only the rows/cols inside the crop window are resampled; padding is
    appended bottom/right (zeros for color, full ignore mass for labels).
    """
    if color.shape != label.shape:
        raise ConfigError(f"color {color.shape} and label {label.shape} differ in size")
    kernel = KernelSpec(spec.kernel_kind, params.gamma, spec.alignment)
    rh, rw = kernel.out_size(label.shape)
    if (rh, rw) != tuple(params.resized_size):
        raise ConfigError(f"recorded resized size {params.resized_size} does not match {rh}x{rw}")
    ch, cw = spec.crop_size
    top, left = params.crop_origin
    rows = (min(top, rh), min(top + ch, rh))
    cols = (min(left, rw), min(left + cw, rw))
    vh, vw = rows[1] - rows[0], cols[1] - cols[0]

    crop_color = np.zeros((3, ch, cw))
    soft = None
    if vh > 0 and vw > 0:
        crop_color[:, :vh, :vw] = downsample_color(color, kernel, rows, cols).data
        soft = downsample_labels(label, kernel, rows, cols)
    if soft is None:
        empty = np.zeros(ch * cw + 1, dtype=np.int64)
        soft = SoftLabelMap(ch, cw, label.num_classes, empty, [], [], np.ones(ch * cw, dtype=np.float32))
    elif soft.shape != (ch, cw):
        soft = soft.pad_to(ch, cw)
    return ColorImage(crop_color), soft


def augment(color: ColorImage, label: LabelImage, spec: AugmentSpec, sample_index: int):
    """Returns ``(ColorImage, SoftLabelMap, AppliedParams)`` for one sample."""
    params = draw_params(spec, label.shape, sample_index)
    out_color, out_soft = apply_params(color, label, spec, params)
    return out_color, out_soft, params
