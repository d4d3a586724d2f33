"""Synthetic inputs for checks and demos."""
from __future__ import annotations

import numpy as np

from .labels import IGNORE, LabelImage
from .resample import ColorImage


def thin_line_image(size=64, thin_class=1, background=0, num_classes=2) -> LabelImage:
    """One-pixel anti-diagonal (row + col == size - 1) of ``thin_class`` on ``background``.

    The anti-diagonal avoids the half-pixel nearest sample grid at 1/8, so the
    baseline drops the structure entirely; a main diagonal would pass through
    every sample point instead.
    """
    data = np.full((size, size), background, dtype=np.int32)
    idx = np.arange(size)
    data[idx, size - 1 - idx] = thin_class
    return LabelImage(data, num_classes)


def random_labels(rng, height, width, num_classes, ignore_fraction=0.0) -> LabelImage:
    data = rng.integers(0, num_classes, size=(height, width)).astype(np.int32)
    if ignore_fraction > 0:
        data[rng.random((height, width)) < ignore_fraction] = IGNORE
    return LabelImage(data, num_classes)


def blocky_labels(rng, height, width, num_classes, block=16) -> LabelImage:
    """Piecewise-constant label layout, closer to real segmentation maps than i.i.d. noise."""
    bh, bw = -(-height // block), -(-width // block)
    coarse = rng.integers(0, num_classes, size=(bh, bw))
    data = np.repeat(np.repeat(coarse, block, axis=0), block, axis=1)[:height, :width]
    return LabelImage(data.astype(np.int32), num_classes)


def smooth_color(rng, height, width) -> ColorImage:
    yy, xx = np.mgrid[0:height, 0:width]
    phase = rng.random(3) * 2 * np.pi
    freq = 1 + rng.random(3) * 4
    chans = [0.5 + 0.5 * np.sin(freq[k] * (yy / height + xx / width) * np.pi + phase[k]) for k in range(3)]
    return ColorImage(np.stack(chans))
