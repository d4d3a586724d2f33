"""Categorical label images and their one-hot / sparse soft-label encodings."""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DimensionError, ValidationError

IGNORE = 255
EPS = 1e-6


def _frozen(arr):
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LabelImage:
    """H x W map of class IDs in ``0..num_classes-1`` plus an ignore sentinel."""

    data: np.ndarray
    num_classes: int
    ignore: int = IGNORE

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise DimensionError(f"label image must be a non-empty 2-D array, got shape {data.shape}")
        if not 1 <= self.num_classes <= 65535:
            raise ValueError(f"num_classes must be in [1, 65535], got {self.num_classes}")
        if self.ignore < self.num_classes:
            raise ValueError(f"ignore label {self.ignore} collides with class range 0..{self.num_classes - 1}")
        if not np.issubdtype(data.dtype, np.integer):
            raise TypeError(f"label image must hold integers, got {data.dtype}")
        data = data.astype(np.int32)
        bad = (data < 0) | ((data >= self.num_classes) & (data != self.ignore))
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise ValueError(f"label {data[r, c]} at ({r}, {c}) is neither a class nor the ignore label")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape

    def __eq__(self, other):
        if not isinstance(other, LabelImage):
            return NotImplemented
        return (self.num_classes == other.num_classes and self.ignore == other.ignore
                and np.array_equal(self.data, other.data))


@dataclass(frozen=True, eq=False)
class OneHotMap:
    """Binary planes of shape ``(num_classes + 1, H, W)``; the last plane marks ignore pixels."""

    planes: np.ndarray

    @property
    def num_classes(self):
        return self.planes.shape[0] - 1

    @property
    def ignore_plane(self):
        return self.planes[-1]

    def argmax(self, ignore=IGNORE):
        idx = self.planes.argmax(axis=0).astype(np.int32)
        idx[idx == self.num_classes] = ignore
        return LabelImage(idx, self.num_classes, ignore)


def encode_one_hot(label: LabelImage) -> OneHotMap:
    c = label.num_classes
    plane_idx = np.where(label.data == label.ignore, c, label.data)
    planes = np.zeros((c + 1,) + label.shape, dtype=np.uint8)
    np.put_along_axis(planes, plane_idx[None], 1, axis=0)
    return OneHotMap(_frozen(planes))


@dataclass(frozen=True, eq=False)
class SoftLabelMap:
    """Per-pixel sparse class distributions, stored CSR-style in row-major pixel order.

    Pixel ``p = row * width + col`` owns entries ``offsets[p]:offsets[p + 1]`` of
    ``class_ids`` / ``weights``. Mass that fell on ignore pixels is kept in
    ``ignore_mass`` rather than renormalized away.
    """

    height: int
    width: int
    num_classes: int
    offsets: np.ndarray
    class_ids: np.ndarray
    weights: np.ndarray
    ignore_mass: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "offsets", _frozen(np.asarray(self.offsets, dtype=np.int64)))
        object.__setattr__(self, "class_ids", _frozen(np.asarray(self.class_ids, dtype=np.uint16)))
        object.__setattr__(self, "weights", _frozen(np.asarray(self.weights, dtype=np.float32)))
        object.__setattr__(self, "ignore_mass", _frozen(np.asarray(self.ignore_mass, dtype=np.float32).reshape(-1)))
        if self.validate:
            self.check()

    @property
    def shape(self):
        return (self.height, self.width)

    @property
    def num_pixels(self):
        return self.height * self.width

    @property
    def counts(self):
        return np.diff(self.offsets)

    def pixel_index(self):
        """Owning pixel for every stored entry."""
        return np.repeat(np.arange(self.num_pixels), self.counts)

    def check(self):
        """Raise :class:`ValidationError` naming the first pixel that breaks an invariant."""
        n = self.num_pixels
        if self.height < 1 or self.width < 1:
            raise ValidationError(f"soft label map must be non-empty, got {self.height}x{self.width}")
        if self.offsets.shape != (n + 1,) or self.offsets[0] != 0 or self.offsets[-1] != len(self.class_ids):
            raise ValidationError("offsets do not describe the entry arrays")
        if len(self.weights) != len(self.class_ids) or self.ignore_mass.shape != (n,):
            raise ValidationError("entry/ignore arrays have inconsistent lengths")
        counts = self.counts
        if (counts < 0).any():
            raise ValidationError("offsets are not monotone", self._coords(np.flatnonzero(counts < 0)[0]))
        pix = self.pixel_index()

        def fail(msg, entry_mask=None, pixel_mask=None):
            p = pix[np.flatnonzero(entry_mask)[0]] if entry_mask is not None else np.flatnonzero(pixel_mask)[0]
            raise ValidationError(msg, self._coords(p))

        cid = self.class_ids.astype(np.int64)
        w = self.weights
        if (cid >= self.num_classes).any():
            fail("class id out of range", entry_mask=cid >= self.num_classes)
        if not np.isfinite(w).all() or (w <= 0).any() or (w > 1 + EPS).any():
            fail("weights must be finite and in (0, 1]", entry_mask=~np.isfinite(w) | (w <= 0) | (w > 1 + EPS))
        im = self.ignore_mass
        if not np.isfinite(im).all() or (im < 0).any() or (im > 1 + EPS).any():
            fail("ignore mass must be in [0, 1]", pixel_mask=~np.isfinite(im) | (im < 0) | (im > 1 + EPS))
        if len(cid) > 1:
            same_pixel = pix[1:] == pix[:-1]
            unsorted = same_pixel & (cid[1:] <= cid[:-1])
            if unsorted.any():
                fail("class ids must be unique and ascending", entry_mask=np.concatenate([[False], unsorted]))
        total = np.bincount(pix, weights=w.astype(np.float64), minlength=n) + im.astype(np.float64)
        off = np.abs(total - 1.0) > EPS
        if off.any():
            p = np.flatnonzero(off)[0]
            raise ValidationError(f"mass sums to {total[p]:.7g}, expected 1", self._coords(p))

    def _coords(self, p):
        return (int(p) // self.width, int(p) % self.width)

    def pixel(self, row, col):
        """``({class_id: weight}, ignore_mass)`` for one pixel."""
        p = row * self.width + col
        s, e = self.offsets[p], self.offsets[p + 1]
        return ({int(k): float(v) for k, v in zip(self.class_ids[s:e], self.weights[s:e])},
                float(self.ignore_mass[p]))

    def valid_mass(self):
        """Per-pixel total weight on real classes, as an ``(H, W)`` float64 array."""
        m = np.bincount(self.pixel_index(), weights=self.weights.astype(np.float64),
                        minlength=self.num_pixels)
        return m.reshape(self.shape)

    def to_dense(self, with_ignore=False, dtype=np.float32):
        planes = self.num_classes + (1 if with_ignore else 0)
        out = np.zeros((planes, self.num_pixels), dtype=dtype)
        out[self.class_ids.astype(np.int64), self.pixel_index()] = self.weights
        if with_ignore:
            out[-1] = self.ignore_mass
        return out.reshape((planes,) + self.shape)

    @classmethod
    def from_dense(cls, planes, ignore_mass=None):
        """Build a canonical map from a ``(C, H, W)`` array; zero entries are dropped."""
        planes = np.asarray(planes, dtype=np.float32)
        c, h, w = planes.shape
        flat = planes.reshape(c, -1)
        pix, cid = np.nonzero(flat.T)
        weights = flat[cid, pix]
        offsets = np.zeros(h * w + 1, dtype=np.int64)
        np.cumsum(np.bincount(pix, minlength=h * w), out=offsets[1:])
        if ignore_mass is None:
            ignore_mass = np.zeros(h * w, dtype=np.float32)
        return cls(h, w, c, offsets, cid, weights, np.asarray(ignore_mass, dtype=np.float32).reshape(-1))

    @classmethod
    def from_label(cls, label: LabelImage):
        """Lossless soft view of a hard label image (every pixel single-class or fully ignored)."""
        flat = label.data.reshape(-1)
        valid = flat != label.ignore
        offsets = np.zeros(flat.size + 1, dtype=np.int64)
        np.cumsum(valid, out=offsets[1:])
        return cls(label.height, label.width, label.num_classes, offsets, flat[valid],
                   np.ones(int(valid.sum()), dtype=np.float32), (~valid).astype(np.float32))

    def take(self, index, shape):
        """Gather pixels by flat index into a new map of ``shape``; index ``-1`` yields a fully ignored pixel."""
        index = np.asarray(index, dtype=np.int64).reshape(-1)
        pad = index < 0
        src = np.where(pad, 0, index)
        counts = np.where(pad, 0, self.counts[src])
        offsets = np.zeros(index.size + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        starts = self.offsets[src]
        pos = np.repeat(starts - offsets[:-1], counts) + np.arange(offsets[-1])
        ignore = np.where(pad, np.float32(1.0), self.ignore_mass[src])
        return SoftLabelMap(shape[0], shape[1], self.num_classes, offsets,
                            self.class_ids[pos], self.weights[pos], ignore, validate=False)

    def crop(self, top, left, height, width):
        if top < 0 or left < 0 or top + height > self.height or left + width > self.width:
            raise IndexError(f"crop {height}x{width}+{top}+{left} exceeds {self.height}x{self.width}")
        rows = np.arange(top, top + height)[:, None]
        cols = np.arange(left, left + width)[None, :]
        return self.take(rows * self.width + cols, (height, width))

    def pad_to(self, height, width):
        """Extend bottom/right with fully ignored pixels."""
        if height < self.height or width < self.width:
            raise ValueError("pad_to cannot shrink a map")
        rows = np.arange(height)[:, None]
        cols = np.arange(width)[None, :]
        index = np.where((rows < self.height) & (cols < self.width), rows * self.width + cols, -1)
        return self.take(index, (height, width))

    def __eq__(self, other):
        if not isinstance(other, SoftLabelMap):
            return NotImplemented
        return (self.shape == other.shape and self.num_classes == other.num_classes
                and np.array_equal(self.offsets, other.offsets)
                and np.array_equal(self.class_ids, other.class_ids)
                and np.array_equal(self.weights, other.weights)
                and np.array_equal(self.ignore_mass, other.ignore_mass))


def harden(soft: SoftLabelMap, ignore=IGNORE) -> LabelImage:
    """Argmax export; ties go to the lowest class ID, ignore wins only when it strictly dominates."""
    n = soft.num_pixels
    pix = soft.pixel_index()
    out = np.full(n, ignore, dtype=np.int32)
    if len(pix):
        w = soft.weights.astype(np.float64)
        best = np.full(n, -1.0)
        np.maximum.at(best, pix, w)
        # entries are class-sorted, so the first hit per pixel is the lowest tied class
        hits = np.flatnonzero(w == best[pix])
        first = np.unique(pix[hits], return_index=True)
        winners = hits[first[1]]
        out[pix[winners]] = soft.class_ids[winners]
        out[soft.ignore_mass.astype(np.float64) > best] = ignore
    return LabelImage(out.reshape(soft.shape), soft.num_classes, ignore)


def is_single_class(soft: SoftLabelMap, eps=EPS) -> np.ndarray:
    """Boolean ``(H, W)`` mask of pixels where one class carries (almost) all of the mass."""
    full = np.zeros(soft.num_pixels, dtype=bool)
    hit = soft.weights.astype(np.float64) >= 1.0 - eps
    full[soft.pixel_index()[hit]] = True
    full &= soft.ignore_mass < eps
    return full.reshape(soft.shape)


@dataclass(frozen=True)
class ClassIdMap:
    """Raw dataset IDs to train IDs; anything undeclared maps to ignore."""

    table: dict
    num_train_classes: int
    ignore: int = IGNORE

    def __post_init__(self):
        for raw, tid in self.table.items():
            if tid != self.ignore and not 0 <= tid < self.num_train_classes:
                raise ValueError(f"raw id {raw} maps to {tid}, outside 0..{self.num_train_classes - 1}")

    @classmethod
    def identity(cls, num_classes, ignore=IGNORE):
        return cls({i: i for i in range(num_classes)}, num_classes, ignore)

    @classmethod
    def parse(cls, text, num_train_classes=None, ignore=IGNORE):
        table = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected 'raw_id train_id', got {line!r}")
            raw = int(parts[0])
            table[raw] = ignore if parts[1].lower() == "ignore" else int(parts[1])
        if num_train_classes is None:
            valid = [t for t in table.values() if t != ignore]
            num_train_classes = max(valid) + 1 if valid else 1
        return cls(table, num_train_classes, ignore)

    @classmethod
    def load(cls, path, num_train_classes=None, ignore=IGNORE):
        return cls.parse(Path(path).read_text(), num_train_classes, ignore)

    @classmethod
    def cityscapes(cls):
        text = resources.files("softlabel").joinpath("data/cityscapes_labelids.txt").read_text()
        return cls.parse(text, 19)

    def lookup_table(self, max_raw):
        lut = np.full(max_raw + 1, self.ignore, dtype=np.int32)
        for raw, tid in self.table.items():
            if 0 <= raw <= max_raw:
                lut[raw] = tid
        return lut


def remap_ids(raw: np.ndarray | LabelImage, id_map: ClassIdMap) -> LabelImage:
    """Convert raw dataset IDs (array or LabelImage) to a train-ID LabelImage."""
    data = raw.data if isinstance(raw, LabelImage) else np.asarray(raw)
    if data.size and data.min() < 0:
        raise ValueError("raw label ids must be non-negative")
    lut = id_map.lookup_table(int(data.max()) if data.size else 0)
    return LabelImage(lut[data], id_map.num_train_classes, id_map.ignore)


CITYSCAPES_CLASSES = (
    "road", "sidewalk", "building", "wall", "fence", "pole", "light", "sign",
    "vegetation", "terrain", "sky", "pedestrian", "rider", "car", "truck", "bus",
    "train", "motorcycle", "bicycle",
)
