"""File plumbing: PNG images, PRD1 prediction tensors, atomic writes."""
from __future__ import annotations

import hashlib
import io
import os
import struct
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError
from .losses import PredictionMap

PRD_MAGIC = b"PRD1"
PRD_HEADER = struct.Struct("<4sIII")  # magic, C, H, W -> 16 bytes


def atomic_write(path, data: bytes):
    """Write-temp-then-rename so readers never observe a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    return sha256_bytes(Path(path).read_bytes())


def read_rgb(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def read_gray(path) -> np.ndarray:
    """8-bit single-channel label IDs; palette images keep their index values."""
    with Image.open(path) as im:
        if im.mode not in ("L", "P", "I", "I;16"):
            raise FormatError(f"{path}: label PNG must be single-channel, got mode {im.mode}")
        return np.asarray(im).astype(np.int32)


def png_bytes(array: np.ndarray) -> bytes:
    array = np.asarray(array)
    if array.ndim == 2:
        im = Image.fromarray(array.astype(np.uint8), mode="L")
    else:
        im = Image.fromarray(array.astype(np.uint8), mode="RGB")
    buf = io.BytesIO()
    im.save(buf, format="PNG")
    return buf.getvalue()


def float_tiff_bytes(array: np.ndarray) -> bytes:
    """32-bit float grayscale image."""
    buf = io.BytesIO()
    Image.fromarray(np.asarray(array, dtype=np.float32), mode="F").save(buf, format="TIFF")
    return buf.getvalue()


def encode_prd(pred: PredictionMap) -> bytes:
    c, h, w = pred.data.shape
    return PRD_HEADER.pack(PRD_MAGIC, c, h, w) + pred.data.astype("<f4").tobytes()


def decode_prd(data: bytes) -> PredictionMap:
    if len(data) < PRD_HEADER.size:
        raise FormatError("prediction file shorter than its header")
    magic, c, h, w = PRD_HEADER.unpack_from(data)
    if magic != PRD_MAGIC:
        raise FormatError(f"bad prediction magic {magic!r}")
    expected = PRD_HEADER.size + 4 * c * h * w
    if len(data) != expected:
        raise FormatError(f"prediction file is {len(data)} bytes, expected {expected}")
    arr = np.frombuffer(data, dtype="<f4", offset=PRD_HEADER.size).reshape(c, h, w)
    return PredictionMap(arr.astype(np.float64))


def write_prd(pred: PredictionMap, path):
    atomic_write(path, encode_prd(pred))


def read_prd(path) -> PredictionMap:
    return decode_prd(Path(path).read_bytes())
