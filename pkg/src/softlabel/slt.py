"""SLT1 container: canonical little-endian serialization of a SoftLabelMap.

Layout::

    offset size  field
    0      4     magic b"SLT1"
    4      2     version (u16) = 1
    6      4     height (u32)
    10     4     width (u32)
    14     2     num_classes (u16)
    16     2     flags (u16), bit 0 set when any pixel has ignore mass
    18     ...   payload: per pixel, row-major:
                   u8 entry_count
                   entry_count x (u16 class_id, f32 weight)
                   f32 ignore_mass             (only when flag bit 0 is set)
    end-4  4     CRC32 of the payload (u32)
"""
from __future__ import annotations

import struct
import zlib

import numpy as np

from .errors import FormatError, ValidationError
from .labels import SoftLabelMap

MAGIC = b"SLT1"
VERSION = 1
FLAG_IGNORE = 0x1
HEADER = struct.Struct("<4sHIIHH")
CRC = struct.Struct("<I")
MAX_ENTRIES = 255

_ENTRY = np.dtype([("cid", "<u2"), ("w", "<f4")])


def encode(soft: SoftLabelMap) -> bytes:
    counts = soft.counts
    if len(counts) and counts.max() > MAX_ENTRIES:
        p = int(np.argmax(counts))
        raise ValidationError(f"{counts[p]} entries exceed the u8 entry count", (p // soft.width, p % soft.width))
    has_ignore = bool((soft.ignore_mass > 0).any())
    tail = 4 if has_ignore else 0
    rec_len = 1 + 6 * counts + tail
    rec_start = np.zeros(soft.num_pixels, dtype=np.int64)
    np.cumsum(rec_len[:-1], out=rec_start[1:])
    payload = np.zeros(int(rec_len.sum()), dtype=np.uint8)
    payload[rec_start] = counts.astype(np.uint8)

    entries = np.empty(len(soft.class_ids), dtype=_ENTRY)
    entries["cid"] = soft.class_ids
    entries["w"] = soft.weights
    entry_bytes = entries.view(np.uint8).reshape(-1, 6)
    pix = soft.pixel_index()
    slot = np.arange(len(pix)) - soft.offsets[pix]
    base = rec_start[pix] + 1 + 6 * slot
    payload[base[:, None] + np.arange(6)] = entry_bytes
    if has_ignore:
        ign = soft.ignore_mass.astype("<f4").view(np.uint8).reshape(-1, 4)
        payload[(rec_start + 1 + 6 * counts)[:, None] + np.arange(4)] = ign

    payload = payload.tobytes()
    header = HEADER.pack(MAGIC, VERSION, soft.height, soft.width, soft.num_classes,
                         FLAG_IGNORE if has_ignore else 0)
    return header + payload + CRC.pack(zlib.crc32(payload))


def decode(data: bytes) -> SoftLabelMap:
    if len(data) < HEADER.size + CRC.size:
        raise FormatError(f"container too short ({len(data)} bytes)")
    magic, version, height, width, num_classes, flags = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    if flags & ~FLAG_IGNORE:
        raise FormatError(f"unknown flag bits 0x{flags:04x}")
    payload = data[HEADER.size:-CRC.size]
    (stored,) = CRC.unpack_from(data, len(data) - CRC.size)
    if zlib.crc32(payload) != stored:
        raise FormatError("CRC mismatch")

    n = height * width
    tail = 4 if flags & FLAG_IGNORE else 0
    buf = np.frombuffer(payload, dtype=np.uint8)
    counts = np.empty(n, dtype=np.int64)
    starts = np.empty(n, dtype=np.int64)
    pos = 0
    size = len(payload)
    for p in range(n):
        if pos >= size:
            raise FormatError(f"payload truncated at pixel {p}")
        k = payload[pos]
        counts[p] = k
        starts[p] = pos
        pos += 1 + 6 * k + tail
    if pos != size:
        raise FormatError(f"payload length mismatch ({size - pos} trailing bytes)")

    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    pix = np.repeat(np.arange(n), counts)
    slot = np.arange(offsets[-1]) - offsets[pix]
    entry_pos = starts[pix] + 1 + 6 * slot
    raw = buf[entry_pos[:, None] + np.arange(6)].copy().view(_ENTRY).reshape(-1)
    if tail:
        ignore = buf[(starts + 1 + 6 * counts)[:, None] + np.arange(4)].copy().view("<f4").reshape(-1)
    else:
        ignore = np.zeros(n, dtype=np.float32)
    return SoftLabelMap(height, width, num_classes, offsets, raw["cid"], raw["w"], ignore)


def write_slt(soft: SoftLabelMap, sink) -> int:
    """Write to a path or binary file object; returns the byte count."""
    data = encode(soft)
    if hasattr(sink, "write"):
        sink.write(data)
    else:
        with open(sink, "wb") as fh:
            fh.write(data)
    return len(data)


def read_slt(source) -> SoftLabelMap:
    if hasattr(source, "read"):
        return decode(source.read())
    with open(source, "rb") as fh:
        return decode(fh.read())


def export_dense(soft: SoftLabelMap, with_ignore=False) -> np.ndarray:
    """``(C, H, W)`` float32 planes, plus a trailing ignore plane when requested."""
    return soft.to_dense(with_ignore=with_ignore, dtype=np.float32)


def container_size(height, width, entry_counts, has_ignore=False):
    """Predicted byte size of a container."""
    n = height * width
    return HEADER.size + n + 6 * int(np.sum(entry_counts)) + (4 * n if has_ignore else 0) + CRC.size
