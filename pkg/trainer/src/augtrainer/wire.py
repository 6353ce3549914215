"""Reader for the seed-export wire format.

Implemented against the documented byte layout, independently of the
simulator package: payload header `magic 0xFA | count:1B | label bitmask:2B
LE`, then per sample `label:1B | nnz:2B LE | row_ptr:29x2B LE | col_idx:nnz
x 1B | values:nnz x 1B` (61 + 2*nnz bytes).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

PAYLOAD_MAGIC = 0xFA
IMAGE_SIDE = 28
NUM_LABELS = 10


class WireError(ValueError):
    pass


@dataclass
class SeedExport:
    images: np.ndarray  # (n, 28, 28) uint8
    labels: np.ndarray  # (n,) int
    sdi_labels: list[int]
    sidecar: dict | None = None

    def __len__(self) -> int:
        return len(self.labels)


def _decode_sample(buf: bytes, offset: int) -> tuple[np.ndarray, int, int]:
    if len(buf) - offset < 61:
        raise WireError(f"sample header truncated at offset {offset}")
    label, nnz = struct.unpack_from("<BH", buf, offset)
    end = offset + 61 + 2 * nnz
    if len(buf) < end:
        raise WireError(f"sample body truncated at offset {offset} (nnz={nnz})")
    row_ptr = np.frombuffer(buf, dtype="<u2", count=IMAGE_SIDE + 1, offset=offset + 3)
    if row_ptr[0] != 0 or row_ptr[-1] != nnz or np.any(np.diff(row_ptr.astype(int)) < 0):
        raise WireError(f"bad row pointers in sample at offset {offset}")
    body = offset + 61
    col_idx = np.frombuffer(buf, dtype=np.uint8, count=nnz, offset=body)
    values = np.frombuffer(buf, dtype=np.uint8, count=nnz, offset=body + nnz)
    image = np.zeros((IMAGE_SIDE, IMAGE_SIDE), dtype=np.uint8)
    for row in range(IMAGE_SIDE):
        lo, hi = int(row_ptr[row]), int(row_ptr[row + 1])
        image[row, col_idx[lo:hi]] = values[lo:hi]
    return image, int(label), end


def decode_export_bytes(buf: bytes) -> SeedExport:
    if len(buf) < 4:
        raise WireError("export shorter than its 4-byte header")
    magic, count, mask = struct.unpack_from("<BBH", buf, 0)
    if magic != PAYLOAD_MAGIC:
        raise WireError(f"bad magic 0x{magic:02x}")
    images, labels = [], []
    offset = 4
    for _ in range(count):
        image, label, offset = _decode_sample(buf, offset)
        images.append(image)
        labels.append(label)
    if offset != len(buf):
        raise WireError(f"{len(buf) - offset} trailing bytes after the last sample")
    sdi = [i for i in range(NUM_LABELS) if mask >> i & 1]
    if count:
        stacked = np.stack(images)
    else:
        stacked = np.zeros((0, IMAGE_SIDE, IMAGE_SIDE), dtype=np.uint8)
    return SeedExport(images=stacked, labels=np.array(labels, dtype=int), sdi_labels=sdi)


def load_export(path: str, sidecar_path: str | None = None) -> SeedExport:
    """Read an export file; the sidecar defaults to `<path>.json` when present."""
    with open(path, "rb") as fh:
        export = decode_export_bytes(fh.read())
    candidate = sidecar_path if sidecar_path is not None else path + ".json"
    try:
        with open(candidate, "r", encoding="utf-8") as fh:
            export.sidecar = json.load(fh)
    except FileNotFoundError:
        if sidecar_path is not None:
            raise
    return export
