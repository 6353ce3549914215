"""Seed-sample compression: randomized sparsification and byte-exact CSR serialization.

A sample travels as label:1B | nnz:2B LE | row_ptr:29x2B LE | col_idx:nnz x 1B
| values:nnz x 1B, so its size is exactly 61 + 2*nnz bytes. A payload wraps a
batch of samples behind a 4-byte header: magic 0xFA | sample count:1B |
label-indicator bitmask:2B LE (bits 0-9 used).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .dataset import IMAGE_SHAPE, IMAGE_SIDE, LabelIndicator, NUM_LABELS

IMAGE_PIXELS = IMAGE_SIDE * IMAGE_SIDE
SAMPLE_HEADER_BYTES = 61  # label + nnz + 29 row-pointer words
PAYLOAD_MAGIC = 0xFA
PAYLOAD_HEADER_BYTES = 4
MAX_PAYLOAD_SAMPLES = 255  # count field is one byte


class CodecError(ValueError):
    """Base class for serialization failures."""


class TruncatedPayloadError(CodecError):
    pass


class CsrStructureError(CodecError):
    pass


class ZeroValueError(CodecError):
    pass


@dataclass(frozen=True, eq=False)
class SparseSample:
    """One CSR-encoded labeled image."""

    label: int
    row_ptr: np.ndarray = field(repr=False)  # (29,) uint16, cumulative
    col_idx: np.ndarray = field(repr=False)  # (nnz,) uint8
    values: np.ndarray = field(repr=False)  # (nnz,) uint8, all nonzero

    @property
    def nnz(self) -> int:
        return len(self.values)

    @property
    def size_bytes(self) -> int:
        return SAMPLE_HEADER_BYTES + 2 * self.nnz

    def to_bytes(self) -> bytes:
        return (
            struct.pack("<BH", self.label, self.nnz)
            + self.row_ptr.astype("<u2").tobytes()
            + self.col_idx.astype(np.uint8).tobytes()
            + self.values.astype(np.uint8).tobytes()
        )

    def to_image(self) -> np.ndarray:
        image = np.zeros(IMAGE_SHAPE, dtype=np.uint8)
        for row in range(IMAGE_SIDE):
            lo, hi = int(self.row_ptr[row]), int(self.row_ptr[row + 1])
            image[row, self.col_idx[lo:hi]] = self.values[lo:hi]
        return image


def sparsify(image: np.ndarray, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Zero exactly floor(rho * 784) pixel positions, chosen uniformly without replacement.

    Positions are drawn over the whole canvas, so already-zero cells may be
    picked; everything not chosen is untouched.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    out = np.array(image, dtype=np.uint8, copy=True)
    k = math.floor(rho * IMAGE_PIXELS)
    if k == 0:
        return out
    positions = rng.choice(IMAGE_PIXELS, size=k, replace=False)
    out.reshape(-1)[positions] = 0
    return out


def encode_csr(image: np.ndarray, label: int) -> SparseSample:
    """CSR-encode a 28x28 uint8 image."""
    img = np.asarray(image, dtype=np.uint8)
    if img.shape != IMAGE_SHAPE:
        raise ValueError(f"image must be {IMAGE_SHAPE}, got {img.shape}")
    if not 0 <= label < NUM_LABELS:
        raise ValueError(f"label {label} outside 0..{NUM_LABELS - 1}")
    rows, cols = np.nonzero(img)
    row_ptr = np.zeros(IMAGE_SIDE + 1, dtype=np.uint16)
    row_ptr[1:] = np.cumsum(np.bincount(rows, minlength=IMAGE_SIDE))
    return SparseSample(
        label=int(label),
        row_ptr=row_ptr,
        col_idx=cols.astype(np.uint8),
        values=img[rows, cols],
    )


def decode_csr(buf: bytes) -> tuple[np.ndarray, int]:
    """Inverse of encode + to_bytes. Raises distinct errors per defect class."""
    sample, used = _decode_one(buf, 0)
    if used != len(buf):
        raise CsrStructureError(f"{len(buf) - used} trailing bytes after sample record")
    return sample.to_image(), sample.label


def _decode_one(buf: bytes, offset: int) -> tuple[SparseSample, int]:
    if len(buf) - offset < SAMPLE_HEADER_BYTES:
        raise TruncatedPayloadError(
            f"sample header needs {SAMPLE_HEADER_BYTES} bytes, "
            f"{len(buf) - offset} remain at offset {offset}"
        )
    label, nnz = struct.unpack_from("<BH", buf, offset)
    if label >= NUM_LABELS:
        raise CsrStructureError(f"label byte {label} outside 0..{NUM_LABELS - 1}")
    row_ptr = np.frombuffer(buf, dtype="<u2", count=IMAGE_SIDE + 1, offset=offset + 3)
    end = offset + SAMPLE_HEADER_BYTES + 2 * nnz
    if len(buf) < end:
        raise TruncatedPayloadError(
            f"sample of nnz={nnz} needs {SAMPLE_HEADER_BYTES + 2 * nnz} bytes, "
            f"{len(buf) - offset} remain"
        )
    if row_ptr[0] != 0 or row_ptr[-1] != nnz or np.any(np.diff(row_ptr.astype(int)) < 0):
        raise CsrStructureError("row_ptr must rise from 0 to nnz monotonically")
    body = offset + SAMPLE_HEADER_BYTES
    col_idx = np.frombuffer(buf, dtype=np.uint8, count=nnz, offset=body)
    values = np.frombuffer(buf, dtype=np.uint8, count=nnz, offset=body + nnz)
    if np.any(col_idx >= IMAGE_SIDE):
        raise CsrStructureError("column index outside 0..27")
    for row in range(IMAGE_SIDE):
        lo, hi = int(row_ptr[row]), int(row_ptr[row + 1])
        if hi - lo > 1 and np.any(np.diff(col_idx[lo:hi].astype(int)) <= 0):
            raise CsrStructureError(f"column indices not strictly increasing in row {row}")
    if np.any(values == 0):
        raise ZeroValueError("stored value byte is zero")
    sample = SparseSample(
        label=label,
        row_ptr=row_ptr.astype(np.uint16).copy(),
        col_idx=col_idx.copy(),
        values=values.copy(),
    )
    return sample, end


def payload_bits(samples: list[SparseSample], sdi: LabelIndicator) -> int:
    """Wire size of a payload in bits: 8*(magic+count+records) + 16 SDI bits."""
    return 8 * (2 + sum(s.size_bytes for s in samples)) + 16


def encode_payload(samples: list[SparseSample], sdi: LabelIndicator) -> bytes:
    if len(samples) > MAX_PAYLOAD_SAMPLES:
        raise CodecError(f"payload holds {len(samples)} samples, format caps at {MAX_PAYLOAD_SAMPLES}")
    head = struct.pack("<BBH", PAYLOAD_MAGIC, len(samples), sdi.to_mask())
    return head + b"".join(s.to_bytes() for s in samples)


def decode_payload(buf: bytes) -> tuple[list[SparseSample], LabelIndicator]:
    if len(buf) < PAYLOAD_HEADER_BYTES:
        raise TruncatedPayloadError(f"payload header needs {PAYLOAD_HEADER_BYTES} bytes")
    magic, count, mask = struct.unpack_from("<BBH", buf, 0)
    if magic != PAYLOAD_MAGIC:
        raise CsrStructureError(f"bad payload magic 0x{magic:02x}")
    if mask >> NUM_LABELS:
        raise CsrStructureError(f"label bitmask 0x{mask:04x} uses bits above {NUM_LABELS - 1}")
    samples = []
    offset = PAYLOAD_HEADER_BYTES
    for _ in range(count):
        sample, offset = _decode_one(buf, offset)
        samples.append(sample)
    if offset != len(buf):
        raise CsrStructureError(f"{len(buf) - offset} trailing bytes after last sample")
    return samples, LabelIndicator.from_mask(mask)


def sample_end_offsets(samples: list[SparseSample]) -> list[int]:
    """Byte offset at which each sample's record is fully received, header included."""
    offsets = []
    pos = PAYLOAD_HEADER_BYTES
    for s in samples:
        pos += s.size_bytes
        offsets.append(pos)
    return offsets
