"""Per-device non-IID labeled image data and the label-indicator structure.

A device's data is skewed: its target labels hold only a handful of samples
(the ones it wants augmented) while every other label is fully stocked. The
pool behind the devices is either real MNIST read from IDX files or a
procedurally rendered stand-in that needs no downloads.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator

import numpy as np

NUM_LABELS = 10
IMAGE_SIDE = 28
IMAGE_SHAPE = (IMAGE_SIDE, IMAGE_SIDE)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    """Base class for IDX parsing failures."""


class IdxMagicError(IdxFormatError):
    pass


class IdxTruncatedError(IdxFormatError):
    pass


class IdxCountMismatchError(IdxFormatError):
    pass


class PoolShortageError(ValueError):
    def __init__(self, label: int, needed: int, available: int):
        self.label = label
        super().__init__(
            f"pool exhausted for label {label}: need {needed} more, {available} available"
        )


@dataclass(frozen=True)
class LabelIndicator:
    """Presence bit per class label. |x| below means the popcount."""

    bits: tuple[bool, ...]

    def __post_init__(self):
        if len(self.bits) != NUM_LABELS:
            raise ValueError(f"expected {NUM_LABELS} bits, got {len(self.bits)}")

    @classmethod
    def empty(cls) -> "LabelIndicator":
        return cls(bits=(False,) * NUM_LABELS)

    @classmethod
    def from_labels(cls, labels: Iterable[int]) -> "LabelIndicator":
        bits = [False] * NUM_LABELS
        for lab in labels:
            if not 0 <= lab < NUM_LABELS:
                raise ValueError(f"label {lab} outside 0..{NUM_LABELS - 1}")
            bits[lab] = True
        return cls(bits=tuple(bits))

    @classmethod
    def from_mask(cls, mask: int) -> "LabelIndicator":
        return cls(bits=tuple(bool(mask >> i & 1) for i in range(NUM_LABELS)))

    def to_mask(self) -> int:
        return sum(1 << i for i, b in enumerate(self.bits) if b)

    def labels(self) -> list[int]:
        return [i for i, b in enumerate(self.bits) if b]

    def popcount(self) -> int:
        return sum(self.bits)

    def __or__(self, other: "LabelIndicator") -> "LabelIndicator":
        return LabelIndicator(tuple(a or b for a, b in zip(self.bits, other.bits)))

    def __and__(self, other: "LabelIndicator") -> "LabelIndicator":
        return LabelIndicator(tuple(a and b for a, b in zip(self.bits, other.bits)))

    def issubset(self, other: "LabelIndicator") -> bool:
        return all(not a or b for a, b in zip(self.bits, other.bits))

    def contains(self, label: int) -> bool:
        return self.bits[label]


@dataclass
class SamplePool:
    """A flat stock of labeled images devices draw from."""

    images: np.ndarray  # (n, 28, 28) uint8
    labels: np.ndarray  # (n,) uint8

    def __post_init__(self):
        if self.images.shape[1:] != IMAGE_SHAPE:
            raise ValueError(f"images must be (n, 28, 28), got {self.images.shape}")
        if len(self.images) != len(self.labels):
            raise ValueError("images/labels length mismatch")

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self) -> Iterator[tuple[np.ndarray, int]]:
        for img, lab in zip(self.images, self.labels):
            yield img, int(lab)

    def indices_by_label(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.labels == lab) for lab in range(NUM_LABELS)]


@dataclass
class DeviceDataset:
    """One device's local samples, referenced into the shared pool.

    Pixel data is materialized lazily; the relay protocol only ever touches a
    handful of seed samples per device, so copying the full stock around
    would dominate Monte-Carlo runs.
    """

    pool: SamplePool
    indices: np.ndarray  # (m,) positions into the pool
    target_labels: LabelIndicator

    def __post_init__(self):
        self.labels = self.pool.labels[self.indices]

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def images(self) -> np.ndarray:
        return self.pool.images[self.indices]

    def count(self, label: int) -> int:
        return int(np.count_nonzero(self.labels == label))

    def label_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=NUM_LABELS)

    def take(self, label: int, k: int) -> np.ndarray:
        """First k images of the given label, in dataset order."""
        idx = self.indices[np.flatnonzero(self.labels == label)[:k]]
        return self.pool.images[idx]


def _read_idx_header(data: bytes, path: str, expected_magic: int, n_dims: int) -> tuple[int, ...]:
    need = 4 * (1 + n_dims)
    if len(data) < need:
        raise IdxTruncatedError(f"{path}: file shorter than its {need}-byte header")
    magic = struct.unpack(">I", data[:4])[0]
    if magic != expected_magic:
        raise IdxMagicError(
            f"{path}: bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}"
        )
    return struct.unpack(f">{n_dims}I", data[4:need])


def load_idx(images_path, labels_path) -> SamplePool:
    """Read an MNIST-style IDX image/label file pair (big-endian)."""
    with open(images_path, "rb") as fh:
        img_data = fh.read()
    with open(labels_path, "rb") as fh:
        lab_data = fh.read()

    n_img, rows, cols = _read_idx_header(img_data, str(images_path), IDX_IMAGES_MAGIC, 3)
    if (rows, cols) != IMAGE_SHAPE:
        raise IdxFormatError(f"{images_path}: expected 28x28 images, got {rows}x{cols}")
    body = img_data[16:]
    if len(body) < n_img * rows * cols:
        raise IdxTruncatedError(
            f"{images_path}: header promises {n_img} images, body holds "
            f"{len(body) // (rows * cols)}"
        )
    images = np.frombuffer(body, dtype=np.uint8, count=n_img * rows * cols)
    images = images.reshape(n_img, rows, cols).copy()

    (n_lab,) = _read_idx_header(lab_data, str(labels_path), IDX_LABELS_MAGIC, 1)
    lab_body = lab_data[8:]
    if len(lab_body) < n_lab:
        raise IdxTruncatedError(
            f"{labels_path}: header promises {n_lab} labels, body holds {len(lab_body)}"
        )
    labels = np.frombuffer(lab_body, dtype=np.uint8, count=n_lab).copy()

    if n_img != n_lab:
        raise IdxCountMismatchError(
            f"{images_path} holds {n_img} images but {labels_path} holds {n_lab} labels"
        )
    return SamplePool(images=images, labels=labels)


# Seven-segment glyph geometry: (row range, col range) per segment, on the
# 28x28 canvas with margin enough that a 1px jitter shift never clips.
_SEGS = {
    "A": (slice(5, 7), slice(9, 19)),
    "B": (slice(5, 15), slice(17, 19)),
    "C": (slice(13, 23), slice(17, 19)),
    "D": (slice(21, 23), slice(9, 19)),
    "E": (slice(13, 23), slice(9, 11)),
    "F": (slice(5, 15), slice(9, 11)),
    "G": (slice(13, 15), slice(9, 19)),
}
_DIGIT_SEGS = {
    0: "ABCDEF",
    1: "BC",
    2: "ABGED",
    3: "ABGCD",
    4: "FGBC",
    5: "AFGCD",
    6: "AFGEDC",
    7: "ABC",
    8: "ABCDEFG",
    9: "ABCDFG",
}
_GLYPH_INTENSITY = 230


@lru_cache(maxsize=1)
def digit_templates() -> np.ndarray:
    """Clean (10, 28, 28) uint8 glyphs, one per digit."""
    templates = np.zeros((NUM_LABELS, IMAGE_SIDE, IMAGE_SIDE), dtype=np.uint8)
    for digit, segs in _DIGIT_SEGS.items():
        for seg in segs:
            rows, cols = _SEGS[seg]
            templates[digit, rows, cols] = _GLYPH_INTENSITY
    return templates


def synth_digits(rng: np.random.Generator, per_label: int) -> SamplePool:
    """Render per_label jittered copies of each digit glyph.

    Jitter = a uniform +-1 pixel shift of the whole glyph plus Gaussian
    intensity noise on the glyph pixels; the background stays exactly zero so
    the images remain sparse like thresholded handwriting.
    """
    if per_label < 1:
        raise ValueError(f"per_label must be >= 1, got {per_label}")
    templates = digit_templates()
    n = per_label * NUM_LABELS
    images = np.zeros((n, IMAGE_SIDE, IMAGE_SIDE), dtype=np.uint8)
    labels = np.repeat(np.arange(NUM_LABELS, dtype=np.uint8), per_label)
    shifts = rng.integers(-1, 2, size=(n, 2))
    noise = rng.normal(0.0, 18.0, size=(n, IMAGE_SIDE, IMAGE_SIDE))
    for k in range(n):
        glyph = templates[labels[k]].astype(np.int16)
        on = glyph > 0
        jittered = np.where(
            on, np.clip(glyph + noise[k], 120, 255), 0
        ).astype(np.uint8)
        images[k] = np.roll(jittered, tuple(shifts[k]), axis=(0, 1))
    return SamplePool(images=images, labels=labels)


def nearest_template_label(image: np.ndarray) -> int:
    """Classify by L2 distance to the clean glyphs, best over +-1 pixel alignment.

    Registration over the nine unit shifts keeps the oracle insensitive to the
    jitter synth_digits applies; used as an independent check in tests.
    """
    templates = digit_templates().astype(np.float64)
    best = None
    best_label = 0
    img = image.astype(np.float64)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            shifted = np.roll(img, (dr, dc), axis=(0, 1))
            dist = ((templates - shifted) ** 2).sum(axis=(1, 2))
            lab = int(np.argmin(dist))
            if best is None or dist[lab] < best:
                best = float(dist[lab])
                best_label = lab
    return best_label


def partition_non_iid(
    pool: SamplePool,
    n_devices: int,
    target_count: int,
    full_count: int,
    rng: np.random.Generator,
    n_target_labels: int = 1,
) -> list[DeviceDataset]:
    """Deal each device target_count samples per target label and full_count per other label.

    Target labels are drawn uniformly at random per device. Devices draw
    without replacement from the pool, so their sample instances are disjoint;
    a label running dry raises PoolShortageError naming it.
    """
    if n_devices < 1:
        raise ValueError("n_devices must be >= 1")
    if not 1 <= n_target_labels <= NUM_LABELS:
        raise ValueError(f"n_target_labels must be in 1..{NUM_LABELS}")
    if target_count < 1 or full_count < 1:
        raise ValueError("target_count and full_count must be >= 1")

    shuffled = [rng.permutation(idx) for idx in pool.indices_by_label()]
    cursors = [0] * NUM_LABELS

    def draw(label: int, k: int) -> np.ndarray:
        left = len(shuffled[label]) - cursors[label]
        if left < k:
            raise PoolShortageError(label, needed=k, available=left)
        out = shuffled[label][cursors[label] : cursors[label] + k]
        cursors[label] += k
        return out

    devices = []
    for _ in range(n_devices):
        targets = rng.choice(NUM_LABELS, size=n_target_labels, replace=False)
        target_ind = LabelIndicator.from_labels(int(t) for t in targets)
        chunks = []
        for lab in range(NUM_LABELS):
            want = target_count if target_ind.contains(lab) else full_count
            chunks.append(draw(lab, want))
        idx = np.concatenate(chunks)
        devices.append(DeviceDataset(pool=pool, indices=idx, target_labels=target_ind))
    return devices
