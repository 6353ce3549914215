"""Local digit rendering for oracle training and device-side evaluation data.

The collection pipeline ships seven-segment-style glyphs; the trainer renders
the same family locally so its oracle classifier and rebuilt device datasets
live in the distribution the seeds came from, without touching any simulator
internals.
"""

from __future__ import annotations

import numpy as np

IMAGE_SIDE = 28
NUM_LABELS = 10

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


def digit_templates() -> np.ndarray:
    templates = np.zeros((NUM_LABELS, IMAGE_SIDE, IMAGE_SIDE), dtype=np.uint8)
    for digit, segs in _DIGIT_SEGS.items():
        for seg in segs:
            rows, cols = _SEGS[seg]
            templates[digit, rows, cols] = 230
    return templates


def render_digits(rng: np.random.Generator, per_label: int) -> tuple[np.ndarray, np.ndarray]:
    """Jittered glyphs: +-1 px shift, Gaussian stroke noise, zero background."""
    templates = digit_templates()
    n = per_label * NUM_LABELS
    labels = np.repeat(np.arange(NUM_LABELS, dtype=np.int64), per_label)
    images = np.zeros((n, IMAGE_SIDE, IMAGE_SIDE), dtype=np.uint8)
    shifts = rng.integers(-1, 2, size=(n, 2))
    noise = rng.normal(0.0, 18.0, size=(n, IMAGE_SIDE, IMAGE_SIDE))
    for k in range(n):
        glyph = templates[labels[k]].astype(np.int16)
        on = glyph > 0
        jittered = np.where(on, np.clip(glyph + noise[k], 120, 255), 0).astype(np.uint8)
        images[k] = np.roll(jittered, tuple(shifts[k]), axis=(0, 1))
    return images, labels


def render_label(rng: np.random.Generator, label: int, count: int) -> np.ndarray:
    """Jittered copies of one digit glyph."""
    template = digit_templates()[label].astype(np.int16)
    on = template > 0
    images = np.zeros((count, IMAGE_SIDE, IMAGE_SIDE), dtype=np.uint8)
    shifts = rng.integers(-1, 2, size=(count, 2))
    noise = rng.normal(0.0, 18.0, size=(count, IMAGE_SIDE, IMAGE_SIDE))
    for k in range(count):
        jittered = np.where(on, np.clip(template + noise[k], 120, 255), 0).astype(np.uint8)
        images[k] = np.roll(jittered, tuple(shifts[k]), axis=(0, 1))
    return images


def render_device_dataset(
    rng: np.random.Generator, target_labels: list[int], target_count: int, full_count: int
) -> tuple[np.ndarray, np.ndarray]:
    """A non-IID device stock: target labels thin, every other label full."""
    chunks_img, chunks_lab = [], []
    for lab in range(NUM_LABELS):
        want = target_count if lab in target_labels else full_count
        chunks_img.append(render_label(rng, lab, want))
        chunks_lab.append(np.full(want, lab, dtype=np.int64))
    return np.concatenate(chunks_img), np.concatenate(chunks_lab)
