"""Relay-device emission rules and server-side collection.

A device whose target labels are already covered by the incoming payload's
public label indicator forwards it untouched. Otherwise it appends its own
compressed seed samples for its target labels, tops the indicator up with
dummy labels until at least `privacy_threshold` non-target labels are present,
and never lets any label exceed `per_label_cap` samples across the merged
payload (earlier-hop samples keep priority; the device skips its surplus).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codec import SparseSample, encode_csr, sparsify
from .dataset import IMAGE_SHAPE, NUM_LABELS, DeviceDataset, LabelIndicator


@dataclass(frozen=True)
class ProtocolConfig:
    per_label_cap: int = 4  # most seed samples any one label may carry
    privacy_threshold: int = 1  # dummy labels guaranteed per fresh emission
    rho: float = 0.02  # sparsification rate

    def validate(self) -> None:
        if self.per_label_cap < 1:
            raise ValueError("per_label_cap must be >= 1")
        if self.privacy_threshold < 0:
            raise ValueError("privacy_threshold must be >= 0")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")


@dataclass
class Payload:
    """Seed samples accumulated so far plus the public label indicator."""

    samples: list[SparseSample]
    public_sdi: LabelIndicator

    def label_counts(self) -> np.ndarray:
        counts = np.zeros(NUM_LABELS, dtype=int)
        for s in self.samples:
            counts[s.label] += 1
        return counts

    def total_bytes(self) -> int:
        return sum(s.size_bytes for s in self.samples)


@dataclass
class Emission:
    payload: Payload
    forwarded: bool  # True when the incoming payload went through untouched
    dummy_shortfall: int = 0  # dummies wanted but unavailable
    added_samples: int = 0


@dataclass
class InboxEntry:
    sample: SparseSample
    route_id: int
    arrival_slot: int


@dataclass
class ServerInbox:
    entries: list[InboxEntry]
    received_sdi: LabelIndicator
    late_count: int = 0

    def __len__(self) -> int:
        return len(self.entries)

    def images_and_labels(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.entries:
            return np.zeros((0,) + IMAGE_SHAPE, dtype=np.uint8), np.zeros(0, dtype=np.uint8)
        images = np.stack([e.sample.to_image() for e in self.entries])
        labels = np.array([e.sample.label for e in self.entries], dtype=np.uint8)
        return images, labels


def device_emit(
    dataset: DeviceDataset,
    incoming: Payload | None,
    cfg: ProtocolConfig,
    rng: np.random.Generator,
) -> Emission:
    """Run one device's transmission step of the relay protocol.

    `incoming` is None exactly when the device is its route's edge device.
    The returned payload is the incoming object itself in the forward-only
    case (byte-identical), otherwise a new payload extending it.
    """
    cfg.validate()
    targets = dataset.target_labels
    if targets.popcount() < 1:
        raise ValueError("device has no target label")

    if incoming is not None and targets.issubset(incoming.public_sdi):
        return Emission(payload=incoming, forwarded=True)

    samples = list(incoming.samples) if incoming is not None else []
    sdi_in = incoming.public_sdi if incoming is not None else LabelIndicator.empty()
    counts = np.zeros(NUM_LABELS, dtype=int)
    for s in samples:
        counts[s.label] += 1

    added = 0

    def append_label(label: int) -> None:
        nonlocal added
        room = cfg.per_label_cap - int(counts[label])
        k = min(room, dataset.count(label))
        for img in dataset.take(label, k):
            samples.append(encode_csr(sparsify(img, cfg.rho, rng), label))
            counts[label] += 1
            added += 1

    for label in targets.labels():
        append_label(label)

    sdi_after_targets = sdi_in | targets
    non_target_present = sdi_after_targets.popcount() - targets.popcount()
    dummy_needed = max(0, cfg.privacy_threshold - non_target_present)

    candidates = [
        lab
        for lab in range(NUM_LABELS)
        if not sdi_after_targets.contains(lab) and dataset.count(lab) > 0
    ]
    shortfall = max(0, dummy_needed - len(candidates))
    n_dummies = min(dummy_needed, len(candidates))
    if n_dummies:
        chosen = rng.choice(len(candidates), size=n_dummies, replace=False)
        dummy_labels = [candidates[int(i)] for i in np.sort(chosen)]
    else:
        dummy_labels = []
    for label in dummy_labels:
        append_label(label)

    public = sdi_after_targets | LabelIndicator.from_labels(dummy_labels)
    return Emission(
        payload=Payload(samples=samples, public_sdi=public),
        forwarded=False,
        dummy_shortfall=shortfall,
        added_samples=added,
    )


def server_collect(
    route_deliveries: list[list[tuple[SparseSample, int]]],
    tau: int | None,
) -> ServerInbox:
    """Keep every sample whose final-hop delivery finished at slot <= tau.

    `route_deliveries[j]` lists (sample, absolute arrival slot) for route j in
    arrival order. tau=None collects everything; late samples are dropped
    silently but counted.
    """
    if tau is not None and tau < 1:
        raise ValueError(f"tau must be >= 1 (or None for unbounded), got {tau}")
    entries: list[InboxEntry] = []
    late = 0
    for route_id, stream in enumerate(route_deliveries):
        last_slot = None
        for sample, slot in stream:
            if last_slot is not None and slot < last_slot:
                raise ValueError(f"route {route_id}: arrival slots must be nondecreasing")
            last_slot = slot
            if tau is None or slot <= tau:
                entries.append(InboxEntry(sample=sample, route_id=route_id, arrival_slot=slot))
            else:
                late += 1
    received = LabelIndicator.from_labels(e.sample.label for e in entries)
    return ServerInbox(entries=entries, received_sdi=received, late_count=late)


def oversample(
    inbox: ServerInbox,
    factor: int,
    rng: np.random.Generator,
    max_shift: int = 1,
    noise_sigma: float = 8.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Replicate each delivered sample `factor` times with pixel jitter.

    Jitter is a uniform integer shift in [-max_shift, max_shift] per axis plus
    additive Gaussian intensity noise, clipped back to the byte range. With
    max_shift=0 and noise_sigma=0 the output is `factor` exact copies.
    """
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    images, labels = inbox.images_and_labels()
    if len(images) == 0:
        return images, labels
    reps = np.repeat(images, factor, axis=0).astype(np.float64)
    out_labels = np.repeat(labels, factor)
    if max_shift > 0:
        shifts = rng.integers(-max_shift, max_shift + 1, size=(len(reps), 2))
        for k in range(len(reps)):
            reps[k] = np.roll(reps[k], tuple(shifts[k]), axis=(0, 1))
    if noise_sigma > 0:
        reps += rng.normal(0.0, noise_sigma, size=reps.shape)
    return np.clip(np.rint(reps), 0, 255).astype(np.uint8), out_labels
