"""End-to-end run orchestration and the Monte-Carlo sweep harness.

One run wires the pieces together: place and route devices, deal their
non-IID data, walk every route edge-to-server applying the relay protocol
with store-and-forward transmission (a relay only transmits after fully
receiving its predecessor's payload), collect at the server under the
deadline, then score latency and privacy.

Determinism: every random decision draws from a substream keyed by the master
seed and a stable role key, so reports are byte-stable across repeated runs
and across worker counts.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import codec, privacy, protocol, topology
from .channel import ChannelParams, LinkState, transmit_bits
from .dataset import (
    DeviceDataset,
    LabelIndicator,
    SamplePool,
    load_idx,
    partition_non_iid,
    synth_digits,
)
from .protocol import Payload, ProtocolConfig, ServerInbox, server_collect
from .topology import Topology, build_topology, hop_distance

# Substream role keys; never reorder, they define the meaning of a seed.
_S_TOPOLOGY = 0
_S_DATASET = 1
_S_EMIT = 2
_S_HOP = 3
_S_REFERENCE = 4

SWEEP_AXES = ("rho", "m", "l", "tau", "tx_power")


@dataclass(frozen=True)
class SimConfig:
    n_devices: int = 10
    max_hops: int = 2
    plane_side_m: float = 10_000.0
    channel: ChannelParams = field(default_factory=ChannelParams)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    tau_slots: int | None = None  # None = collect forever
    data_source: str = "synthetic"  # "synthetic" | "idx"
    mnist_dir: str | None = None
    target_count: int = 4
    full_count: int = 200
    n_target_labels: int = 1
    seed: int = 0
    pool_seed: int = 7  # synthetic pool stream, shared across runs
    max_slots_per_hop: int = 1_000_000  # hard anti-hang guard per hop
    compute_similarity: bool = True

    def validate(self) -> None:
        if self.n_devices < 1:
            raise ValueError("n_devices must be >= 1")
        if self.max_hops < 1:
            raise ValueError("max_hops must be >= 1")
        if self.plane_side_m <= 0:
            raise ValueError("plane_side_m must be positive")
        if self.tau_slots is not None and self.tau_slots < 1:
            raise ValueError("tau_slots must be >= 1 or None")
        if self.data_source not in ("synthetic", "idx"):
            raise ValueError(f"unknown data_source {self.data_source!r}")
        if self.data_source == "idx" and not self.mnist_dir:
            raise ValueError("data_source 'idx' needs mnist_dir")
        if self.target_count < 1 or self.full_count < 1:
            raise ValueError("target_count and full_count must be >= 1")
        if self.max_slots_per_hop < 1:
            raise ValueError("max_slots_per_hop must be >= 1")
        self.channel.validate()
        self.protocol.validate()


def _substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, *key)))


_POOL_CACHE: dict[tuple, SamplePool] = {}


def _sample_pool(config: SimConfig) -> SamplePool:
    """Pool backing the device datasets; cached per process."""
    if config.data_source == "idx":
        key = ("idx", config.mnist_dir)
        if key not in _POOL_CACHE:
            import os

            d = config.mnist_dir
            _POOL_CACHE[key] = load_idx(
                os.path.join(d, "train-images-idx3-ubyte"),
                os.path.join(d, "train-labels-idx1-ubyte"),
            )
        return _POOL_CACHE[key]
    per_label = config.n_devices * config.full_count
    key = ("synthetic", config.pool_seed, per_label)
    if key not in _POOL_CACHE:
        _POOL_CACHE[key] = synth_digits(_substream(config.pool_seed), per_label)
    return _POOL_CACHE[key]


@dataclass
class HopReport:
    device_id: int
    distance_m: float
    payload_bits: int
    slots: int
    start_slot: int
    completed: bool
    forwarded: bool
    added_samples: int
    dummy_shortfall: int

    @property
    def end_slot(self) -> int:
        return self.start_slot + self.slots


@dataclass
class RouteReport:
    route_id: int
    device_ids: tuple[int, ...]
    hops: list[HopReport]
    latency_slots: int
    emitted_samples: int
    delivered_samples: int
    delivered_labels: LabelIndicator


@dataclass
class DeviceReport:
    device_id: int
    route_id: int
    target_labels: list[int]
    public_sdi: list[int]
    label_privacy: float | None


@dataclass
class SimReport:
    config: SimConfig
    topo: Topology
    routes: list[RouteReport]
    devices: list[DeviceReport]
    overall_latency_slots: int
    emitted_sample_count: int
    delivered_sample_count: int
    delivered_bytes: int
    late_sample_count: int
    undelivered_sample_count: int
    received_sdi: LabelIndicator
    reference_device: int
    reference_route: int
    reference_route_latency: int
    reference_label_privacy: float | None
    mean_label_privacy: float | None
    similarity: float | None
    sample_privacy: float | None
    flags: dict
    inbox: ServerInbox = field(repr=False, default=None)

    def to_json_dict(self) -> dict:
        cfg = dataclasses.asdict(self.config)
        sim_flag = None
        if self.similarity is not None and math.isfinite(self.similarity):
            sim_flag = self.similarity
        return {
            "config": cfg,
            "n_routes": len(self.routes),
            "overall_latency_slots": self.overall_latency_slots,
            "emitted_sample_count": self.emitted_sample_count,
            "delivered_sample_count": self.delivered_sample_count,
            "delivered_bytes": self.delivered_bytes,
            "late_sample_count": self.late_sample_count,
            "undelivered_sample_count": self.undelivered_sample_count,
            "received_sdi": list(map(int, self.received_sdi.bits)),
            "reference_device": self.reference_device,
            "reference_route": self.reference_route,
            "reference_route_latency": self.reference_route_latency,
            "reference_label_privacy": self.reference_label_privacy,
            "mean_label_privacy": self.mean_label_privacy,
            "similarity": sim_flag,
            "sample_privacy": self.sample_privacy,
            "routes": [
                {
                    "route_id": r.route_id,
                    "device_ids": list(r.device_ids),
                    "latency_slots": r.latency_slots,
                    "emitted_samples": r.emitted_samples,
                    "delivered_samples": r.delivered_samples,
                    "delivered_labels": r.delivered_labels.labels(),
                    "hops": [
                        {
                            "device_id": h.device_id,
                            "distance_m": h.distance_m,
                            "payload_bits": h.payload_bits,
                            "slots": h.slots,
                            "start_slot": h.start_slot,
                            "end_slot": h.end_slot,
                            "completed": h.completed,
                            "forwarded": h.forwarded,
                            "added_samples": h.added_samples,
                            "dummy_shortfall": h.dummy_shortfall,
                        }
                        for h in r.hops
                    ],
                }
                for r in self.routes
            ],
            "devices": [
                {
                    "device_id": d.device_id,
                    "route_id": d.route_id,
                    "target_labels": d.target_labels,
                    "public_sdi": d.public_sdi,
                    "label_privacy": d.label_privacy,
                }
                for d in self.devices
            ],
            "flags": self.flags,
        }


def make_datasets(config: SimConfig, rng: np.random.Generator) -> list[DeviceDataset]:
    pool = _sample_pool(config)
    return partition_non_iid(
        pool,
        config.n_devices,
        config.target_count,
        config.full_count,
        rng,
        n_target_labels=config.n_target_labels,
    )


def reference_device(topo: Topology, rng: np.random.Generator) -> int:
    """Uniformly pick a route and return its farthest-from-server device.

    Chains seed at the farthest unassigned device, so this is normally the
    route's edge device; position breaks ties when a chain wandered outward.
    """
    if topo.n_routes < 1:
        raise ValueError("topology has no routes")
    j = int(rng.integers(topo.n_routes))
    route = topo.routes[j]
    return max(route.device_ids, key=lambda d: topo.device(d).distance_to(topo.server))


def run(config: SimConfig, fixed_topology: Topology | None = None) -> SimReport:
    """Simulate one full collection round and score it."""
    config.validate()
    seed = config.seed

    if fixed_topology is not None:
        topo = fixed_topology
    else:
        topo = build_topology(
            config.n_devices, config.plane_side_m, config.max_hops, _substream(seed, _S_TOPOLOGY)
        )
    datasets = make_datasets(config, _substream(seed, _S_DATASET))

    per_route_bw = config.channel.bandwidth_hz / topo.n_routes
    route_reports: list[RouteReport] = []
    deliveries: list[list[tuple[codec.SparseSample, int]]] = []
    emitted_total = 0
    undelivered = 0
    device_sdi: dict[int, LabelIndicator] = {}
    shortfall_devices: list[int] = []
    stalled_hops: list[tuple[int, int]] = []

    for j, route in enumerate(topo.routes):
        payload: Payload | None = None
        clock = 0
        hops: list[HopReport] = []
        final_result = None
        for m, dev in enumerate(route.device_ids):
            emission = protocol.device_emit(
                datasets[dev - 1], payload, config.protocol, _substream(seed, _S_EMIT, dev)
            )
            payload = emission.payload
            device_sdi[dev] = payload.public_sdi
            if emission.dummy_shortfall:
                shortfall_devices.append(dev)
            bits = codec.payload_bits(payload.samples, payload.public_sdi)
            link = LinkState(distance_m=hop_distance(route, m, topo), per_route_bandwidth_hz=per_route_bw)
            result = transmit_bits(
                link,
                config.channel,
                bits,
                _substream(seed, _S_HOP, j, m),
                max_slots=config.max_slots_per_hop,
            )
            hops.append(
                HopReport(
                    device_id=dev,
                    distance_m=link.distance_m,
                    payload_bits=bits,
                    slots=result.slots_used,
                    start_slot=clock,
                    completed=result.completed,
                    forwarded=emission.forwarded,
                    added_samples=emission.added_samples,
                    dummy_shortfall=emission.dummy_shortfall,
                )
            )
            clock += result.slots_used
            if not result.completed:
                stalled_hops.append((j, dev))
            if m == len(route.device_ids) - 1:
                final_result = result
            elif not result.completed:
                # Relay never finished receiving: nothing moves further down
                # this route. Latency counting stops at the stall.
                final_result = None
                break

        emitted = len(payload.samples)
        emitted_total += emitted
        stream: list[tuple[codec.SparseSample, int]] = []
        if final_result is not None:
            start = hops[-1].start_slot
            cum_bits = np.cumsum(final_result.bits_per_slot)
            boundaries = codec.sample_end_offsets(payload.samples)
            for sample, end_bytes in zip(payload.samples, boundaries):
                need = 8.0 * end_bytes - 1e-6
                idx = int(np.searchsorted(cum_bits, need, side="left"))
                if idx >= len(cum_bits):
                    undelivered += 1
                    continue
                stream.append((sample, start + idx + 1))
        else:
            undelivered += emitted
        deliveries.append(stream)
        route_reports.append(
            RouteReport(
                route_id=j,
                device_ids=route.device_ids,
                hops=hops,
                latency_slots=clock,
                emitted_samples=emitted,
                delivered_samples=0,  # filled after collection
                delivered_labels=LabelIndicator.empty(),
            )
        )

    inbox = server_collect(deliveries, config.tau_slots)
    per_route_delivered: dict[int, list[int]] = {j: [] for j in range(topo.n_routes)}
    for entry in inbox.entries:
        per_route_delivered[entry.route_id].append(entry.sample.label)
    for rep in route_reports:
        labs = per_route_delivered[rep.route_id]
        rep.delivered_samples = len(labs)
        rep.delivered_labels = LabelIndicator.from_labels(labs)

    # Per-device label privacy against the server: targets and public set both
    # restricted to labels actually delivered from the device's route.
    device_reports: list[DeviceReport] = []
    route_of = {dev: rep.route_id for rep in route_reports for dev in rep.device_ids}
    privacies: list[float] = []
    for dev in range(1, config.n_devices + 1):
        j = route_of[dev]
        delivered = route_reports[j].delivered_labels
        targets = datasets[dev - 1].target_labels
        if delivered.popcount() == 0:
            priv = None
        else:
            priv = privacy.label_privacy_multihop(targets & delivered, [delivered])
            privacies.append(priv)
        device_reports.append(
            DeviceReport(
                device_id=dev,
                route_id=j,
                target_labels=targets.labels(),
                public_sdi=device_sdi[dev].labels(),
                label_privacy=priv,
            )
        )

    ref_dev = reference_device(topo, _substream(seed, _S_REFERENCE))
    ref_route = route_of[ref_dev]
    ref_privacy = device_reports[ref_dev - 1].label_privacy

    sim_value: float | None = None
    spriv: float | None = None
    degenerate = False
    spriv_out_of_domain = False
    if config.compute_similarity and len(inbox) >= 2:
        images, _ = inbox.images_and_labels()
        sim_value = privacy.similarity(images)
        if not math.isfinite(sim_value):
            degenerate = True
        elif sim_value > 0:
            spriv = privacy.sample_privacy(sim_value)
        else:
            spriv_out_of_domain = True

    overall = max((r.latency_slots for r in route_reports), default=0)
    return SimReport(
        config=config,
        topo=topo,
        routes=route_reports,
        devices=device_reports,
        overall_latency_slots=overall,
        emitted_sample_count=emitted_total,
        delivered_sample_count=len(inbox),
        delivered_bytes=sum(e.sample.size_bytes for e in inbox.entries),
        late_sample_count=inbox.late_count,
        undelivered_sample_count=undelivered,
        received_sdi=inbox.received_sdi,
        reference_device=ref_dev,
        reference_route=ref_route,
        reference_route_latency=route_reports[ref_route].latency_slots,
        reference_label_privacy=ref_privacy,
        mean_label_privacy=(sum(privacies) / len(privacies)) if privacies else None,
        similarity=sim_value,
        sample_privacy=spriv,
        flags={
            "dummy_shortfall_devices": shortfall_devices,
            "stalled_hops": [list(t) for t in stalled_hops],
            "similarity_degenerate": degenerate,
            "sample_privacy_out_of_domain": spriv_out_of_domain,
            "empty_inbox": len(inbox) == 0,
        },
        inbox=inbox,
    )


def export_inbox(report: SimReport) -> tuple[bytes, dict]:
    """Serialize the delivered seed set as wire bytes plus a JSON-able sidecar."""
    samples = [e.sample for e in report.inbox.entries]
    blob = codec.encode_payload(samples, report.received_sdi)
    sidecar = {
        "format": "seedrelay-export-v1",
        "sample_count": len(samples),
        "received_sdi": list(map(int, report.received_sdi.bits)),
        "tau_slots": report.config.tau_slots,
        "rho": report.config.protocol.rho,
        "seed": report.config.seed,
        "arrivals": [
            {"route_id": e.route_id, "arrival_slot": e.arrival_slot, "label": e.sample.label}
            for e in report.inbox.entries
        ],
        "devices": [
            {"device_id": d.device_id, "route_id": d.route_id, "target_labels": d.target_labels}
            for d in report.devices
        ],
        "target_count": report.config.target_count,
        "full_count": report.config.full_count,
    }
    return blob, sidecar


def apply_axis(config: SimConfig, axis: str, value: float) -> SimConfig:
    """Return a copy of config with one sweep axis replaced."""
    axis = axis.lower()
    if axis == "rho":
        proto = dataclasses.replace(config.protocol, rho=float(value))
        return dataclasses.replace(config, protocol=proto)
    if axis == "m":
        return dataclasses.replace(config, max_hops=int(value))
    if axis == "l":
        proto = dataclasses.replace(config.protocol, privacy_threshold=int(value))
        return dataclasses.replace(config, protocol=proto)
    if axis == "tau":
        tau = None if math.isinf(float(value)) else int(value)
        return dataclasses.replace(config, tau_slots=tau)
    if axis == "tx_power":
        chan = dataclasses.replace(config.channel, tx_power_w=float(value))
        return dataclasses.replace(config, channel=chan)
    raise ValueError(f"unknown sweep axis {axis!r}, expected one of {SWEEP_AXES}")


# Metric extractors for sweep aggregation. Nullable metrics track how many
# runs actually defined them; the zerofill variant scores a reference device
# whose route delivered nothing as zero guarantee instead of dropping it.
_SWEEP_METRICS = (
    "overall_latency",
    "ref_latency",
    "ref_privacy",
    "ref_privacy_zerofill",
    "mean_privacy",
    "delivered",
    "delivered_fraction",
    "delivered_bytes",
    "emitted",
    "late",
    "similarity",
    "sample_privacy",
)
_NULLABLE = {"ref_privacy", "mean_privacy", "similarity", "sample_privacy"}


def _metrics_of(report: SimReport) -> dict[str, float | None]:
    sim_value = report.similarity
    if sim_value is not None and not math.isfinite(sim_value):
        sim_value = None
    ref_priv = report.reference_label_privacy
    emitted = report.emitted_sample_count
    return {
        "overall_latency": float(report.overall_latency_slots),
        "ref_latency": float(report.reference_route_latency),
        "ref_privacy": ref_priv,
        "ref_privacy_zerofill": float(ref_priv) if ref_priv is not None else 0.0,
        "mean_privacy": report.mean_label_privacy,
        "delivered": float(report.delivered_sample_count),
        "delivered_fraction": report.delivered_sample_count / emitted if emitted else 0.0,
        "delivered_bytes": float(report.delivered_bytes),
        "emitted": float(emitted),
        "late": float(report.late_sample_count),
        "similarity": sim_value,
        "sample_privacy": report.sample_privacy,
    }


def _sweep_task(args: tuple) -> tuple[tuple[int, int], dict]:
    (vi, si), cfg = args
    return (vi, si), _metrics_of(run(cfg))


@dataclass
class SweepRow:
    axis: str
    value: float
    seeds: int
    stats: dict[str, tuple[float | None, float | None, int]]  # mean, std, n

    def csv_cells(self) -> list[str]:
        def fmt(x):
            return "" if x is None else repr(float(x))

        cells = [self.axis, "inf" if math.isinf(self.value) else repr(self.value), str(self.seeds)]
        for name in _SWEEP_METRICS:
            mean, std, n = self.stats[name]
            cells.extend([fmt(mean), fmt(std)])
            if name in _NULLABLE:
                cells.append(str(n))
        return cells


def sweep_header() -> list[str]:
    cols = ["axis", "value", "seeds"]
    for name in _SWEEP_METRICS:
        cols.extend([f"{name}_mean", f"{name}_std"])
        if name in _NULLABLE:
            cols.append(f"{name}_n")
    return cols


def sweep(
    config: SimConfig,
    axis: str,
    values: list[float],
    seeds: int,
    jobs: int = 1,
) -> list[SweepRow]:
    """Mean/std of run metrics per axis value over `seeds` master seeds.

    Seed k of every axis value uses master seed config.seed + k, so values
    are compared under common random numbers. Results are aggregated in a
    fixed order regardless of worker count.
    """
    if not values:
        raise ValueError("sweep needs at least one axis value")
    if seeds < 1:
        raise ValueError("seeds must be >= 1")
    axis = axis.lower()
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}, expected one of {SWEEP_AXES}")

    tasks = []
    for vi, value in enumerate(values):
        base = apply_axis(config, axis, value)
        for si in range(seeds):
            tasks.append(((vi, si), dataclasses.replace(base, seed=config.seed + si)))

    results: dict[tuple[int, int], dict] = {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for key, metrics in pool.map(_sweep_task, tasks, chunksize=4):
                results[key] = metrics
    else:
        for task in tasks:
            key, metrics = _sweep_task(task)
            results[key] = metrics

    rows = []
    for vi, value in enumerate(values):
        per_metric: dict[str, tuple[float | None, float | None, int]] = {}
        for name in _SWEEP_METRICS:
            xs = [results[(vi, si)][name] for si in range(seeds)]
            defined = [x for x in xs if x is not None]
            if defined:
                arr = np.array(defined, dtype=np.float64)
                per_metric[name] = (float(arr.mean()), float(arr.std()), len(defined))
            else:
                per_metric[name] = (None, None, 0)
        rows.append(SweepRow(axis=axis, value=float(value), seeds=seeds, stats=per_metric))
    return rows
