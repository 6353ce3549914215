"""Device placement on the plane and multi-hop route construction.

Devices are numbered 1..N. Each route is an ordered chain of device ids whose
last member transmits to the server; a device's direct destination is the next
id in its chain (or the server). Routes partition the device set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Hops between co-located points are clamped to this distance so the link SNR
# stays finite.
MIN_HOP_DISTANCE_M = 1.0


class EmptyNetworkError(ValueError):
    """Raised when a topology with zero devices is requested."""


class TopologyFormatError(ValueError):
    """Raised when a topology text file cannot be parsed."""


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float

    def distance_to(self, other: "Point2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Route:
    """Ordered device ids; the first is the edge device, the last uplinks to the server."""

    device_ids: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.device_ids)


@dataclass(frozen=True)
class Topology:
    devices: tuple[Point2D, ...]  # index d-1 holds device d
    server: Point2D
    routes: tuple[Route, ...]
    max_hops: int
    plane_side: float

    @property
    def n_devices(self) -> int:
        return len(self.devices)

    @property
    def n_routes(self) -> int:
        return len(self.routes)

    def device(self, device_id: int) -> Point2D:
        return self.devices[device_id - 1]


def place_devices(n: int, plane_side: float, rng: np.random.Generator) -> list[Point2D]:
    """Draw n device positions i.i.d. uniform on the plane_side square."""
    if n < 1:
        raise EmptyNetworkError(f"need at least one device, got n={n}")
    if plane_side <= 0:
        raise ValueError(f"plane_side must be positive, got {plane_side}")
    coords = rng.uniform(0.0, plane_side, size=(n, 2))
    return [Point2D(float(x), float(y)) for x, y in coords]


def build_routes(
    devices: Sequence[Point2D], server: Point2D, max_hops: int
) -> list[Route]:
    """Chain devices toward the server with a greedy nearest-neighbor rule.

    Starting from the farthest unassigned device, each chain is extended one
    device at a time with the unassigned device nearest to the current head,
    preferring candidates strictly closer to the server than the head (so
    chains make monotone progress whenever the geometry allows it). Chains
    absorb exactly max_hops devices while any remain unassigned, then uplink
    to the server; with max_hops=1 every device forms its own single-hop
    route. Distance ties between candidates break toward the lower device id.
    Deterministic: no randomness beyond the device positions.
    """
    if max_hops < 1:
        raise ValueError(f"max_hops must be >= 1, got {max_hops}")
    ids = list(range(1, len(devices) + 1))
    to_server = {i: devices[i - 1].distance_to(server) for i in ids}
    # Farthest-first seeding order; ties toward lower id.
    seed_order = sorted(ids, key=lambda i: (-to_server[i], i))
    unassigned = set(ids)
    routes: list[Route] = []
    for seed in seed_order:
        if seed not in unassigned:
            continue
        chain = [seed]
        unassigned.discard(seed)
        while len(chain) < max_hops and unassigned:
            head = chain[-1]
            head_pt = devices[head - 1]
            closer = [i for i in unassigned if to_server[i] < to_server[head]]
            candidates = closer if closer else sorted(unassigned)
            best = min(
                candidates, key=lambda i: (head_pt.distance_to(devices[i - 1]), i)
            )
            chain.append(best)
            unassigned.discard(best)
        routes.append(Route(tuple(chain)))
    return routes


def build_topology(
    n: int, plane_side: float, max_hops: int, rng: np.random.Generator
) -> Topology:
    """Place n devices and route them to a server at the plane center."""
    devices = place_devices(n, plane_side, rng)
    server = Point2D(plane_side / 2.0, plane_side / 2.0)
    routes = build_routes(devices, server, max_hops)
    return Topology(
        devices=tuple(devices),
        server=server,
        routes=tuple(routes),
        max_hops=max_hops,
        plane_side=plane_side,
    )


def hop_distance(route: Route, position: int, topology: Topology) -> float:
    """Distance from the device at `position` in the route to its direct destination.

    The destination is the next device in the chain, or the server for the
    last position. Clamped below by MIN_HOP_DISTANCE_M.
    """
    if position < 0 or position >= len(route.device_ids):
        raise IndexError(
            f"position {position} out of range for route of length {len(route.device_ids)}"
        )
    src = topology.device(route.device_ids[position])
    if position == len(route.device_ids) - 1:
        dst = topology.server
    else:
        dst = topology.device(route.device_ids[position + 1])
    return max(src.distance_to(dst), MIN_HOP_DISTANCE_M)


def validate_partition(topology: Topology) -> None:
    """Check that the routes partition {1..N} with lengths in [1, max_hops]."""
    seen: set[int] = set()
    for route in topology.routes:
        if not 1 <= len(route.device_ids) <= topology.max_hops:
            raise ValueError(f"route length {len(route.device_ids)} outside [1, {topology.max_hops}]")
        for dev in route.device_ids:
            if dev in seen:
                raise ValueError(f"device {dev} appears in more than one route")
            seen.add(dev)
    expected = set(range(1, topology.n_devices + 1))
    if seen != expected:
        missing = sorted(expected - seen)
        raise ValueError(f"devices missing from routes: {missing}")


def to_text(topology: Topology) -> str:
    """Serialize: header `N M plane_side`, one `id x y` line per device, one route per line."""
    lines = [f"{topology.n_devices} {topology.max_hops} {topology.plane_side!r}"]
    for i, pt in enumerate(topology.devices, start=1):
        lines.append(f"{i} {pt.x!r} {pt.y!r}")
    for route in topology.routes:
        lines.append(" ".join(str(d) for d in route.device_ids))
    return "\n".join(lines) + "\n"


def from_text(text: str) -> Topology:
    """Parse the line-oriented format written by to_text. Server sits at the plane center."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise TopologyFormatError("empty topology file")
    header = lines[0].split()
    if len(header) != 3:
        raise TopologyFormatError(f"bad header {lines[0]!r}, expected 'N M plane_side'")
    try:
        n, max_hops, plane_side = int(header[0]), int(header[1]), float(header[2])
    except ValueError as exc:
        raise TopologyFormatError(f"bad header {lines[0]!r}: {exc}") from None
    if len(lines) < 1 + n:
        raise TopologyFormatError(f"expected {n} device lines, found {len(lines) - 1}")
    devices: list[Point2D] = []
    for k, ln in enumerate(lines[1 : 1 + n], start=1):
        parts = ln.split()
        if len(parts) != 3 or int(parts[0]) != k:
            raise TopologyFormatError(f"bad device line {ln!r}, expected '{k} x y'")
        devices.append(Point2D(float(parts[1]), float(parts[2])))
    routes = []
    for ln in lines[1 + n :]:
        routes.append(Route(tuple(int(tok) for tok in ln.split())))
    topo = Topology(
        devices=tuple(devices),
        server=Point2D(plane_side / 2.0, plane_side / 2.0),
        routes=tuple(routes),
        max_hops=max_hops,
        plane_side=plane_side,
    )
    validate_partition(topo)
    return topo
