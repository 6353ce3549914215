"""seedrelay: multi-hop seed-sample collection simulator and privacy metrics.

Edge devices holding non-IID image data relay compressed seed samples toward a
central server over a fading TDMA channel. The library models device placement
and routing, the per-slot wireless link, the relay protocol (dummy-label
insertion, per-label caps, forward-only relaying), and computes label-privacy,
sample-privacy and uplink-latency metrics for a single run or a Monte-Carlo
sweep.
"""

__version__ = "0.1.0"

from . import channel, codec, dataset, privacy, protocol, simulator, topology
from .simulator import SimConfig, SimReport, run, sweep

__all__ = [
    "channel",
    "codec",
    "dataset",
    "privacy",
    "protocol",
    "simulator",
    "topology",
    "SimConfig",
    "SimReport",
    "run",
    "sweep",
]
