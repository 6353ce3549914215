"""Per-slot wireless link model.

Each hop sees path loss d^-alpha and i.i.d. Rayleigh fading (power gain
g ~ exp(1) drawn fresh every slot). The transmitter uses a fixed rate chosen
as a fraction of the link's mean-SNR Shannon capacity; a slot is an outage
whenever the instantaneous capacity falls below that rate, and the payload is
retransmitted until everything is through (or a slot cap is hit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Slots are drawn from the rng in blocks of this size; purely an efficiency
# knob, the consumed stream is identical for identical inputs.
_DRAW_BLOCK = 512


@dataclass(frozen=True)
class ChannelParams:
    bandwidth_hz: float = 20e6
    noise_psd_w_hz: float = 10 ** (-20.4)  # -174 dBm/Hz
    path_loss_exp: float = 4.0
    tx_power_w: float = 0.2
    slot_duration_s: float = 1e-3
    tx_rate_fraction: float = 0.5

    def validate(self) -> None:
        for name in (
            "bandwidth_hz",
            "noise_psd_w_hz",
            "path_loss_exp",
            "tx_power_w",
            "slot_duration_s",
            "tx_rate_fraction",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.tx_rate_fraction > 1.0:
            raise ValueError("tx_rate_fraction must lie in (0, 1]")


@dataclass(frozen=True)
class LinkState:
    """One hop: transmitter-to-destination distance and the route's bandwidth share."""

    distance_m: float
    per_route_bandwidth_hz: float


@dataclass
class HopResult:
    slots_used: int
    bits_per_slot: np.ndarray = field(repr=False)  # delivered bits, slot by slot
    completed: bool = True

    @property
    def bits_delivered(self) -> float:
        return float(self.bits_per_slot.sum())


def mean_snr(link: LinkState, params: ChannelParams) -> float:
    """Average receive SNR of the hop (fading gain at its mean, g=1)."""
    noise = params.noise_psd_w_hz * link.per_route_bandwidth_hz
    return params.tx_power_w * link.distance_m ** (-params.path_loss_exp) / noise


def instantaneous_capacity(link: LinkState, params: ChannelParams, fading: float) -> float:
    """Shannon capacity of the hop, in bits/second, for fading power gain `fading`."""
    if fading < 0:
        raise ValueError(f"fading gain must be nonnegative, got {fading}")
    bw = link.per_route_bandwidth_hz
    return bw * math.log2(1.0 + fading * mean_snr(link, params))


def tx_rate(link: LinkState, params: ChannelParams) -> float:
    """Fixed transmission rate of the hop: tx_rate_fraction of the mean-SNR capacity."""
    return params.tx_rate_fraction * instantaneous_capacity(link, params, 1.0)


def transmit_bits(
    link: LinkState,
    params: ChannelParams,
    payload_bits: float,
    rng: np.random.Generator,
    max_slots: int | None = None,
) -> HopResult:
    """Push payload_bits across the hop, one slot at a time.

    Every slot draws a fresh fading gain g ~ exp(1). The slot delivers
    tx_rate * slot_duration bits when the instantaneous capacity reaches the
    fixed rate, otherwise nothing (outage, retransmitted later). Returns after
    all bits are delivered, or after max_slots with completed=False.
    """
    if payload_bits < 0:
        raise ValueError(f"payload_bits must be nonnegative, got {payload_bits}")
    if payload_bits == 0:
        return HopResult(slots_used=0, bits_per_slot=np.zeros(0), completed=True)

    rate = tx_rate(link, params)
    per_slot = rate * params.slot_duration_s
    snr = mean_snr(link, params)
    # Success iff rate <= B' log2(1 + g snr), i.e. g >= g_threshold.
    g_threshold = (2.0 ** (rate / link.per_route_bandwidth_hz) - 1.0) / snr
    successes_needed = math.ceil(payload_bits / per_slot)

    success_flags: list[np.ndarray] = []
    total_success = 0
    slots = 0
    while total_success < successes_needed:
        block = _DRAW_BLOCK
        if max_slots is not None:
            block = min(block, max_slots - slots)
            if block <= 0:
                break
        gains = rng.exponential(1.0, size=block)
        ok = gains >= g_threshold
        cum = np.cumsum(ok)
        if total_success + cum[-1] >= successes_needed:
            # Stop exactly at the slot that completes the payload.
            stop = int(np.searchsorted(cum, successes_needed - total_success)) + 1
            ok = ok[:stop]
            cum = cum[:stop]
        success_flags.append(ok)
        total_success += int(cum[-1]) if len(cum) else 0
        slots += len(ok)

    flags = np.concatenate(success_flags) if success_flags else np.zeros(0, dtype=bool)
    return HopResult(
        slots_used=slots,
        bits_per_slot=flags.astype(float) * per_slot,
        completed=total_success >= successes_needed,
    )
