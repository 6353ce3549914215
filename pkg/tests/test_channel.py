import math

import numpy as np
import pytest

from seedrelay import channel as ch

DEFAULTS = ch.ChannelParams()


def test_zero_fading_means_zero_capacity():
    link = ch.LinkState(distance_m=1000.0, per_route_bandwidth_hz=20e6)
    assert ch.instantaneous_capacity(link, DEFAULTS, 0.0) == 0.0


def test_capacity_matches_frozen_reference_value():
    # Independent evaluation of B'*log2(1 + g P d^-a / (N0 B')) at
    # B'=20 MHz, P=0.2 W, d=1 km, a=4, N0=10^-20.4 W/Hz, g=1, frozen ahead of
    # this implementation.
    link = ch.LinkState(distance_m=1000.0, per_route_bandwidth_hz=20e6)
    assert ch.instantaneous_capacity(link, DEFAULTS, 1.0) == pytest.approx(
        36244923.82601243, rel=1e-12
    )
    assert ch.mean_snr(link, DEFAULTS) == pytest.approx(2.5118864315095717, rel=1e-12)


def test_doubling_distance_divides_snr_sixteenfold():
    near = ch.LinkState(distance_m=500.0, per_route_bandwidth_hz=20e6)
    far = ch.LinkState(distance_m=1000.0, per_route_bandwidth_hz=20e6)
    assert ch.mean_snr(near, DEFAULTS) / ch.mean_snr(far, DEFAULTS) == pytest.approx(16.0)


def test_capacity_monotonicity_on_grids():
    base = ch.LinkState(distance_m=2000.0, per_route_bandwidth_hz=5e6)
    caps_g = [ch.instantaneous_capacity(base, DEFAULTS, g) for g in (0.1, 0.5, 1.0, 3.0)]
    assert all(a < b for a, b in zip(caps_g, caps_g[1:]))
    caps_d = [
        ch.instantaneous_capacity(
            ch.LinkState(distance_m=d, per_route_bandwidth_hz=5e6), DEFAULTS, 1.0
        )
        for d in (500.0, 1000.0, 2000.0, 4000.0)
    ]
    assert all(a > b for a, b in zip(caps_d, caps_d[1:]))
    import dataclasses

    for lo, hi in [(0.05, 0.1), (0.1, 0.2), (0.2, 0.4)]:
        p_lo = dataclasses.replace(DEFAULTS, tx_power_w=lo)
        p_hi = dataclasses.replace(DEFAULTS, tx_power_w=hi)
        assert ch.instantaneous_capacity(base, p_lo, 1.0) < ch.instantaneous_capacity(base, p_hi, 1.0)


def test_negative_fading_rejected():
    link = ch.LinkState(distance_m=100.0, per_route_bandwidth_hz=1e6)
    with pytest.raises(ValueError):
        ch.instantaneous_capacity(link, DEFAULTS, -0.1)


def test_zero_payload_needs_zero_slots(rng):
    link = ch.LinkState(distance_m=1000.0, per_route_bandwidth_hz=2e6)
    res = ch.transmit_bits(link, DEFAULTS, 0, rng)
    assert res.slots_used == 0 and res.completed


def test_transmission_is_deterministic():
    link = ch.LinkState(distance_m=3000.0, per_route_bandwidth_hz=2e6)
    a = ch.transmit_bits(link, DEFAULTS, 5000, np.random.default_rng(11))
    b = ch.transmit_bits(link, DEFAULTS, 5000, np.random.default_rng(11))
    assert a.slots_used == b.slots_used
    assert np.array_equal(a.bits_per_slot, b.bits_per_slot)


def test_slot_cap_stops_the_loop():
    link = ch.LinkState(distance_m=7000.0, per_route_bandwidth_hz=1e6)
    res = ch.transmit_bits(link, DEFAULTS, 10_000_000, np.random.default_rng(0), max_slots=50)
    assert res.slots_used == 50
    assert not res.completed
    assert res.bits_delivered < 10_000_000


def test_expected_slots_match_geometric_oracle():
    # Fixed-rate outage channel: success prob p = exp(-g*) with
    # g* = (2^(R/B') - 1)/S, S the mean SNR, R = 0.5 B' log2(1+S); the slot
    # count for k needed successes is a sum of k geometrics with mean k/p.
    # Values frozen from the closed forms at d=3 km, B'=2 MHz:
    S = 0.310109435988836
    R = 389687.3279185101
    p = 0.6273269685372302
    bits = 2000.0
    k = math.ceil(bits / (R * 1e-3))
    expected = k / p
    assert expected == pytest.approx(9.56439034334918, rel=1e-12)

    link = ch.LinkState(distance_m=3000.0, per_route_bandwidth_hz=2e6)
    assert ch.mean_snr(link, DEFAULTS) == pytest.approx(S, rel=1e-12)
    assert ch.tx_rate(link, DEFAULTS) == pytest.approx(R, rel=1e-12)

    gen = np.random.default_rng(2024)
    trials = 100_000
    total = 0
    for _ in range(trials):
        total += ch.transmit_bits(link, DEFAULTS, bits, gen).slots_used
    assert total / trials == pytest.approx(expected, rel=0.02)


def test_mean_slots_nonincreasing_as_distance_shrinks():
    bits = 20_000
    means = []
    for d in (5000.0, 3000.0, 1500.0):
        link = ch.LinkState(distance_m=d, per_route_bandwidth_hz=2e6)
        slots = [
            ch.transmit_bits(link, DEFAULTS, bits, np.random.default_rng(s)).slots_used
            for s in range(200)
        ]
        means.append(np.mean(slots))
    assert means[0] > means[1] > means[2]


def test_each_successful_slot_delivers_the_fixed_rate():
    link = ch.LinkState(distance_m=2000.0, per_route_bandwidth_hz=4e6)
    res = ch.transmit_bits(link, DEFAULTS, 30_000, np.random.default_rng(3))
    per_slot = ch.tx_rate(link, DEFAULTS) * DEFAULTS.slot_duration_s
    nonzero = res.bits_per_slot[res.bits_per_slot > 0]
    assert np.allclose(nonzero, per_slot)
    assert res.bits_delivered >= 30_000


def test_params_validation():
    import dataclasses

    with pytest.raises(ValueError):
        dataclasses.replace(DEFAULTS, tx_rate_fraction=1.5).validate()
    with pytest.raises(ValueError):
        dataclasses.replace(DEFAULTS, bandwidth_hz=0.0).validate()
    DEFAULTS.validate()
