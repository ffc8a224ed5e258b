"""Synthetic dataset generation: turns a Scenario into broadcast records.

For every broadcast, every receiver independently passes or fails the link
budget (Bernoulli LoS/NLoS branch, threshold on received power). Receivers
that hear the broadcast log a time of arrival

    toa = emission_time + distance / c + clock_offset(t)

quantized by flooring onto the receiver's timestamp grid; GSN clocks have
zero offset. The ground-truth aircraft position per transmission is
returned alongside the records.
"""

from __future__ import annotations

import math

import numpy as np

from .channel import link_received
from .clocks import simulate_clock
from .constants import SPEED_OF_LIGHT
from .geo import CartesianPosition, elevation_angle, geodetic_to_local, _geodetic_to_ecef
from .records import BroadcastRecord, Reception, TruthRow
from .scenario import Receiver, ReceiverKind, Scenario


def quantize_toa(toa_s: float, sampling_rate_hz: float) -> float:
    """Floor the arrival time onto the receiver's timestamp grid."""
    return math.floor(toa_s * sampling_rate_hz) / sampling_rate_hz


def _slant_distance(av_ecef, rx_ecef) -> float:
    return math.dist(av_ecef, rx_ecef)


def simulate_dataset(scenario: Scenario) -> tuple[list[BroadcastRecord], list[TruthRow]]:
    """Simulate every broadcast in the scenario.

    Returns records sorted by emission time (only broadcasts heard by at
    least one receiver) and the full truth table. Identical scenarios give
    byte-identical output: link draws come from one sequential stream
    seeded by the scenario seed, clock noise from per-receiver substreams.
    """
    if len(scenario.receivers) < 1:
        raise ValueError("scenario needs at least one receiver")

    receivers = sorted(scenario.receivers, key=lambda r: r.id)
    rx_ecef = {r.id: _geodetic_to_ecef(r.position) for r in receivers}

    link_rng = np.random.default_rng(scenario.rng_seed)

    # Pass 1: emissions, geometry, link admission (clock-independent).
    truth: list[TruthRow] = []
    events = []  # (emission_t, av_id, trusted, [(receiver, true_arrival)])
    for traj in sorted(scenario.trajectories, key=lambda t: t.av_id):
        claim_rng = np.random.default_rng([scenario.rng_seed, traj.av_id, 7])
        for k, t in enumerate(traj.broadcast_times(scenario.duration_s)):
            pos = traj.position_at(t)
            if pos is None:
                continue
            # the reference table carries what the aircraft reports; only
            # trusted claims are consumed by the pipeline, so target rows
            # stay exact for scoring
            reported = pos
            if traj.trusted and traj.position_error_std_m > 0.0:
                de, dn = claim_rng.normal(0.0, traj.position_error_std_m, 2)
                lat_rad = math.radians(pos.lat_deg)
                reported = GeodeticPosition(
                    pos.lat_deg + dn / 111132.95,
                    pos.lon_deg + de / (111319.49 * math.cos(lat_rad)),
                    pos.alt_m,
                )
            truth.append(TruthRow(traj.av_id, k, t, reported))
            av_ecef = _geodetic_to_ecef(pos)
            arrivals = []
            for rx in receivers:
                d = _slant_distance(av_ecef, rx_ecef[rx.id])
                local = geodetic_to_local(pos, rx.position)
                theta = elevation_angle(CartesianPosition(0.0, 0.0, 0.0), local)
                draw = link_rng.random()
                received = d > 0 and link_received(d, theta, scenario.channel, draw)
                jitter = link_rng.normal(0.0, rx.toa_jitter_std_s) \
                    if rx.toa_jitter_std_s > 0.0 else 0.0
                if received:
                    arrivals.append((rx, t + d / SPEED_OF_LIGHT + jitter))
            events.append((t, traj.av_id, traj.trusted, arrivals))

    # Pass 2: per-receiver clock offsets evaluated at that receiver's arrivals.
    arrivals_by_rx: dict[int, list[tuple[int, float]]] = {r.id: [] for r in receivers}
    for ev_idx, (_, _, _, arrivals) in enumerate(events):
        for rx, t_arr in arrivals:
            arrivals_by_rx[rx.id].append((ev_idx, t_arr))
    offsets_by_rx: dict[int, dict[int, float]] = {}
    for rx in receivers:
        entries = arrivals_by_rx[rx.id]
        if rx.kind is ReceiverKind.GSN or rx.clock is None or not entries:
            offsets_by_rx[rx.id] = {ev: 0.0 for ev, _ in entries}
            continue
        entries.sort(key=lambda e: e[1])
        times = [t for _, t in entries]
        # Co-located aircraft could alias arrival times; nudge exact ties.
        for i in range(1, len(times)):
            if times[i] <= times[i - 1]:
                times[i] = math.nextafter(times[i - 1], math.inf)
        clock_rng = np.random.default_rng([scenario.rng_seed, rx.id])
        etas = simulate_clock(rx.clock, times, clock_rng)
        offsets_by_rx[rx.id] = {ev: float(eta) for (ev, _), eta in zip(entries, etas)}

    # Pass 3: assemble quantized records.
    records: list[BroadcastRecord] = []
    for ev_idx, (t, av_id, trusted, arrivals) in enumerate(events):
        if not arrivals:
            continue
        receptions = []
        for rx, t_arr in arrivals:
            toa = t_arr + offsets_by_rx[rx.id][ev_idx]
            receptions.append(Reception(
                rx_id=rx.id,
                position=rx.position,
                toa_s=quantize_toa(toa, rx.sampling_rate_hz),
                kind=rx.kind,
            ))
        records.append(BroadcastRecord(t, av_id, trusted, tuple(receptions)))
    records.sort(key=lambda r: (r.server_time_s, r.av_id))
    return records, truth


def true_arrival_time(truth_pos_ecef, receiver: Receiver, emission_t: float) -> float:
    """Unquantized, offset-free arrival time; test/oracle helper."""
    d = _slant_distance(truth_pos_ecef, _geodetic_to_ecef(receiver.position))
    return emission_t + d / SPEED_OF_LIGHT
