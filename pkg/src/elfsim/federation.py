"""Communication accounting for federated sampling rounds.

Payloads are measured in float-equivalents per message.  The ledger only
aggregates what the round kernels actually emitted; closed-form totals for
each algorithm are provided separately so runs can be audited against them.
"""
from __future__ import annotations

from dataclasses import dataclass

DIRECTIONS = ("uplink", "downlink")


@dataclass(frozen=True)
class Message:
    """One transmission: direction, client id (None = broadcast), payload size."""

    direction: str
    client: int | None
    payload_floats: int
    round_index: int
    kind: str

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")
        if self.payload_floats < 0:
            raise ValueError("payload_floats must be >= 0")
        if self.round_index < 0:
            raise ValueError("round_index must be >= 0")


class CommLedger:
    """Monotone float counters fed by recorded messages.

    Messages must arrive in non-decreasing round order; a regression raises.
    """

    def __init__(self):
        self.uplink_floats = 0
        self.downlink_floats = 0
        self.messages = 0
        self.last_round = 0

    def record(self, message: Message):
        if message.round_index < self.last_round:
            raise ValueError(
                f"round regression: message for round {message.round_index} "
                f"after round {self.last_round}"
            )
        self.last_round = max(self.last_round, message.round_index)
        if message.direction == "uplink":
            self.uplink_floats += message.payload_floats
        else:
            self.downlink_floats += message.payload_floats
        self.messages += 1


def per_round_floats(algorithm: str, n: int, d: int,
                     uplink_payload: int | None = None,
                     downlink_payload: int | None = None) -> tuple[int, int]:
    """Closed-form (uplink, downlink) float counts for one round.

    uplink_payload / downlink_payload are the per-message payloads of the
    configured compressors where applicable.
    """
    if algorithm == "lmc":
        return n * d, d
    if algorithm == "delf":
        if uplink_payload is None:
            raise ValueError("delf needs the uplink payload size")
        return n * uplink_payload, d
    if algorithm == "pelf":
        if downlink_payload is None:
            raise ValueError("pelf needs the downlink payload size")
        return n * d, downlink_payload
    if algorithm == "belf":
        if uplink_payload is None or downlink_payload is None:
            raise ValueError("belf needs both payload sizes")
        return n * uplink_payload, downlink_payload
    raise ValueError(f"unknown algorithm: {algorithm!r}")


def closed_form_totals(algorithm: str, n: int, d: int, rounds: int,
                       uplink_payload: int | None = None,
                       downlink_payload: int | None = None) -> tuple[int, int]:
    """Totals over `rounds` rounds, (uplink, downlink)."""
    up, down = per_round_floats(algorithm, n, d, uplink_payload, downlink_payload)
    return rounds * up, rounds * down


def cost_to_reach(records, threshold: float):
    """First logged record whose KL proxy is <= threshold.

    Returns (round, uplink_floats_cum, downlink_floats_cum) or None if the
    threshold is never reached (NaN proxies never qualify).
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    for rec in records:
        kl = rec.kl_proxy
        if kl == kl and kl <= threshold:  # NaN-safe comparison
            return rec.round, rec.uplink_floats_cum, rec.downlink_floats_cum
    return None
