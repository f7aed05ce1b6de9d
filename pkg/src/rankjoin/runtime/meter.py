"""Per-party accounting of communication rounds and payload bytes."""

from __future__ import annotations

import time
from dataclasses import dataclass, field


@dataclass
class Transcript:
    """Shape of one party's traffic: what was sent and received, and when.

    ``entries`` holds ``(round, src, dst, nbytes)`` for every message this
    party sent or received.  Two runs with equal shapes are indistinguishable
    to anyone who can only observe message sizes and timing order.
    """

    party: int
    entries: list = field(default_factory=list)
    rounds: int = 0
    sent: int = 0
    received: int = 0
    wall: float = 0.0
    phases: dict = field(default_factory=dict)
    disclosed: list = field(default_factory=list)
    partial: bool = False

    def shape(self) -> tuple:
        return tuple(self.entries)

    @property
    def total(self) -> int:
        return self.sent + self.received


class Meter:
    def __init__(self, party: int):
        self.party = party
        self.round = 0
        self.entries = []
        self.sent = 0
        self.received = 0
        self.phases = {}
        self.disclosed = []
        self._phase = []
        self._start = time.perf_counter()
        self._end = None

    def begin_round(self):
        self.round += 1

    def record_send(self, dst: int, nbytes: int):
        self.entries.append((self.round, self.party, dst, nbytes))
        self.sent += nbytes
        self._charge_phase(nbytes)

    def record_recv(self, src: int, nbytes: int):
        self.entries.append((self.round, src, self.party, nbytes))
        self.received += nbytes
        self._charge_phase(nbytes)

    def _charge_phase(self, nbytes: int):
        if self._phase:
            key = self._phase[-1]
            self.phases[key] = self.phases.get(key, 0) + nbytes

    def push_phase(self, name: str):
        self._phase.append(name)

    def pop_phase(self):
        self._phase.pop()

    def disclose(self, label: str, value):
        """Log a value revealed to every party beyond the public sizes."""
        self.disclosed.append((label, value))

    def close(self):
        if self._end is None:
            self._end = time.perf_counter()

    def snapshot(self) -> Transcript:
        end = self._end if self._end is not None else time.perf_counter()
        return Transcript(
            party=self.party,
            entries=list(self.entries),
            rounds=self.round,
            sent=self.sent,
            received=self.received,
            wall=end - self._start,
            phases=dict(self.phases),
            disclosed=list(self.disclosed),
            partial=self._end is None,
        )


@dataclass
class MeterReport:
    max_bytes: int
    rounds: int
    wall: float
    per_party: list
    partial: bool

    def as_text(self) -> str:
        lines = [
            f"max_bytes_per_party {self.max_bytes}",
            f"rounds {self.rounds}",
            f"wall_seconds {self.wall:.4f}",
        ]
        for t in self.per_party:
            lines.append(f"party{t.party + 1} sent {t.sent} received {t.received} rounds {t.rounds}")
        if self.partial:
            lines.append("partial snapshot")
        return "\n".join(lines) + "\n"


def meter_report(transcripts) -> MeterReport:
    """Summarise a session; communication cost is the busiest party's traffic."""
    transcripts = [t.snapshot() if isinstance(t, Meter) else t for t in transcripts]
    return MeterReport(
        max_bytes=max(t.total for t in transcripts),
        rounds=max(t.rounds for t in transcripts),
        wall=max(t.wall for t in transcripts),
        per_party=transcripts,
        partial=any(t.partial for t in transcripts),
    )
