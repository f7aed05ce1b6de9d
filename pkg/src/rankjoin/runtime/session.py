"""Protocol sessions and launchers.

Protocol code is written once and executed by each party with its own
``Session``.  Every message goes through ``Session.exchange`` so the meter
sees it.
"""

from __future__ import annotations

import contextlib
import secrets
import threading

import numpy as np

from rankjoin import sharing
from rankjoin.runtime.config import SessionConfig
from rankjoin.runtime.meter import Meter
from rankjoin.runtime.transport import LocalHub, SessionAborted, TcpChannel


def _encode(msg) -> bytes:
    if isinstance(msg, (bytes, bytearray)):
        return bytes(msg)
    return np.ascontiguousarray(msg, dtype="<u8").tobytes()


class Session:
    """One party's endpoint of a three-party session."""

    def __init__(self, party: int, channel, config: SessionConfig, dealer=None):
        self.party = party
        self.channel = channel
        self.config = config
        self.meter = Meter(party)
        self.dealer = dealer
        self.dealer_calls = 0
        self.prg = sharing.CorrelatedRandomness(self._setup_seeds())

    @property
    def party_id(self) -> int:
        return self.party + 1

    @property
    def next(self) -> int:
        return (self.party + 1) % 3

    @property
    def prev(self) -> int:
        return (self.party - 1) % 3

    def _setup_seeds(self) -> sharing.SeedPair:
        if self.config.prg_seed is not None:
            pair = sharing.derive_seed_pairs(self.config.prg_seed, self.config.kappa)[self.party]
        else:
            mine = secrets.randbits(self.config.kappa)
            got = self.exchange({self.next: _int_words(mine)}, expect=[self.prev])[self.prev]
            pair = sharing.SeedPair(with_next=mine, with_prev=_words_int(got))
        # Neighbours compare digests of the seed they should share.
        check = np.frombuffer(sharing.seed_digest(pair.with_prev), dtype="<u8").astype(np.uint64)
        mine_next = np.frombuffer(sharing.seed_digest(pair.with_next), dtype="<u8").astype(np.uint64)
        got = self.exchange({self.prev: check}, expect=[self.next])[self.next]
        if not np.array_equal(got, mine_next):
            self.channel.abort()
            raise sharing.SeedMismatch(f"party {self.party_id} and party {self.next + 1} disagree on their seed")
        return pair

    def exchange(self, outgoing: dict, expect=()) -> dict:
        """Send one message per destination, then receive one per expected source.

        Messages are uint64 arrays (or raw bytes); received arrays are flat.
        An exchange with nothing to send or receive is free.
        """
        if not outgoing and not expect:
            return {}
        self.meter.begin_round()
        for dst, msg in outgoing.items():
            data = _encode(msg)
            self.channel.send(dst, data)
            self.meter.record_send(dst, len(data))
        received = {}
        for src in expect:
            data = self.channel.recv(src)
            self.meter.record_recv(src, len(data))
            received[src] = np.frombuffer(data, dtype="<u8").astype(np.uint64)
        return received

    def exchange_bytes(self, outgoing: dict, expect=()) -> dict:
        if not outgoing and not expect:
            return {}
        self.meter.begin_round()
        for dst, data in outgoing.items():
            self.channel.send(dst, bytes(data))
            self.meter.record_send(dst, len(data))
        received = {}
        for src in expect:
            data = self.channel.recv(src)
            self.meter.record_recv(src, len(data))
            received[src] = data
        return received

    def idle_round(self):
        """Advance the round counter without traffic so latency stays visible."""
        self.meter.begin_round()

    def charge(self, sends: dict, recvs: dict):
        """Account one round of traffic that a trusted stand-in carried out.

        Used by the dealer backend so that its transcript matches the real
        protocol's byte for byte.
        """
        self.meter.begin_round()
        for dst, nbytes in sends.items():
            self.meter.record_send(dst, nbytes)
        for src, nbytes in recvs.items():
            self.meter.record_recv(src, nbytes)

    @contextlib.contextmanager
    def phase(self, name: str):
        self.meter.push_phase(name)
        try:
            yield
        finally:
            self.meter.pop_phase()

    def broadcast_check(self, digest: bytes, what: str):
        """Abort unless all parties hold the same 32-byte digest."""
        words = np.frombuffer(digest[:32].ljust(32, b"\0"), dtype="<u8").astype(np.uint64)
        got = self.exchange({self.next: words, self.prev: words}, expect=[self.prev, self.next])
        for src, w in got.items():
            if not np.array_equal(w, words):
                self.channel.abort()
                raise SessionAborted(f"party {src + 1} holds a different {what}")


def _int_words(v: int) -> np.ndarray:
    return np.array([(v >> (64 * i)) & sharing.MASK for i in range(4)], dtype=np.uint64)


def _words_int(words) -> int:
    return sum(int(w) << (64 * i) for i, w in enumerate(words))


class SessionResult(list):
    """Per-party return values, with the parties' transcripts attached."""

    transcripts: list


def run_three(fn, config: SessionConfig | None = None, party_args=None) -> SessionResult:
    """Run ``fn(session[, arg])`` as three in-process parties.

    Any exception in one party aborts the others; the first failure is
    re-raised here.
    """
    from rankjoin.runtime.dealer import Dealer

    config = config or SessionConfig()
    hub = LocalHub(config.timeout)
    dealer = Dealer() if config.backend == "dealer" else None
    results = [None] * 3
    errors = [None] * 3
    sessions = [None] * 3

    def body(p):
        try:
            s = Session(p, hub.channel(p), config, dealer)
            sessions[p] = s
            results[p] = fn(s) if party_args is None else fn(s, party_args[p])
            s.meter.close()
        except BaseException as exc:  # noqa: BLE001 - propagated below
            errors[p] = exc
            hub.abort()
            if dealer is not None:
                dealer.abort()

    threads = [threading.Thread(target=body, args=(p,), name=f"party{p + 1}") for p in range(3)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    real = [e for e in errors if e is not None and not isinstance(e, SessionAborted)]
    if real or any(errors):
        raise (real or [e for e in errors if e is not None])[0]
    out = SessionResult(results)
    out.transcripts = [s.meter.snapshot() for s in sessions]
    return out


def run_party(party: int, fn, config: SessionConfig):
    """Run ``fn`` as one party of a networked session (0-based ``party``)."""
    if config.backend == "dealer":
        raise ValueError("the dealer backend is only available for in-process sessions")
    channel = TcpChannel(party, config.endpoints, timeout=config.timeout)
    session = None
    try:
        session = Session(party, channel, config)
        result = fn(session)
        session.meter.close()
        return result, session.meter.snapshot()
    except BaseException:
        channel.abort()
        raise
    finally:
        channel.close()
