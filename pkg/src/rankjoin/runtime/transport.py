"""Authenticated point-to-point channels between the three parties.

Two transports share one interface: in-process queues for tests and
single-host runs, and TCP sockets with 4-byte little-endian length framing
for separate processes.  Channels are assumed private and authenticated
(localhost or a tunnel); nothing here encrypts traffic.
"""

from __future__ import annotations

import queue
import socket
import struct
import threading
import time

_POISON = object()
_ABORT_FRAME = struct.pack("<I", 0xFFFFFFFF)


class SessionAborted(RuntimeError):
    """A peer failed or the session timed out; all parties stop."""


class Channel:
    party: int

    def send(self, dst: int, payload: bytes) -> None:
        raise NotImplementedError

    def recv(self, src: int) -> bytes:
        raise NotImplementedError

    def abort(self) -> None:
        raise NotImplementedError

    def close(self) -> None:
        pass


class LocalHub:
    """Queues for all six directed links of one in-process session."""

    def __init__(self, timeout: float):
        self.timeout = timeout
        self.links = {(s, d): queue.SimpleQueue() for s in range(3) for d in range(3) if s != d}
        self.aborted = threading.Event()

    def channel(self, party: int) -> "LocalChannel":
        return LocalChannel(self, party)

    def abort(self):
        if not self.aborted.is_set():
            self.aborted.set()
            for q in self.links.values():
                q.put(_POISON)


class LocalChannel(Channel):
    def __init__(self, hub: LocalHub, party: int):
        self.hub = hub
        self.party = party

    def send(self, dst, payload):
        if self.hub.aborted.is_set():
            raise SessionAborted("session aborted")
        self.hub.links[(self.party, dst)].put(payload)

    def recv(self, src):
        try:
            item = self.hub.links[(src, self.party)].get(timeout=self.hub.timeout)
        except queue.Empty:
            self.hub.abort()
            raise SessionAborted(f"party {self.party + 1} timed out waiting for party {src + 1}")
        if item is _POISON:
            raise SessionAborted("session aborted by a peer")
        return item

    def abort(self):
        self.hub.abort()


def _parse_endpoint(ep: str) -> tuple[str, int]:
    host, _, port = ep.rpartition(":")
    return host or "127.0.0.1", int(port)


def _read_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise SessionAborted("peer closed the connection")
        buf += chunk
    return bytes(buf)


class TcpChannel(Channel):
    """Party ``p`` accepts connections from higher-numbered parties and dials lower ones.

    Each peer gets a writer thread so that two parties sending large messages
    to each other at once cannot deadlock on full socket buffers.
    """

    def __init__(self, party: int, endpoints, timeout: float = 120.0, connect_wait: float = 30.0):
        self.party = party
        self.timeout = timeout
        self.socks = {}
        self._out = {}
        self._writers = []
        self._aborted = threading.Event()
        host, port = _parse_endpoint(endpoints[party])
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((host, port))
        listener.listen(3)
        listener.settimeout(connect_wait)
        try:
            for peer in range(party):
                self.socks[peer] = self._dial(endpoints[peer], connect_wait)
            for _ in range(party + 1, 3):
                conn, _ = listener.accept()
                peer = struct.unpack("<I", _read_exact(conn, 4))[0]
                self.socks[peer] = conn
        except OSError as exc:
            raise SessionAborted(f"party {party + 1} could not connect: {exc}") from exc
        finally:
            listener.close()
        for peer, sock in self.socks.items():
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            sock.settimeout(timeout)
            q = queue.SimpleQueue()
            self._out[peer] = q
            t = threading.Thread(target=self._writer, args=(sock, q), daemon=True)
            t.start()
            self._writers.append(t)

    def _dial(self, endpoint, wait):
        host, port = _parse_endpoint(endpoint)
        deadline = time.monotonic() + wait
        while True:
            try:
                sock = socket.create_connection((host, port), timeout=wait)
                sock.sendall(struct.pack("<I", self.party))
                return sock
            except OSError:
                if time.monotonic() > deadline:
                    raise
                time.sleep(0.05)

    def _writer(self, sock, q):
        while True:
            item = q.get()
            if item is _POISON:
                return
            frame = _ABORT_FRAME if item is _ABORT_FRAME else struct.pack("<I", len(item)) + item
            try:
                sock.sendall(frame)
            except OSError:
                self._aborted.set()
                return

    def send(self, dst, payload):
        if self._aborted.is_set():
            raise SessionAborted("session aborted")
        self._out[dst].put(payload)

    def recv(self, src):
        try:
            sock = self.socks[src]
            (length,) = struct.unpack("<I", _read_exact(sock, 4))
            if length == 0xFFFFFFFF:
                raise SessionAborted(f"party {src + 1} aborted the session")
            return _read_exact(sock, length)
        except socket.timeout as exc:
            raise SessionAborted(f"timed out waiting for party {src + 1}") from exc
        except OSError as exc:
            raise SessionAborted(f"link to party {src + 1} failed: {exc}") from exc

    def abort(self):
        self._aborted.set()
        for q in self._out.values():
            q.put(_ABORT_FRAME)

    def close(self):
        for q in self._out.values():
            q.put(_POISON)
        for t in self._writers:
            t.join(timeout=self.timeout)
        for sock in self.socks.values():
            try:
                sock.close()
            except OSError:
                pass
