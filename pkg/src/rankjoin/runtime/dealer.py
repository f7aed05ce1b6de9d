"""Trusted in-process stand-in for a protocol core.

Each party deposits its share views.  The last to arrive reconstructs the
inputs, evaluates the function in the clear and hands every party a fresh
resharing of the result.  The caller charges the real protocol's
communication on every party's meter, so the dealer only affects running
time and never the reported cost.
"""

from __future__ import annotations

import threading

import numpy as np

from rankjoin.runtime.transport import SessionAborted
from rankjoin.sharing import reconstruct_array


class Dealer:
    def __init__(self, seed: int = 0):
        self._cond = threading.Condition()
        self._deposits = {}
        self._results = {}
        self._rng = np.random.default_rng(seed)
        self._aborted = False

    def abort(self):
        with self._cond:
            self._aborted = True
            self._cond.notify_all()

    def call(self, session, views, compute, timeout: float | None = None):
        """``views`` is a list of ``(first, second)`` arrays; ``compute`` maps
        the reconstructed arrays to a list of output arrays."""
        session.dealer_calls += 1
        key = session.dealer_calls
        timeout = timeout or session.config.timeout
        with self._cond:
            slot = self._deposits.setdefault(key, {})
            slot[session.party] = views
            if len(slot) == 3:
                inputs = [
                    reconstruct_array(slot[0][i], 0, slot[1][i], 1) for i in range(len(views))
                ]
                outputs = compute(*inputs)
                self._results[key] = [self._reshare(np.asarray(o, dtype=np.uint64)) for o in outputs]
                del self._deposits[key]
                self._cond.notify_all()
            else:
                ok = self._cond.wait_for(lambda: key in self._results or self._aborted, timeout)
                if self._aborted or not ok:
                    raise SessionAborted("dealer call abandoned")
            shares = self._results[key]
            mine = [s[session.party] for s in shares]
            slot_done = self._results.setdefault(("done", key), set())
            slot_done.add(session.party)
            if len(slot_done) == 3:
                del self._results[key]
                del self._results[("done", key)]
        return mine

    def _reshare(self, value):
        w0 = self._rng.integers(0, 1 << 64, size=value.shape, dtype=np.uint64, endpoint=False)
        w1 = self._rng.integers(0, 1 << 64, size=value.shape, dtype=np.uint64, endpoint=False)
        words = (w0, w1, value ^ w0 ^ w1)
        return [(words[p], words[(p + 1) % 3]) for p in range(3)]
