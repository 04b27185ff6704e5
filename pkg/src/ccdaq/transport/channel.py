"""Datagram endpoints: UDP sockets and a deterministic lossy test channel."""

from __future__ import annotations

import queue
import socket
import threading

import numpy as np


class UdpEndpoint:
    """Single-peer UDP datagram endpoint.

    Passive endpoints (``peer=None``) learn the peer address from the first
    datagram received.
    """

    def __init__(self, bind=("127.0.0.1", 0), peer=None, rcvbuf=1 << 23):
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, rcvbuf)
        self.sock.bind(bind)
        self.peer = peer
        self._closed = False

    @property
    def local_addr(self):
        return self.sock.getsockname()

    def send(self, data):
        if self.peer is None:
            raise OSError("no peer address yet")
        self.sock.sendto(data, self.peer)

    def recv(self, timeout):
        self.sock.settimeout(timeout)
        try:
            data, addr = self.sock.recvfrom(2048)
        except (socket.timeout, OSError):
            return None
        if self.peer is None:
            self.peer = addr
        return data

    def close(self):
        if not self._closed:
            self._closed = True
            self.sock.close()


class _LossyEnd:
    """One side of an in-process channel; impairments apply to what it receives.

    A packet may be overtaken by up to ``reorder_depth`` later packets; held
    packets are flushed by wall time (20 ms) so reordering never starves a
    quiet link.
    """

    _HOLD_TIME = 0.02

    def __init__(self, rng, drop, reorder_depth, dup):
        self._rng = rng
        self._drop = drop
        self._depth = reorder_depth
        self._dup = dup
        self._inbox = queue.Queue()
        self._hold = []              # (release_seq, wall_deadline, data)
        self._seq = 0
        self._lock = threading.Lock()
        self.peer_end = None
        self._closed = False

    def _ingest(self, data):
        import time
        with self._lock:
            self._seq += 1
            if self._rng.random() < self._drop:
                return
            copies = 2 if (self._dup and self._rng.random() < self._dup) else 1
            for _ in range(copies):
                d = int(self._rng.integers(0, self._depth + 1)) if self._depth else 0
                self._hold.append((self._seq + d, time.monotonic() + self._HOLD_TIME,
                                   bytes(data)))
            self._release(time.monotonic())

    def _release(self, now):
        due = [h for h in self._hold if h[0] <= self._seq or h[1] <= now]
        if due:
            self._hold = [h for h in self._hold if not (h[0] <= self._seq or h[1] <= now)]
            for h in sorted(due):
                self._inbox.put(h[2])

    def send(self, data):
        peer = self.peer_end
        if peer is None or peer._closed:
            return
        peer._ingest(data)

    def recv(self, timeout):
        import time
        deadline = time.monotonic() + timeout
        while True:
            with self._lock:
                self._release(time.monotonic())
                # a packet with nothing behind it cannot be overtaken: once
                # the inbox drains, deliver the oldest held packet at once
                if self._inbox.empty() and self._hold:
                    self._hold.sort()
                    self._inbox.put(self._hold.pop(0)[2])
            left = deadline - time.monotonic()
            # short poll so a packet parked in the reorder hold is picked up
            # promptly once the inbox drains
            try:
                return self._inbox.get(timeout=max(0.0, min(left, 0.001)))
            except queue.Empty:
                if left <= 0:
                    return None

    def close(self):
        self._closed = True


class LossyChannel:
    """Deterministic in-process datagram channel with loss/reorder injection."""

    @staticmethod
    def pair(seed=0, drop=0.0, reorder_depth=0, dup=0.0):
        rng_a = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
        rng_b = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
        a = _LossyEnd(rng_a, drop, reorder_depth, dup)
        b = _LossyEnd(rng_b, drop, reorder_depth, dup)
        a.peer_end = b
        b.peer_end = a
        return a, b
