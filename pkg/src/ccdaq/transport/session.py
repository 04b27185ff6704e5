"""Transport sessions: message fragmentation, reliability and reassembly.

Application messages are split into link frames (<= 1472-byte payloads).
Command / reply / service-request messages travel on the reliable class:
ack-gated sliding window with retransmission and in-order delivery.
Video-data messages are best-effort: fire-and-forget, delivered when fully
reassembled, with gaps reported through ``TransportStatus.messages_dropped``.
"""

from __future__ import annotations

import threading
import time
import queue as queue_mod
from dataclasses import dataclass, field

import numpy as np

from ..errors import (
    AlreadyConnectedError,
    NotConnectedError,
    PeerLostError,
    UnreachableError,
)
from .frame import (
    FLAG_ACK,
    FLAG_CONTROL,
    FLAG_RESET,
    FLAG_VIDEO,
    MAX_PAYLOAD,
    CrcError,
    Frame,
    FrameError,
    decode_frame,
    encode_frame,
)

KIND_CODES = {"command": 1, "reply": 2, "video-data": 3, "service-request": 4}
CODE_KINDS = {v: k for k, v in KIND_CODES.items()}

_CTRL_SYN = 1
_CTRL_SYNACK = 2
_CTRL_FIN = 3


@dataclass(frozen=True)
class Message:
    kind: str
    body: bytes

    def __post_init__(self):
        if self.kind not in KIND_CODES:
            raise ValueError(f"unknown message kind {self.kind!r}")

    @property
    def reliable(self):
        return self.kind != "video-data"


@dataclass
class SendReceipt:
    msg_seq: int
    n_frames: int
    reliable: bool


@dataclass
class TransportStatus:
    connected: bool = False
    frames_sent: int = 0
    frames_received: int = 0
    crc_errors: int = 0
    retransmits: int = 0
    messages_dropped: int = 0
    last_error: str = ""


@dataclass
class TransportConfig:
    window: int = 32
    retries: int = 5
    retransmit_timeout: float = 0.05
    t_reassembly: float = 2.0
    t_handshake: float = 0.5
    handshake_retries: int = 2
    # video is best-effort with no backpressure: pace it below the rate the
    # receive path can drain so a large frame does not overflow socket buffers
    video_rate: float = 30e6          # bytes/second; None disables pacing


class Transport:
    """One session over a datagram endpoint.

    One writer and one reader may operate concurrently; ``status()`` is safe
    from any thread.
    """

    def __init__(self, endpoint, config=None):
        self.endpoint = endpoint
        self.config = config or TransportConfig()
        self._lock = threading.Lock()
        self._ack_cond = threading.Condition(self._lock)
        self._send_lock = threading.Lock()
        self._st = TransportStatus()
        self.session = 0
        self._rel_seq_out = 0
        self._vid_seq_out = 0
        self._unacked = {}           # (msg_seq, frag) -> [bytes, retries, deadline]
        self._rel_partials = {}      # msg_seq -> [parts, remaining]
        self._rel_ready = {}
        self._rel_expected = 0
        self._vid_partials = {}      # msg_seq -> [parts, remaining, deadline]
        self._vid_expected = 0
        self._rx = queue_mod.Queue()
        self._thread = None
        self._running = False

    # -- session control ---------------------------------------------------

    def connect(self):
        """Two-way handshake (active side)."""
        if self._st.connected:
            raise AlreadyConnectedError("session already established")
        session = int(np.random.default_rng().integers(1, 0x10000))
        syn = encode_frame(Frame(session, 0, 0, 1, FLAG_RESET, bytes([_CTRL_SYN])))
        attempts = 1 + self.config.handshake_retries
        per_try = self.config.t_handshake / attempts
        for _ in range(attempts):
            self.endpoint.send(syn)
            self._st.frames_sent += 1
            deadline = time.monotonic() + per_try
            while True:
                left = deadline - time.monotonic()
                if left <= 0:
                    break
                data = self.endpoint.recv(left)
                if data is None:
                    continue
                try:
                    f = decode_frame(data)
                except FrameError:
                    continue
                if (f.flags & FLAG_RESET and f.payload[:1] == bytes([_CTRL_SYNACK])
                        and f.session == session):
                    self.session = session
                    self._st.connected = True
                    self._st.frames_received += 1
                    self._start_receiver()
                    return self.status()
        self._st.last_error = "unreachable"
        raise UnreachableError("no handshake reply")

    def accept(self, timeout=None):
        """Wait for a peer's handshake (passive side)."""
        if self._st.connected:
            raise AlreadyConnectedError("session already established")
        deadline = None if timeout is None else time.monotonic() + timeout
        while True:
            left = 0.2 if deadline is None else min(0.2, deadline - time.monotonic())
            if left <= 0:
                raise UnreachableError("no peer handshake")
            data = self.endpoint.recv(left)
            if data is None:
                continue
            try:
                f = decode_frame(data)
            except FrameError:
                continue
            if f.flags & FLAG_RESET and f.payload[:1] == bytes([_CTRL_SYN]):
                self.session = f.session
                self._send_raw(encode_frame(
                    Frame(f.session, 0, 0, 1, FLAG_RESET, bytes([_CTRL_SYNACK]))))
                self._st.connected = True
                self._start_receiver()
                return self.status()

    def disconnect(self):
        if not self.session:
            raise NotConnectedError("no session")
        fin = encode_frame(Frame(self.session, 0, 0, 1, FLAG_RESET, bytes([_CTRL_FIN])))
        for _ in range(2):
            self._send_raw(fin)
        self._stop_receiver()
        with self._lock:
            self._st.connected = False
        return self.status()

    def reset(self):
        """Zero counters and reassembly buffers; the session survives."""
        if not self.session:
            raise NotConnectedError("no session")
        with self._lock:
            connected = self._st.connected
            self._st = TransportStatus(connected=connected)
            self._rel_partials.clear()
            self._vid_partials.clear()
        return self.status()

    def close(self):
        self._stop_receiver()
        self.endpoint.close()

    def status(self):
        with self._lock:
            s = self._st
            return TransportStatus(s.connected, s.frames_sent, s.frames_received,
                                   s.crc_errors, s.retransmits, s.messages_dropped,
                                   s.last_error)

    # -- sending -----------------------------------------------------------

    def write_msg(self, msg: Message) -> SendReceipt:
        if not self._st.connected:
            raise NotConnectedError("transport not connected")
        blob = bytes([KIND_CODES[msg.kind]]) + msg.body
        nfrags = max(1, -(-len(blob) // MAX_PAYLOAD))
        if msg.reliable:
            return self._write_reliable(blob, nfrags)
        return self._write_video(blob, nfrags)

    def _write_video(self, blob, nfrags):
        with self._send_lock:
            seq = self._vid_seq_out
            self._vid_seq_out += 1
        rate = self.config.video_rate
        t0 = time.monotonic()
        sent = 0
        for i in range(nfrags):
            payload = blob[i * MAX_PAYLOAD:(i + 1) * MAX_PAYLOAD]
            self._send_raw(encode_frame(Frame(self.session, seq, i, nfrags,
                                              FLAG_VIDEO, payload)))
            sent += 1
            if rate and sent % 64 == 0:
                ahead = (sent * MAX_PAYLOAD) / rate - (time.monotonic() - t0)
                if ahead > 0:
                    time.sleep(ahead)
        with self._lock:
            self._st.frames_sent += sent
        return SendReceipt(seq, nfrags, reliable=False)

    def _write_reliable(self, blob, nfrags):
        cfg = self.config
        with self._send_lock:
            seq = self._rel_seq_out
            self._rel_seq_out += 1
            frames = [
                encode_frame(Frame(self.session, seq, i, nfrags, FLAG_CONTROL,
                                   blob[i * MAX_PAYLOAD:(i + 1) * MAX_PAYLOAD]))
                for i in range(nfrags)
            ]
            next_up = 0
            with self._ack_cond:
                while True:
                    now = time.monotonic()
                    in_flight = sum(1 for k in self._unacked if k[0] == seq)
                    while in_flight < cfg.window and next_up < nfrags:
                        self._unacked[(seq, next_up)] = [
                            frames[next_up], 0, now + cfg.retransmit_timeout]
                        self._send_raw(frames[next_up])
                        self._st.frames_sent += 1
                        next_up += 1
                        in_flight += 1
                    if next_up >= nfrags and in_flight == 0:
                        return SendReceipt(seq, nfrags, reliable=True)
                    # retransmit expired frames for this message
                    deadline = min(e[2] for k, e in self._unacked.items() if k[0] == seq)
                    if now >= deadline:
                        for key, entry in list(self._unacked.items()):
                            if key[0] != seq or now < entry[2]:
                                continue
                            if entry[1] >= cfg.retries:
                                self._unacked = {k: v for k, v in self._unacked.items()
                                                 if k[0] != seq}
                                self._st.connected = False
                                self._st.last_error = "peer-lost"
                                raise PeerLostError("reliable send exhausted retries")
                            entry[1] += 1
                            entry[2] = now + cfg.retransmit_timeout
                            self._send_raw(entry[0])
                            self._st.frames_sent += 1
                            self._st.retransmits += 1
                        continue
                    self._ack_cond.wait(timeout=deadline - now)

    def _send_raw(self, data):
        try:
            self.endpoint.send(data)
        except OSError:
            pass

    # -- receiving ---------------------------------------------------------

    def read_msg(self, timeout=None) -> Message | None:
        """Next fully reassembled message, or None on timeout."""
        try:
            return self._rx.get(timeout=timeout)
        except queue_mod.Empty:
            return None

    def _start_receiver(self):
        self._running = True
        self._thread = threading.Thread(target=self._receiver_loop, daemon=True,
                                        name="ccdaq-transport-rx")
        self._thread.start()

    def _stop_receiver(self):
        self._running = False
        t = self._thread
        if t is not None and t is not threading.current_thread():
            t.join(timeout=2.0)
        self._thread = None

    def _receiver_loop(self):
        next_sweep = time.monotonic() + 0.1
        while self._running:
            data = self.endpoint.recv(0.05)
            now = time.monotonic()
            if now >= next_sweep:
                self._sweep_video(now)
                next_sweep = now + 0.1
            if data is None:
                continue
            try:
                f = decode_frame(data)
            except CrcError:
                with self._lock:
                    self._st.crc_errors += 1
                continue
            except FrameError:
                continue
            if f.flags & FLAG_RESET:
                self._handle_ctrl(f)
                continue
            if f.session != self.session:
                continue
            with self._lock:
                self._st.frames_received += 1
            if f.flags & FLAG_ACK:
                self._handle_ack(f)
            elif f.flags & FLAG_CONTROL:
                self._handle_reliable(f)
            elif f.flags & FLAG_VIDEO:
                self._handle_video(f, now)

    def _handle_ctrl(self, f):
        op = f.payload[:1]
        if op == bytes([_CTRL_SYN]):
            # peer (re)connecting: adopt its session and confirm
            self.session = f.session
            self._send_raw(encode_frame(
                Frame(f.session, 0, 0, 1, FLAG_RESET, bytes([_CTRL_SYNACK]))))
        elif op == bytes([_CTRL_FIN]) and f.session == self.session:
            with self._lock:
                self._st.connected = False

    def _handle_ack(self, f):
        p = f.payload
        with self._ack_cond:
            for off in range(0, len(p) - 5, 6):
                seq = int.from_bytes(p[off:off + 4], "big")
                frag = int.from_bytes(p[off + 4:off + 6], "big")
                self._unacked.pop((seq, frag), None)
            self._ack_cond.notify_all()

    def _ack_back(self, msg_seq, frag_index):
        payload = msg_seq.to_bytes(4, "big") + frag_index.to_bytes(2, "big")
        self._send_raw(encode_frame(Frame(self.session, msg_seq, 0, 1, FLAG_ACK, payload)))
        with self._lock:
            self._st.frames_sent += 1

    def _handle_reliable(self, f):
        self._ack_back(f.msg_seq, f.frag_index)
        if f.msg_seq < self._rel_expected or f.msg_seq in self._rel_ready:
            return  # duplicate of an already delivered/complete message
        entry = self._rel_partials.get(f.msg_seq)
        if entry is None:
            entry = [[None] * f.frag_total, f.frag_total]
            self._rel_partials[f.msg_seq] = entry
        parts, remaining = entry
        if parts[f.frag_index] is None:
            parts[f.frag_index] = f.payload
            entry[1] = remaining - 1
            if entry[1] == 0:
                del self._rel_partials[f.msg_seq]
                self._rel_ready[f.msg_seq] = b"".join(parts)
                while self._rel_expected in self._rel_ready:
                    blob = self._rel_ready.pop(self._rel_expected)
                    self._rel_expected += 1
                    self._deliver(blob)

    def _handle_video(self, f, now):
        if f.msg_seq < self._vid_expected:
            return
        entry = self._vid_partials.get(f.msg_seq)
        if entry is None:
            entry = [[None] * f.frag_total, f.frag_total, now + self.config.t_reassembly]
            self._vid_partials[f.msg_seq] = entry
        parts, remaining, _ = entry
        if parts[f.frag_index] is None:
            parts[f.frag_index] = f.payload
            entry[1] = remaining - 1
            if entry[1] == 0:
                del self._vid_partials[f.msg_seq]
                with self._lock:
                    self._st.messages_dropped += max(0, f.msg_seq - self._vid_expected)
                self._vid_expected = f.msg_seq + 1
                self._deliver(b"".join(parts))

    def _sweep_video(self, now):
        for seq in [s for s, e in self._vid_partials.items() if now >= e[2]]:
            del self._vid_partials[seq]
            with self._lock:
                self._st.messages_dropped += 1
            if self._vid_expected <= seq:
                self._vid_expected = seq + 1

    def _deliver(self, blob):
        kind = CODE_KINDS.get(blob[0])
        if kind is None:
            return
        self._rx.put(Message(kind, blob[1:]))
