"""UI gateway: WebSocket records, command routing, static assets."""

import base64
import json
import os
import socket
import struct
import time

import numpy as np
import pytest

from ccdaq.detector import kernels
from ccdaq.server import read_fits
from ccdaq.server.gateway import (
    OP_TEXT,
    UiGateway,
    encode_ws_frame,
    read_ws_frame,
    ws_accept_key,
)

from test_server import Stack


class WsTestClient:
    def __init__(self, port, origin=None, path="/ws"):
        self.sock = socket.create_connection(("127.0.0.1", port), timeout=10)
        key = base64.b64encode(os.urandom(16)).decode()
        headers = [
            f"GET {path} HTTP/1.1",
            f"Host: 127.0.0.1:{port}",
            "Upgrade: websocket",
            "Connection: Upgrade",
            f"Sec-WebSocket-Key: {key}",
            "Sec-WebSocket-Version: 13",
        ]
        if origin:
            headers.append(f"Origin: {origin}")
        self.sock.sendall(("\r\n".join(headers) + "\r\n\r\n").encode())
        self.rfile = self.sock.makefile("rb")
        status_line = self.rfile.readline().decode()
        self.status = int(status_line.split()[1])
        accept = None
        while True:
            line = self.rfile.readline().decode().strip()
            if not line:
                break
            k, _, v = line.partition(":")
            if k.lower() == "sec-websocket-accept":
                accept = v.strip()
        if self.status == 101:
            assert accept == ws_accept_key(key)

    def send_json(self, obj):
        payload = json.dumps(obj).encode()
        mask = os.urandom(4)
        masked = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
        n = len(masked)
        if n < 126:
            head = bytes([0x80 | OP_TEXT, 0x80 | n])
        else:
            head = bytes([0x80 | OP_TEXT, 0x80 | 126]) + struct.pack(">H", n)
        self.sock.sendall(head + mask + masked)

    def send_raw_text(self, text):
        self.send_json_bytes(text.encode())

    def send_json_bytes(self, payload):
        mask = os.urandom(4)
        masked = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
        head = bytes([0x80 | OP_TEXT, 0x80 | len(masked)])
        self.sock.sendall(head + mask + masked)

    def recv_record(self):
        frame = read_ws_frame(self.rfile)
        assert frame is not None, "gateway closed the connection"
        opcode, data = frame
        assert opcode == OP_TEXT
        return json.loads(data.decode())

    def wait_record(self, rtype, timeout=10, where=None):
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            rec = self.recv_record()
            if rec["type"] == rtype and (where is None or where(rec)):
                return rec
        raise TimeoutError(f"no {rtype} record")

    def close(self):
        try:
            self.sock.sendall(encode_ws_frame(b"", 0x8))
        except OSError:
            pass
        self.sock.close()


@pytest.fixture
def gw_stack(tmp_path):
    s = Stack(tmp_path)
    gw = UiGateway(s.server, port=0, telemetry=False)
    yield s, gw
    gw.close()
    s.close()


def test_codec_roundtrip():
    for n in (0, 5, 200, 70000):
        payload = os.urandom(n)
        import io
        frame = encode_ws_frame(payload)
        op, out = read_ws_frame(io.BytesIO(frame))
        assert op == OP_TEXT and out == payload


def test_handshake_and_first_status(gw_stack):
    _, gw = gw_stack
    c = WsTestClient(gw.port)
    assert c.status == 101
    rec = c.recv_record()
    assert rec["type"] == "status"
    assert rec["payload"]["state"] == "Standby"
    assert rec["seq"] >= 1
    c.close()


def test_status_rate(gw_stack):
    _, gw = gw_stack
    c = WsTestClient(gw.port)
    n = 0
    t0 = time.monotonic()
    while time.monotonic() - t0 < 1.1:
        rec = c.recv_record()
        if rec["type"] == "status":
            n += 1
    assert n >= 3     # 250 ms period with jitter allowance
    c.close()


def test_seq_strictly_increasing(gw_stack):
    _, gw = gw_stack
    c = WsTestClient(gw.port)
    seqs = [c.recv_record()["seq"] for _ in range(6)]
    assert all(b > a for a, b in zip(seqs, seqs[1:]))
    c.close()


def test_command_path_and_state_event(gw_stack):
    s, gw = gw_stack
    c = WsTestClient(gw.port)
    c.send_json({"type": "command", "verb": "setup",
                 "args": {"exposure_type": "bias", "seed": "31"}})
    c.wait_record("event", where=lambda r: r["payload"].get("reply", "")
                  .startswith("OK setup"))
    c.send_json({"type": "command", "verb": "observe", "args": {}})
    ev = c.wait_record("event",
                       where=lambda r: r["payload"].get("state") == "Exposing")
    assert ev["payload"]["state"] == "Exposing"
    c.wait_record("event",
                  where=lambda r: r["payload"].get("readout_complete"))
    c.close()


def test_preview_matches_downsampled_fits(gw_stack):
    s, gw = gw_stack
    c = WsTestClient(gw.port)
    c.send_json({"type": "command", "verb": "setup",
                 "args": {"exposure_type": "bias", "seed": "77"}})
    c.send_json({"type": "command", "verb": "observe", "args": {}})
    rec = c.wait_record("preview")
    samples, _ = read_fits(s.files()[0])
    tile = kernels.downsample(samples, 8)
    assert rec["payload"]["factor"] == 8
    assert np.array_equal(np.asarray(rec["payload"]["data"]), tile)
    c.close()


def test_malformed_json_keeps_connection(gw_stack):
    _, gw = gw_stack
    c = WsTestClient(gw.port)
    c.recv_record()
    c.send_raw_text("{not json")
    rec = c.wait_record("event",
                        where=lambda r: r["payload"].get("error") == "parse")
    assert rec["payload"]["error"] == "parse"
    # still alive: a valid command round-trips
    c.send_json({"type": "command", "verb": "status", "args": {}})
    c.wait_record("event", where=lambda r: "reply" in r["payload"])
    c.close()


def test_origin_allow_list(gw_stack):
    _, gw = gw_stack
    refused = WsTestClient(gw.port, origin="http://evil.example")
    assert refused.status == 403
    allowed = WsTestClient(gw.port, origin="http://localhost:5173")
    assert allowed.status == 101
    allowed.close()


def test_static_files(tmp_path):
    s = Stack(tmp_path / "stack")
    static = tmp_path / "static"
    static.mkdir()
    (static / "index.html").write_text("<html>console</html>")
    gw = UiGateway(s.server, port=0, static_dir=str(static), telemetry=False)
    try:
        import urllib.request
        base = f"http://127.0.0.1:{gw.port}"
        with urllib.request.urlopen(base + "/") as r:
            assert r.status == 200
            assert b"console" in r.read()
        with pytest.raises(urllib.error.HTTPError) as e:
            urllib.request.urlopen(base + "/missing.js")
        assert e.value.code == 404
    finally:
        gw.close()
        s.close()


def test_telemetry_records(tmp_path):
    s = Stack(tmp_path)
    gw = UiGateway(s.server, port=0, telemetry=True)
    try:
        s.client.send("setup exposure_type=bias")
        c = WsTestClient(gw.port)
        rec = c.wait_record("telemetry")
        assert "ccd-temp" in rec["payload"]
        c.close()
    finally:
        gw.close()
        s.close()
