"""Browser gateway: WebSocket records plus static asset HTTP.

One HTTP port serves both the operator console's static files and a
``/ws`` endpoint speaking RFC 6455 directly (no external dependency).
Records are JSON objects {type, seq, payload} with type one of status /
telemetry / preview / event; the client sends {type: "command", verb,
args}, which is routed through the same verb path as channel clients.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import struct
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import urlsplit

from ..errors import CcdaqError
from ..detector import kernels

log = logging.getLogger("ccdaq.gateway")

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_TEXT = 0x1
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


def ws_accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + _WS_GUID).encode()).digest()
    return base64.b64encode(digest).decode()


def encode_ws_frame(payload: bytes, opcode=OP_TEXT) -> bytes:
    head = bytes([0x80 | opcode])
    n = len(payload)
    if n < 126:
        head += bytes([n])
    elif n < 65536:
        head += bytes([126]) + struct.pack(">H", n)
    else:
        head += bytes([127]) + struct.pack(">Q", n)
    return head + payload


def read_ws_frame(rfile):
    """Read one client frame; returns (opcode, payload) or None on EOF."""
    head = rfile.read(2)
    if len(head) < 2:
        return None
    opcode = head[0] & 0x0F
    masked = head[1] & 0x80
    n = head[1] & 0x7F
    if n == 126:
        n = struct.unpack(">H", rfile.read(2))[0]
    elif n == 127:
        n = struct.unpack(">Q", rfile.read(8))[0]
    mask = rfile.read(4) if masked else b"\0\0\0\0"
    data = rfile.read(n)
    if len(data) < n:
        return None
    if masked:
        data = bytes(b ^ mask[i % 4] for i, b in enumerate(data))
    return opcode, data


class _WsClient:
    def __init__(self, connection):
        self.connection = connection
        self.lock = threading.Lock()
        self.open = True

    def send_record(self, record: dict):
        data = json.dumps(record).encode()
        try:
            with self.lock:
                self.connection.sendall(encode_ws_frame(data))
        except OSError:
            self.open = False


class UiGateway:
    """Attach to a CcdServer and serve its records over one port."""

    def __init__(self, server, host="127.0.0.1", port=0, static_dir=None,
                 status_period=None, origins=None, telemetry=True):
        self.server = server
        self.static_dir = static_dir
        self.status_period = (status_period if status_period is not None
                              else server.config.status_period)
        self.origins = tuple(origins if origins is not None
                             else server.config.ui_origins)
        self.telemetry_enabled = telemetry
        self._seq = 0
        self._seq_lock = threading.Lock()
        self._clients = []
        self._clients_lock = threading.Lock()
        self._last_preview_file = None

        gateway = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt, *args):
                log.debug("http %s", fmt % args)

            def do_GET(self):
                if self.headers.get("Upgrade", "").lower() == "websocket":
                    gateway._handle_ws(self)
                else:
                    gateway._handle_static(self)

        self.httpd = ThreadingHTTPServer((host, port), Handler)
        self.httpd.daemon_threads = True
        self.port = self.httpd.server_address[1]
        self._running = True
        self._threads = [
            threading.Thread(target=self.httpd.serve_forever,
                             kwargs={"poll_interval": 0.1},
                             name="gateway-http", daemon=True),
            threading.Thread(target=self._status_loop, name="gateway-status",
                             daemon=True),
        ]
        server.listeners.append(self._on_server_event)
        for t in self._threads:
            t.start()

    def close(self):
        self._running = False
        try:
            self.server.listeners.remove(self._on_server_event)
        except ValueError:
            pass
        self.httpd.shutdown()
        self.httpd.server_close()
        with self._clients_lock:
            for c in self._clients:
                try:
                    c.connection.close()
                except OSError:
                    pass
            self._clients.clear()

    # -- record fan-out ----------------------------------------------------

    def _record(self, rtype, payload):
        with self._seq_lock:
            self._seq += 1
            return {"type": rtype, "seq": self._seq, "payload": payload}

    def broadcast(self, rtype, payload):
        record = self._record(rtype, payload)
        with self._clients_lock:
            clients = list(self._clients)
        for c in clients:
            c.send_record(record)
        self._prune()

    def _prune(self):
        with self._clients_lock:
            self._clients[:] = [c for c in self._clients if c.open]

    def _on_server_event(self, rtype, payload):
        self.broadcast(rtype, payload)

    def _status_loop(self):
        while self._running:
            time.sleep(self.status_period)
            if not self._running:
                return
            self.broadcast("status", self.server.progress())
            if self.telemetry_enabled and self.server.power_state == "on":
                try:
                    tel = self.server.link.read_telemetry()
                    self.broadcast("telemetry", dict(tel.values))
                except CcdaqError:
                    pass
            self._maybe_preview()

    def _maybe_preview(self):
        with self.server.lock:
            frame = self.server.last_frame
            path = self.server.last_file
        if frame is None or path == self._last_preview_file:
            return
        self._last_preview_file = path
        factor = self.server.config.preview_factor
        tile = kernels.downsample(frame.samples, factor)
        self.broadcast("preview", {
            "file": os.path.basename(path) if path else "",
            "width": int(tile.shape[1]),
            "height": int(tile.shape[0]),
            "factor": factor,
            "data": tile.tolist(),
        })

    # -- websocket endpoint ------------------------------------------------

    def _origin_allowed(self, origin):
        if origin is None:
            return True      # non-browser client
        host = urlsplit(origin).hostname
        return host in self.origins

    def _handle_ws(self, handler):
        if not self._origin_allowed(handler.headers.get("Origin")):
            handler.send_response(403)
            handler.send_header("Content-Length", "0")
            handler.end_headers()
            return
        key = handler.headers.get("Sec-WebSocket-Key")
        if not key:
            handler.send_response(400)
            handler.send_header("Content-Length", "0")
            handler.end_headers()
            return
        handler.send_response(101, "Switching Protocols")
        handler.send_header("Upgrade", "websocket")
        handler.send_header("Connection", "Upgrade")
        handler.send_header("Sec-WebSocket-Accept", ws_accept_key(key))
        handler.end_headers()
        handler.wfile.flush()

        client = _WsClient(handler.connection)
        with self._clients_lock:
            self._clients.append(client)
        client.send_record(self._record("status", self.server.progress()))
        try:
            while self._running and client.open:
                frame = read_ws_frame(handler.rfile)
                if frame is None:
                    break
                opcode, data = frame
                if opcode == OP_CLOSE:
                    with client.lock:
                        client.connection.sendall(
                            encode_ws_frame(data[:2], OP_CLOSE))
                    break
                if opcode == OP_PING:
                    with client.lock:
                        client.connection.sendall(encode_ws_frame(data, OP_PONG))
                    continue
                if opcode == OP_TEXT:
                    self._handle_client_text(client, data)
        except OSError:
            pass
        finally:
            client.open = False
            self._prune()
        # keep the HTTP handler from reusing the hijacked connection
        handler.close_connection = True

    def _handle_client_text(self, client, data):
        try:
            obj = json.loads(data.decode("utf-8"))
            if not isinstance(obj, dict):
                raise ValueError("record must be an object")
        except ValueError:
            client.send_record(self._record("event", {"error": "parse"}))
            return
        if obj.get("type") != "command":
            client.send_record(self._record(
                "event", {"error": "unknown-record", "got": obj.get("type")}))
            return

        def reply(text):
            client.send_record(self._record("event", {"reply": text}))

        self.server.handle_command(obj.get("verb", ""), obj.get("args") or {},
                                   reply)

    # -- static files ------------------------------------------------------

    _MIME = {".html": "text/html", ".js": "text/javascript",
             ".css": "text/css", ".json": "application/json",
             ".svg": "image/svg+xml", ".map": "application/json"}

    def _handle_static(self, handler):
        if self.static_dir is None:
            self._simple(handler, 404, b"no static assets configured\n")
            return
        path = urlsplit(handler.path).path
        if path in ("", "/"):
            path = "/index.html"
        full = os.path.realpath(os.path.join(self.static_dir, path.lstrip("/")))
        root = os.path.realpath(self.static_dir)
        if not full.startswith(root + os.sep) and full != root:
            self._simple(handler, 403, b"forbidden\n")
            return
        if not os.path.isfile(full):
            self._simple(handler, 404, b"not found\n")
            return
        with open(full, "rb") as f:
            body = f.read()
        ext = os.path.splitext(full)[1]
        handler.send_response(200)
        handler.send_header("Content-Type",
                            self._MIME.get(ext, "application/octet-stream"))
        handler.send_header("Content-Length", str(len(body)))
        handler.end_headers()
        handler.wfile.write(body)

    @staticmethod
    def _simple(handler, code, body):
        handler.send_response(code)
        handler.send_header("Content-Type", "text/plain")
        handler.send_header("Content-Length", str(len(body)))
        handler.end_headers()
        handler.wfile.write(body)
