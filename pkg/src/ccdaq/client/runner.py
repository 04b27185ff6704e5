"""Script executor and the channel connection it drives."""

from __future__ import annotations

import os
import socket
import time

from ..errors import CcdaqError, ConnectionLostError
from .script import Command, Let, Print, Repeat, Value, Wait, parse_value, substitute

# process exit statuses
EXIT_OK = 0
EXIT_COMMAND = 1
EXIT_PARSE = 2
EXIT_CONNECTION = 3


class ServerConnection:
    """Command/reply channel pair of a running server."""

    def __init__(self, channel_dir, info=False, timeout=60.0):
        cmd_name, reply_name = ("C_PIPE_INFO", "S_PIPE_INFO") if info \
            else ("C_PIPE", "S_PIPE")
        try:
            self._cmd = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
            self._cmd.connect(os.path.join(channel_dir, cmd_name))
            self._reply_sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
            self._reply_sock.connect(os.path.join(channel_dir, reply_name))
        except OSError as e:
            raise ConnectionLostError(f"cannot reach server channels in "
                                      f"{channel_dir}: {e}") from None
        self._reply_sock.settimeout(timeout)
        self._reply = self._reply_sock.makefile("r", encoding="utf-8")
        self._events = []

    def send(self, line: str) -> str:
        try:
            self._cmd.sendall(line.encode("utf-8") + b"\n")
        except OSError as e:
            raise ConnectionLostError(str(e)) from None
        while True:
            reply = self._read_line()
            if reply.startswith("EVENT"):
                self._events.append(reply)
                continue
            return reply

    def _read_line(self):
        try:
            line = self._reply.readline()
        except OSError as e:
            raise ConnectionLostError(str(e)) from None
        if not line:
            raise ConnectionLostError("server closed the reply channel")
        return line.rstrip("\n")

    def wait_event(self, name: str, timeout=300.0) -> str:
        deadline = time.monotonic() + timeout
        for ev in self._events:
            if name in ev:
                self._events.remove(ev)
                return ev
        while time.monotonic() < deadline:
            line = self._read_line()
            if line.startswith("EVENT"):
                if name in line:
                    return line
                self._events.append(line)
        raise ConnectionLostError(f"timed out waiting for event {name!r}")

    def close(self):
        for s in (self._cmd, self._reply_sock):
            try:
                s.close()
            except OSError:
                pass


class Transcript:
    """Verbatim record of commands, replies and script output."""

    def __init__(self, echo=None):
        self.lines = []
        self.echo = echo

    def add(self, line):
        self.lines.append(line)
        if self.echo is not None:
            print(line, file=self.echo, flush=True)

    def text(self):
        return "\n".join(self.lines) + ("\n" if self.lines else "")


class ScriptRunner:
    """Sequential executor; ``wait`` is the only blocking point."""

    def __init__(self, connection: ServerConnection, transcript: Transcript = None):
        self.connection = connection
        self.transcript = transcript if transcript is not None else Transcript()
        self.variables = {}

    def run(self, script) -> int:
        try:
            return self._run_block(script.statements)
        except ConnectionLostError as e:
            self.transcript.add(f"!! connection lost: {e}")
            return EXIT_CONNECTION

    def _run_block(self, statements) -> int:
        for s in statements:
            status = self.run_statement(s)
            if status != EXIT_OK:
                return status
        return EXIT_OK

    def run_statement(self, s) -> int:
        if isinstance(s, Let):
            rendered = substitute(str(s.value), self.variables)
            self.variables[s.name] = parse_value(rendered)
            return EXIT_OK
        if isinstance(s, Print):
            self.transcript.add(substitute(s.expr, self.variables))
            return EXIT_OK
        if isinstance(s, Wait):
            if isinstance(s.target, Value):
                time.sleep(s.target.value)
            else:
                try:
                    ev = self.connection.wait_event(s.target)
                except ConnectionLostError:
                    raise
                self.transcript.add(ev)
            return EXIT_OK
        if isinstance(s, Repeat):
            for _ in range(s.count):
                status = self._run_block(s.body)
                if status != EXIT_OK:
                    return status
            return EXIT_OK
        if isinstance(s, Command):
            return self._run_command(s)
        raise CcdaqError(f"unknown statement {s!r}")

    def _run_command(self, s: Command) -> int:
        line = substitute(s.text, self.variables)
        self.transcript.add(f"> {line}")
        reply = self.connection.send(line)
        self.transcript.add(reply)
        if reply.startswith("ERR") and s.fatal:
            return EXIT_COMMAND
        return EXIT_OK
