"""Named client channels over local stream sockets.

The four channel names (C_PIPE, S_PIPE, C_PIPE_INFO, S_PIPE_INFO) are
realized as Unix stream sockets in a rendezvous directory, all created
by the server before any client connects.  Clients write newline-
terminated command lines to a C_* socket and read replies from the
matching S_* socket; the n-th connection accepted on a C_* socket is
paired with the n-th on its S_* partner.
"""

from __future__ import annotations

import os
import socket
import threading

CMD_CHANNELS = ("C_PIPE", "S_PIPE")
INFO_CHANNELS = ("C_PIPE_INFO", "S_PIPE_INFO")
CHANNEL_NAMES = CMD_CHANNELS + INFO_CHANNELS


class ClientSession:
    """One connected client on a command/reply channel pair."""

    def __init__(self, owner, group, index):
        self._owner = owner
        self.group = group       # "cmd" or "info"
        self.index = index

    def reply(self, text):
        self._owner._send(self.group, self.index, text)


class ChannelSet:
    def __init__(self, directory, on_line):
        """``on_line(line, session)`` is called for every received line."""
        self.directory = directory
        self.on_line = on_line
        self._cond = threading.Condition()
        self._replies = {"cmd": [], "info": []}
        self._counts = {"cmd": 0, "info": 0}
        self._listeners = []
        self._threads = []
        self._running = True
        os.makedirs(directory, exist_ok=True)
        self._listen("C_PIPE", self._accept_command, "cmd")
        self._listen("S_PIPE", self._accept_reply, "cmd")
        self._listen("C_PIPE_INFO", self._accept_command, "info")
        self._listen("S_PIPE_INFO", self._accept_reply, "info")

    def path(self, name):
        return os.path.join(self.directory, name)

    def _listen(self, name, handler, group):
        path = self.path(name)
        if os.path.exists(path):
            os.unlink(path)
        sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        sock.bind(path)
        sock.listen(8)
        self._listeners.append(sock)

        def loop():
            while self._running:
                try:
                    conn, _ = sock.accept()
                except OSError:
                    return
                handler(conn, group)

        t = threading.Thread(target=loop, name=f"chan-{name}", daemon=True)
        t.start()
        self._threads.append(t)

    def _accept_reply(self, conn, group):
        with self._cond:
            self._replies[group].append(conn)
            self._cond.notify_all()

    def _accept_command(self, conn, group):
        with self._cond:
            index = self._counts[group]
            self._counts[group] += 1
        session = ClientSession(self, group, index)
        t = threading.Thread(target=self._read_lines, args=(conn, session),
                             name=f"chan-{group}-{index}", daemon=True)
        t.start()
        self._threads.append(t)

    def _read_lines(self, conn, session):
        try:
            with conn, conn.makefile("r", encoding="utf-8", errors="replace") as f:
                for raw in f:
                    line = raw.rstrip("\n")
                    if line:
                        self.on_line(line, session)
        except OSError:
            pass     # peer vanished: session ends, server carries on

    def _reply_conn(self, group, index, timeout=5.0):
        with self._cond:
            ok = self._cond.wait_for(
                lambda: len(self._replies[group]) > index, timeout=timeout)
            if not ok:
                raise TimeoutError(f"no {group} reply connection #{index}")
            return self._replies[group][index]

    def _send(self, group, index, text):
        conn = self._reply_conn(group, index)
        try:
            conn.sendall(text.encode("utf-8") + b"\n")
        except OSError:
            pass

    def broadcast(self, text):
        """Asynchronous event line to every command-channel client."""
        with self._cond:
            conns = list(self._replies["cmd"])
        data = text.encode("utf-8") + b"\n"
        for conn in conns:
            try:
                conn.sendall(data)
            except OSError:
                pass

    def close(self):
        self._running = False
        for sock in self._listeners:
            try:
                sock.close()
            except OSError:
                pass
        for group in self._replies:
            for conn in self._replies[group]:
                try:
                    conn.close()
                except OSError:
                    pass
        for name in CHANNEL_NAMES:
            try:
                os.unlink(self.path(name))
            except OSError:
                pass
