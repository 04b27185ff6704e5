"""Host-side companion: issue async commands over a transport session.

A single reader owns the session's receive queue; non-reply messages
(video data, service requests) seen while waiting for a reply are handed
to the ``on_message`` callback so nothing is lost.
"""

from __future__ import annotations

import threading

from ..config import ConfigMap, format_config
from ..errors import ControllerError
from ..transport import Message
from . import commands as C


class ControllerLink:
    def __init__(self, transport, on_message=None):
        self.transport = transport
        self.on_message = on_message
        self._lock = threading.Lock()
        self.commands_sent = 0

    def poll(self, timeout=0.05):
        """Read one non-reply message (video/service), dispatching nothing."""
        with self._lock:
            return self.transport.read_msg(timeout=timeout)

    def command(self, cmd: C.AsyncCommand, timeout=10.0) -> C.ControllerReply:
        with self._lock:
            self.transport.write_msg(Message("command", cmd.encode()))
            self.commands_sent += 1
            while True:
                msg = self.transport.read_msg(timeout=timeout)
                if msg is None:
                    raise ControllerError(f"no reply to {C.CMD_NAMES.get(cmd.kind, cmd.kind)}")
                if msg.kind == "reply":
                    return C.ControllerReply.decode(msg.body)
                if self.on_message is not None:
                    self.on_message(msg)

    # convenience wrappers -------------------------------------------------

    def require_ok(self, cmd, timeout=10.0):
        reply = self.command(cmd, timeout)
        if not reply.ok:
            raise ControllerError(
                f"{C.CMD_NAMES.get(cmd.kind, cmd.kind)}: {reply.status_name} "
                f"{reply.payload.decode(errors='replace')}")
        return reply

    def power_on(self):
        return self.require_ok(C.AsyncCommand(C.CMD_POWER_ON))

    def status_poll(self) -> ConfigMap:
        reply = self.require_ok(C.AsyncCommand(C.CMD_STATUS_POLL))
        return ConfigMap.from_text(reply.payload.decode(), "controller-status")

    def write_params(self, params, seed):
        kv = params.to_kv()
        kv["seed"] = seed
        return self.require_ok(
            C.AsyncCommand.array_write(C.PARAMS_SLOT, format_config(kv).encode()))

    def write_program(self, slot, instructions):
        return self.require_ok(
            C.AsyncCommand.array_write(slot, C.encode_program(instructions)))

    def set_levels(self, values) -> C.ControllerReply:
        text = format_config({k: v for k, v in values.items()})
        return self.command(C.AsyncCommand.array_write(C.TELEMETRY_SLOT, text.encode()))

    def read_telemetry(self) -> ConfigMap:
        reply = self.require_ok(C.AsyncCommand.array_read(C.TELEMETRY_SLOT))
        return ConfigMap.from_text(reply.payload.decode(), "controller-telemetry")
