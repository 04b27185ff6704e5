"""Asynchronous command / reply / instruction codecs.

Async commands ride in ``command`` messages: one code byte plus a
kind-specific payload.  Replies mirror the code and add a status byte.
Synchronous programs are arrays of fixed 8-byte instructions (1 opcode
byte + 7 argument bytes), stored controller-side via ArrayWrite.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

# async command codes
CMD_STATUS_POLL = 1
CMD_POWER_ON = 2
CMD_POWER_OFF = 3
CMD_RESET = 4
CMD_ARRAY_WRITE = 5
CMD_ARRAY_READ = 6
CMD_START_PROCESS = 7
CMD_STOP_PROCESS = 8
CMD_SYNC_CLOCK = 9
CMD_EXT_DEVICE = 10

CMD_NAMES = {
    CMD_STATUS_POLL: "StatusPoll",
    CMD_POWER_ON: "PowerOn",
    CMD_POWER_OFF: "PowerOff",
    CMD_RESET: "Reset",
    CMD_ARRAY_WRITE: "ArrayWrite",
    CMD_ARRAY_READ: "ArrayRead",
    CMD_START_PROCESS: "StartProcess",
    CMD_STOP_PROCESS: "StopProcess",
    CMD_SYNC_CLOCK: "SyncClock",
    CMD_EXT_DEVICE: "ExtDevice",
}

# reply status codes
ST_OK = 0
ST_BUSY = 1
ST_NO_PROGRAM = 2
ST_POWERED_OFF = 3
ST_BAD_REGISTER = 4
ST_BAD_ARRAY = 5
ST_FAULT = 6
ST_BAD_INSTRUCTION = 7

STATUS_NAMES = {
    ST_OK: "ok",
    ST_BUSY: "busy",
    ST_NO_PROGRAM: "no-program",
    ST_POWERED_OFF: "powered-off",
    ST_BAD_REGISTER: "bad-register",
    ST_BAD_ARRAY: "bad-array",
    ST_FAULT: "fault",
    ST_BAD_INSTRUCTION: "bad-instruction",
}

N_ARRAY_SLOTS = 16
PARAMS_SLOT = 0        # exposure parameters (key-value text)
TELEMETRY_SLOT = 14    # register writes (key-value text) / telemetry readback
RESCUE_SLOT = 15       # reserved by the server for readout-only programs


@dataclass(frozen=True)
class AsyncCommand:
    kind: int
    payload: bytes = b""

    def encode(self) -> bytes:
        return bytes([self.kind]) + self.payload

    @classmethod
    def decode(cls, data: bytes):
        if not data:
            raise ValueError("empty command")
        return cls(data[0], bytes(data[1:]))

    # constructors for payload-carrying kinds
    @classmethod
    def array_write(cls, array_id, data):
        return cls(CMD_ARRAY_WRITE, bytes([array_id]) + bytes(data))

    @classmethod
    def array_read(cls, array_id):
        return cls(CMD_ARRAY_READ, bytes([array_id]))

    @classmethod
    def start_process(cls, pid):
        return cls(CMD_START_PROCESS, bytes([pid]))

    @classmethod
    def stop_process(cls, pid=0):
        return cls(CMD_STOP_PROCESS, bytes([pid]))

    @classmethod
    def sync_clock(cls, host_time):
        return cls(CMD_SYNC_CLOCK, struct.pack(">d", host_time))

    @classmethod
    def ext_device(cls, device_id, action):
        return cls(CMD_EXT_DEVICE, bytes([device_id]) + action.encode())


@dataclass(frozen=True)
class ControllerReply:
    in_reply_to: int
    status: int
    payload: bytes = b""

    @property
    def ok(self):
        return self.status == ST_OK

    @property
    def status_name(self):
        return STATUS_NAMES.get(self.status, f"status-{self.status}")

    def encode(self) -> bytes:
        return bytes([self.in_reply_to, self.status]) + self.payload

    @classmethod
    def decode(cls, data: bytes):
        if len(data) < 2:
            raise ValueError("short reply")
        return cls(data[0], data[1], bytes(data[2:]))


# sync instruction opcodes
OP_INTEGRATE = 1
OP_TRANSFER = 2
OP_READOUT = 3
OP_EXT_DEVICE = 4
OP_SEQ = 5

READOUT_FULL = 0
READOUT_SCAN = 1

INSTRUCTION_SIZE = 8


@dataclass(frozen=True)
class SyncInstruction:
    opcode: int
    args: tuple = ()

    def encode(self) -> bytes:
        raw = bytearray(INSTRUCTION_SIZE)
        raw[0] = self.opcode
        if self.opcode == OP_INTEGRATE:
            struct.pack_into(">I", raw, 1, self.args[0])          # ticks
        elif self.opcode == OP_TRANSFER:
            struct.pack_into(">H", raw, 1, self.args[0])          # rows
        elif self.opcode == OP_READOUT:
            raw[1] = self.args[0]                                 # mode
        elif self.opcode == OP_EXT_DEVICE:
            raw[1], raw[2] = self.args[0], self.args[1]           # device, action
        elif self.opcode == OP_SEQ:
            struct.pack_into(">HH", raw, 1, self.args[0], self.args[1])  # target, count
        else:
            raise ValueError(f"unknown opcode {self.opcode}")
        return bytes(raw)

    @classmethod
    def decode(cls, raw: bytes):
        op = raw[0]
        if op == OP_INTEGRATE:
            return cls(op, (struct.unpack_from(">I", raw, 1)[0],))
        if op == OP_TRANSFER:
            return cls(op, (struct.unpack_from(">H", raw, 1)[0],))
        if op == OP_READOUT:
            return cls(op, (raw[1],))
        if op == OP_EXT_DEVICE:
            return cls(op, (raw[1], raw[2]))
        if op == OP_SEQ:
            return cls(op, struct.unpack_from(">HH", raw, 1))
        raise ValueError(f"unknown opcode {op}")


def integrate(ticks):
    return SyncInstruction(OP_INTEGRATE, (ticks,))


def transfer(rows):
    return SyncInstruction(OP_TRANSFER, (rows,))


def readout(mode=READOUT_FULL):
    return SyncInstruction(OP_READOUT, (mode,))


def ext_device_ctl(device, action):
    return SyncInstruction(OP_EXT_DEVICE, (device, action))


def seq_loop(target, count):
    return SyncInstruction(OP_SEQ, (target, count))


def encode_program(instructions) -> bytes:
    return b"".join(i.encode() for i in instructions)


def decode_program(data: bytes):
    if len(data) % INSTRUCTION_SIZE:
        raise ValueError("program length not a multiple of the instruction size")
    return [SyncInstruction.decode(data[i:i + INSTRUCTION_SIZE])
            for i in range(0, len(data), INSTRUCTION_SIZE)]


def validate_program(instructions):
    """Reject malformed programs at load: loop targets must stay inside."""
    n = len(instructions)
    if n == 0:
        raise ValueError("empty program")
    for idx, ins in enumerate(instructions):
        if ins.opcode == OP_SEQ:
            target, count = ins.args
            if target >= n:
                raise ValueError(f"instruction {idx}: loop target {target} outside program")
            if count < 1:
                raise ValueError(f"instruction {idx}: loop count must be >= 1")


# -- video data chunks -----------------------------------------------------

VIDEO_CHUNK_BYTES = 32768
_VIDEO_HEADER = struct.Struct(">HIIIHH")   # frame_id, chunk, byte_offset, total, w, h
VIDEO_HEADER_SIZE = _VIDEO_HEADER.size


@dataclass(frozen=True)
class VideoChunk:
    frame_id: int
    chunk_index: int
    byte_offset: int
    total_bytes: int
    width: int
    height: int
    data: bytes

    def encode(self) -> bytes:
        return _VIDEO_HEADER.pack(self.frame_id, self.chunk_index, self.byte_offset,
                                  self.total_bytes, self.width, self.height) + self.data

    @classmethod
    def decode(cls, body: bytes):
        fid, ci, off, total, w, h = _VIDEO_HEADER.unpack_from(body)
        return cls(fid, ci, off, total, w, h, bytes(body[VIDEO_HEADER_SIZE:]))
