"""Message-driven controller emulator.

The controller is a peer on a transport session: asynchronous commands are
executed immediately (one reply each, in arrival order); synchronous
command programs are loaded in advance as instruction arrays and run on a
simulated tick clock, streaming video-data messages back to the host.
Program execution interleaves with command handling at instruction (and,
during readout, chunk) boundaries.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..config import ConfigMap, format_config, parse_config_text
from ..detector import ChargeImage, ExposureParams, digitize_readout, drift_scan, integrate_charge, step_seed
from ..errors import CcdaqError
from ..transport import Message
from . import commands as C
from .telemetry import ControllerConfig, Telemetry


@dataclass
class _Execution:
    program: list
    params: ExposureParams
    seed: int
    run_index: int
    pc: int = 0
    step: int = 0                  # rng-consuming instruction counter
    loops: dict = field(default_factory=dict)
    stop_requested: bool = False
    emitter: object = None         # active readout chunk generator
    frame_info: dict = field(default_factory=dict)


class ControllerSim:
    """One emulated controller bound to one transport session."""

    # chunks emitted per scheduling slice during readout; small enough that
    # a StopProcess lands mid-stream
    CHUNKS_PER_SLICE = 8

    def __init__(self, geom, scene, transport, config=None, lamp=None,
                 clock=time.monotonic):
        self.geom = geom
        self.scene = scene
        self.lamp = lamp
        self.transport = transport
        self.config = config or ControllerConfig()
        self.clock = clock
        self.telemetry = Telemetry(self.config, geom.output_nodes, clock)
        self.power_state = "off"
        self.arrays = {}
        self.commands_received = 0
        self.device_log = []
        self.clock_offset = 0.0
        self._charge = np.zeros((geom.rows, geom.cols))
        self._run_counter = 0
        self._frame_counter = 0
        self._exec = None
        self._running = False

    # -- main loop ---------------------------------------------------------

    def serve_forever(self, accept_timeout=None):
        """Accept a session and process commands until stop()."""
        self.transport.accept(timeout=accept_timeout)
        self._running = True
        while self._running:
            timeout = 0.0005 if self._exec is not None else 0.05
            msg = self.transport.read_msg(timeout=timeout)
            if msg is not None and msg.kind == "command":
                reply = self.handle_async(C.AsyncCommand.decode(msg.body))
                self.transport.write_msg(Message("reply", reply.encode()))
            if self._exec is not None:
                self._step_program()

    def stop(self):
        self._running = False

    # -- async commands ----------------------------------------------------

    def handle_async(self, cmd: C.AsyncCommand) -> C.ControllerReply:
        self.commands_received += 1
        kind = cmd.kind
        if self.power_state == "off" and kind not in (C.CMD_STATUS_POLL, C.CMD_POWER_ON):
            return C.ControllerReply(kind, C.ST_POWERED_OFF)
        if self.power_state == "fault" and kind not in (
                C.CMD_STATUS_POLL, C.CMD_RESET, C.CMD_POWER_OFF):
            return C.ControllerReply(kind, C.ST_FAULT)
        handler = {
            C.CMD_STATUS_POLL: self._cmd_status,
            C.CMD_POWER_ON: self._cmd_power_on,
            C.CMD_POWER_OFF: self._cmd_power_off,
            C.CMD_RESET: self._cmd_reset,
            C.CMD_ARRAY_WRITE: self._cmd_array_write,
            C.CMD_ARRAY_READ: self._cmd_array_read,
            C.CMD_START_PROCESS: self._cmd_start,
            C.CMD_STOP_PROCESS: self._cmd_stop,
            C.CMD_SYNC_CLOCK: self._cmd_sync_clock,
            C.CMD_EXT_DEVICE: self._cmd_ext_device,
        }.get(kind)
        if handler is None:
            return C.ControllerReply(kind, C.ST_BAD_INSTRUCTION)
        return handler(cmd)

    def _cmd_status(self, cmd):
        d = self.telemetry.to_kv(self.power_state)
        d["executing"] = "true" if self._exec is not None else "false"
        d["runs"] = self._run_counter
        d["clock_offset"] = f"{self.clock_offset:.6f}"
        return C.ControllerReply(cmd.kind, C.ST_OK, format_config(d).encode())

    def _cmd_power_on(self, cmd):
        if self.power_state == "fault":
            return C.ControllerReply(cmd.kind, C.ST_FAULT)
        self.power_state = "on"
        return C.ControllerReply(cmd.kind, C.ST_OK)

    def _cmd_power_off(self, cmd):
        self._abort_execution()
        self.power_state = "off"
        return C.ControllerReply(cmd.kind, C.ST_OK)

    def _cmd_reset(self, cmd):
        self._abort_execution()
        self.power_state = "on"
        self._charge[:] = 0.0
        self._run_counter = 0
        return C.ControllerReply(cmd.kind, C.ST_OK)

    def _cmd_array_write(self, cmd):
        if self._exec is not None:
            return C.ControllerReply(cmd.kind, C.ST_BUSY)
        if not cmd.payload:
            return C.ControllerReply(cmd.kind, C.ST_BAD_ARRAY)
        array_id = cmd.payload[0]
        if array_id >= C.N_ARRAY_SLOTS:
            return C.ControllerReply(cmd.kind, C.ST_BAD_ARRAY)
        data = cmd.payload[1:]
        if array_id == C.TELEMETRY_SLOT:
            try:
                self.telemetry.write(parse_config_text(data.decode()))
            except CcdaqError as e:
                return C.ControllerReply(cmd.kind, C.ST_BAD_REGISTER, str(e).encode())
            return C.ControllerReply(cmd.kind, C.ST_OK)
        self.arrays[array_id] = bytes(data)
        if array_id == C.PARAMS_SLOT:
            self._run_counter = 0
        return C.ControllerReply(cmd.kind, C.ST_OK)

    def _cmd_array_read(self, cmd):
        array_id = cmd.payload[0] if cmd.payload else 255
        if array_id == C.TELEMETRY_SLOT:
            payload = format_config(self.telemetry.to_kv(self.power_state)).encode()
            return C.ControllerReply(cmd.kind, C.ST_OK, payload)
        if array_id not in self.arrays:
            return C.ControllerReply(cmd.kind, C.ST_BAD_ARRAY)
        return C.ControllerReply(cmd.kind, C.ST_OK, self.arrays[array_id])

    def _cmd_start(self, cmd):
        if self._exec is not None:
            return C.ControllerReply(cmd.kind, C.ST_BUSY)
        pid = cmd.payload[0] if cmd.payload else 255
        if pid not in self.arrays:
            return C.ControllerReply(cmd.kind, C.ST_NO_PROGRAM)
        if C.PARAMS_SLOT not in self.arrays:
            return C.ControllerReply(cmd.kind, C.ST_BAD_ARRAY, b"no parameter array")
        try:
            program = C.decode_program(self.arrays[pid])
            C.validate_program(program)
            cfg = ConfigMap.from_text(self.arrays[C.PARAMS_SLOT].decode(), "params-array")
            params = ExposureParams.from_kv(cfg)
            params.validate(self.geom)
            seed = cfg.get_int("seed", 0)
        except (ValueError, CcdaqError) as e:
            return C.ControllerReply(cmd.kind, C.ST_BAD_INSTRUCTION, str(e).encode())
        run = self._run_counter
        self._run_counter += 1
        if params.flush_before:
            self._charge[:] = 0.0
        self._exec = _Execution(program=program, params=params, seed=seed, run_index=run)
        return C.ControllerReply(cmd.kind, C.ST_OK)

    def _cmd_stop(self, cmd):
        if self._exec is not None:
            self._exec.stop_requested = True
        return C.ControllerReply(cmd.kind, C.ST_OK)

    def _cmd_sync_clock(self, cmd):
        import struct
        (host_time,) = struct.unpack(">d", cmd.payload)
        self.clock_offset = host_time - self.clock()
        return C.ControllerReply(cmd.kind, C.ST_OK)

    def _cmd_ext_device(self, cmd):
        device = cmd.payload[0] if cmd.payload else 0
        action = cmd.payload[1:].decode(errors="replace")
        self.device_log.append((device, action))
        return C.ControllerReply(cmd.kind, C.ST_OK)

    # -- program execution -------------------------------------------------

    def _event(self, **kv):
        body = "event " + " ".join(f"{k}={v}" for k, v in kv.items())
        self.transport.write_msg(Message("service-request", body.encode()))

    def _terminal(self, status, info):
        kv = {"status": status, **info}
        body = "readout-end " + " ".join(f"{k}={v}" for k, v in kv.items())
        self.transport.write_msg(Message("service-request", body.encode()))

    def _abort_execution(self):
        if self._exec is not None:
            self._terminal("aborted", self._exec.frame_info)
            self._exec = None

    def _step_program(self):
        ex = self._exec
        if ex.stop_requested:
            self._abort_execution()
            return
        try:
            if ex.emitter is not None:
                self._pump_emitter(ex)
                return
            if ex.pc >= len(ex.program):
                self._terminal("done", ex.frame_info)
                self._exec = None
                return
            self._execute_instruction(ex, ex.program[ex.pc])
        except CcdaqError as e:
            self.power_state = "fault"
            self._terminal("fault", {"code": e.code})
            self._exec = None

    def _pump_emitter(self, ex):
        for _ in range(self.CHUNKS_PER_SLICE):
            chunk = next(ex.emitter, None)
            if chunk is None:
                ex.emitter = None
                return
            self.transport.write_msg(Message("video-data", chunk.encode()))
            if ex.stop_requested:
                return

    def _effective_scene(self, params):
        if params.exposure_type == "neon" and self.lamp is not None:
            return self.scene.combined_with(self.lamp)
        return self.scene

    def _execute_instruction(self, ex, ins):
        if ins.opcode == C.OP_INTEGRATE:
            (ticks,) = ins.args
            exptime = ticks / 1_000_000.0 * (self.config.tick_seconds / 1e-6)
            p = ex.params.with_(exptime=exptime)
            self._event(phase="integrating", run=ex.run_index, seconds=f"{exptime:.6f}")
            if self.config.realtime and exptime > 0:
                time.sleep(exptime)
            ci = integrate_charge(self._effective_scene(p), self.geom, p,
                                  step_seed(ex.seed, ex.run_index, ex.step))
            ex.step += 1
            self._charge += ci.charge
            ex.pc += 1
        elif ins.opcode == C.OP_TRANSFER:
            (rows,) = ins.args
            if rows >= self.geom.rows:
                raise CcdaqError(f"transfer of {rows} rows shifts the image out")
            if rows > 0:
                self._charge[rows:, :] = self._charge[:-rows, :]
                self._charge[:rows, :] = 0.0
                np.clip(self._charge, 0.0, self.geom.full_well, out=self._charge)
            ex.pc += 1
        elif ins.opcode == C.OP_READOUT:
            (mode,) = ins.args
            self._event(phase="reading", run=ex.run_index)
            if mode == C.READOUT_SCAN:
                ex.emitter = self._scan_emitter(ex)
            else:
                ex.emitter = self._full_readout_emitter(ex)
            ex.pc += 1
        elif ins.opcode == C.OP_EXT_DEVICE:
            device, action = ins.args
            self.device_log.append((device, f"sync:{action}"))
            self._event(phase="device", device=device, action=action)
            ex.pc += 1
        elif ins.opcode == C.OP_SEQ:
            target, count = ins.args
            remaining = ex.loops.get(ex.pc, count - 1)
            if remaining > 0:
                ex.loops[ex.pc] = remaining - 1
                ex.pc = target
            else:
                ex.loops.pop(ex.pc, None)
                ex.pc += 1
        else:
            raise CcdaqError(f"unknown opcode {ins.opcode}")

    def _full_readout_emitter(self, ex):
        frame = digitize_readout(ChargeImage(self.geom.rows, self.geom.cols, self._charge),
                                 self.geom, ex.params,
                                 step_seed(ex.seed, ex.run_index, ex.step))
        ex.step += 1
        self._charge[:] = 0.0          # destructive readout
        raw = frame.samples.astype(">u2").tobytes()
        fid = self._frame_counter
        self._frame_counter += 1
        ex.frame_info = {"frame_id": fid, "width": frame.width, "height": frame.height,
                         "total_bytes": len(raw), "saturated": frame.meta.saturated,
                         "ramp_rows": 0}
        n = max(1, -(-len(raw) // C.VIDEO_CHUNK_BYTES))
        for i in range(n):
            data = raw[i * C.VIDEO_CHUNK_BYTES:(i + 1) * C.VIDEO_CHUNK_BYTES]
            yield C.VideoChunk(fid, i, i * C.VIDEO_CHUNK_BYTES, len(raw),
                               frame.width, frame.height, data)

    def _scan_emitter(self, ex):
        params = ex.params
        width, _ = params.binned_size(self.geom)
        row_bytes = width * 2
        total = params.scan_rows * row_bytes
        fid = self._frame_counter
        self._frame_counter += 1
        ex.frame_info = {"frame_id": fid, "width": width, "height": params.scan_rows,
                         "total_bytes": total, "saturated": 0,
                         "ramp_rows": min(self.geom.rows, params.scan_rows)}
        for row in drift_scan(self.scene, self.geom, params, ex.seed):
            if self.config.realtime:
                time.sleep(params.row_period)
            yield C.VideoChunk(fid, row.index, row.index * row_bytes, total,
                               width, params.scan_rows,
                               row.samples.astype(">u2").tobytes())
