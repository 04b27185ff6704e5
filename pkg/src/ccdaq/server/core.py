"""Control server: owns the controller session, the client channels and
the six-state machine.

Concurrency model: one FSM thread pops a single ordered event queue fed
by every command source (client channels, UI gateway, controller service
events).  Information verbs (status, get) never enter the queue; they
are answered from server state in the channel thread, so they cause no
controller traffic.  ``set`` is the one pass-through info verb: it is
forwarded to the controller's telemetry registers.
"""

from __future__ import annotations

import logging
import os
import queue
import threading
import time
from dataclasses import dataclass

from ..config import ConfigMap
from ..controller import commands as C
from ..controller.host import ControllerLink
from ..detector import ExposureParams
from ..errors import CcdaqError, ParameterError
from .assemble import FrameAssembler
from .channels import ChannelSet
from .devices import load_devices
from .fits import write_fits
from . import fsm
from .fsm import ControlState, transition

log = logging.getLogger("ccdaq.server")

INFO_VERBS = ("status", "get", "set")


@dataclass
class ServerConfig:
    channel_dir: str = "/tmp/ccdaq-channels"
    data_dir: str = "."
    file_prefix: str = "ccd"
    status_period: float = 0.25
    ui_port: int = 0               # 0 disables the gateway
    ui_host: str = "127.0.0.1"
    ui_origins: tuple = ("localhost", "127.0.0.1")
    preview_factor: int = 8

    @classmethod
    def from_config(cls, cfg: ConfigMap):
        d = cls()
        return cls(
            channel_dir=cfg.get_str("channel_dir", d.channel_dir),
            data_dir=cfg.get_str("data_dir", d.data_dir),
            file_prefix=cfg.get_str("file_prefix", d.file_prefix),
            status_period=cfg.get_float("status_period", d.status_period),
            ui_port=cfg.get_int("ui_port", d.ui_port),
            ui_host=cfg.get_str("ui_host", d.ui_host),
            ui_origins=cfg.get_str_list("ui_origins", d.ui_origins),
            preview_factor=cfg.get_int("preview_factor", d.preview_factor),
        )


class ParseError(CcdaqError):
    code = "parse"


def parse_command_line(line):
    """Split ``verb key=value ...`` (``set``/``get`` take positional args).

    Returns (verb, args dict).  Raises ParseError carrying the character
    position of the offending token.
    """
    tokens = []
    pos = 0
    for tok in line.split():
        tokens.append((line.index(tok, pos), tok))
        pos = line.index(tok, pos) + len(tok)
    if not tokens:
        raise ParseError("0: empty command")
    verb = tokens[0][1]
    rest = tokens[1:]
    if verb == "set":
        if len(rest) != 2:
            raise ParseError(f"{tokens[0][0]}: set takes <register> <value>")
        return verb, {"register": rest[0][1], "value": rest[1][1]}
    if verb == "get":
        if len(rest) != 1:
            raise ParseError(f"{tokens[0][0]}: get takes <key>")
        return verb, {"key": rest[0][1]}
    args = {}
    for at, tok in rest:
        if "=" not in tok:
            raise ParseError(f"{at}: expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        if not k:
            raise ParseError(f"{at}: empty key")
        args[k] = v
    return verb, args


def _kv_line(prefix, kv):
    return prefix + "".join(f" {k}={v}" for k, v in kv.items())


class CcdServer:
    """One server bound to one controller transport session."""

    def __init__(self, geom, transport, config: ServerConfig, devices_cfg=None):
        self.geom = geom
        self.config = config
        self.link = ControllerLink(transport, on_message=self._on_controller_message)
        self.devices = load_devices(devices_cfg) if devices_cfg else {}
        self.events = queue.Queue()
        self.lock = threading.RLock()

        self.state = ControlState.STANDBY
        self.params = None
        self.seed = 0
        self.power_state = "unknown"
        self.frames_done = 0
        self.frames_total = 0
        self.run_id = 0
        self.last_file = None
        self.last_frame = None
        self.listeners = []           # gateway record sinks

        self._assembler = None
        self._stop_requested = False
        self._abort_requested = False
        self._rescue_started = False
        self._frame_t0 = 0.0

        os.makedirs(config.data_dir, exist_ok=True)
        self.channels = ChannelSet(config.channel_dir, self._on_client_line)
        self._running = True
        self._threads = [
            threading.Thread(target=self._run_fsm, name="fsm", daemon=True),
            threading.Thread(target=self._pump_controller, name="ctrl-pump",
                             daemon=True),
        ]
        for t in self._threads:
            t.start()

    # -- lifecycle ---------------------------------------------------------

    def close(self):
        self._running = False
        self.events.put(("quit", None, None))
        for t in self._threads:
            t.join(timeout=2)
        self.channels.close()
        for dev in self.devices.values():
            dev.close()

    # -- client side -------------------------------------------------------

    def _on_client_line(self, line, session):
        try:
            verb, args = parse_command_line(line)
        except ParseError as e:
            session.reply(f"ERR parse {e}")
            return
        if verb in ("status",):
            session.reply(self.status_line())
        elif verb == "get":
            session.reply(self._do_get(args["key"]))
        elif verb == "set":
            session.reply(self._do_set(args["register"], args["value"]))
        elif verb in fsm.CONTROL_VERBS:
            self.events.put(("verb", (verb, args), session.reply))
        else:
            session.reply(f"ERR unknown-verb {verb}")

    def handle_command(self, verb, args, reply):
        """Entry point shared with the UI gateway."""
        if verb == "status":
            reply(self.status_line())
        elif verb == "get":
            reply(self._do_get(args.get("key", "")))
        elif verb == "set":
            reply(self._do_set(args.get("register", ""), args.get("value", "")))
        elif verb in fsm.CONTROL_VERBS:
            self.events.put(("verb", (verb, dict(args)), reply))
        else:
            reply(f"ERR unknown-verb {verb}")

    def progress(self) -> dict:
        with self.lock:
            percent = 0
            if self._assembler is not None and self._assembler.started:
                percent = self._assembler.percent
            eta = 0.0
            if self.params is not None and self.frames_total:
                per_frame = (self.params.exptime or 0.0) + self._readout_estimate()
                remaining = max(0, self.frames_total - self.frames_done)
                eta = max(0.0, remaining * per_frame - percent / 100.0 * per_frame)
            return {
                "state": self.state.value,
                "frames_done": self.frames_done,
                "frames_total": self.frames_total,
                "percent": percent,
                "eta": f"{eta:.3f}",
                "power": self.power_state,
            }

    def status_line(self):
        return _kv_line("OK", self.progress())

    def _readout_estimate(self):
        p = self.params
        w, h = p.binned_size(self.geom)
        if p.exposure_type == "scan":
            return p.scan_rows * p.row_period
        return w * h * self.geom.pixel_time[p.speed]

    def _do_get(self, key):
        with self.lock:
            values = {
                "state": self.state.value,
                "detector": self.geom.name,
                "data_dir": self.config.data_dir,
                "frames_done": self.frames_done,
                "last_file": self.last_file or "",
                "seed": self.seed,
                "power": self.power_state,
                "devices": ",".join(sorted(self.devices)),
            }
            if self.params is not None:
                for k, v in self.params.to_kv().items():
                    values[f"params.{k}"] = v
        if key not in values:
            return f"ERR unknown-key {key}"
        return f"OK {key}={values[key]}"

    def _do_set(self, register, value):
        try:
            reply = self.link.set_levels({register: value})
        except CcdaqError as e:
            return f"ERR {e.code} {e}"
        if reply.ok:
            return f"OK set {register}={value}"
        return f"ERR {reply.status_name} {reply.payload.decode(errors='replace')}"

    # -- FSM thread --------------------------------------------------------

    def _run_fsm(self):
        while self._running:
            kind, payload, reply = self.events.get()
            if kind == "quit":
                return
            try:
                if kind == "verb":
                    verb, args = payload
                    self._handle_verb(verb, args, reply)
                elif kind == "ctrl":
                    self._handle_ctrl_event(payload)
                elif kind == "internal":
                    self._apply(payload)
            except CcdaqError as e:
                log.error("event %s failed: %s", kind, e)
                if reply is not None:
                    reply(f"ERR {e.code} {e}")

    def _apply(self, trigger):
        """Run one FSM trigger, publishing the state change."""
        t = transition(self.state, trigger)
        if t.accepted and t.state is not self.state:
            with self.lock:
                self.state = t.state
            self._publish("event", {"state": t.state.value})
        return t

    def _publish(self, rtype, payload):
        for sink in list(self.listeners):
            try:
                sink(rtype, payload)
            except Exception:
                log.exception("gateway sink failed")

    def _handle_verb(self, verb, args, reply):
        t = transition(self.state, verb)
        if not t.accepted:
            reply(f"ERR {t.error} state={self.state.value}")
            return
        handler = {
            "setup": self._do_setup,
            "observe": self._do_observe,
            "stop": self._do_stop,
            "abort": self._do_abort,
            "run_cmd": self._do_run_cmd,
        }[verb]
        handler(t, args, reply)

    def _do_setup(self, t, args, reply):
        args = dict(args)
        seed = int(args.pop("seed", "0"))
        try:
            params = ExposureParams.from_kv(ConfigMap(args, "setup"))
            params.validate(self.geom)
        except CcdaqError as e:
            reply(f"ERR {e.code} {e}")
            return
        if self.power_state != "on":
            self.link.power_on()
            with self.lock:
                self.power_state = "on"
        self.link.write_params(params, seed)
        with self.lock:
            self.params = params
            self.seed = seed
        self._apply("setup")
        reply(f"OK setup state={self.state.value}")

    def _compile_program(self, p):
        if p.exposure_type == "scan":
            return [C.readout(C.READOUT_SCAN)]
        if p.exposure_type == "push_pull":
            ticks = round(p.elementary_exptime * 1_000_000)
            return [C.integrate(ticks), C.transfer(p.rows_per_transfer),
                    C.seq_loop(0, p.n_transfers), C.readout(C.READOUT_FULL)]
        exptime = 0.0 if p.exposure_type == "bias" else p.exptime
        return [C.integrate(round(exptime * 1_000_000)), C.readout(C.READOUT_FULL)]

    def _do_observe(self, t, args, reply):
        p = self.params
        self.link.write_program(1, self._compile_program(p))
        with self.lock:
            self.frames_total = (1 if p.exposure_type in ("scan", "push_pull")
                                 else p.n_exposures)
            self.frames_done = 0
            self.run_id += 1
            self._assembler = FrameAssembler()
            self._stop_requested = False
            self._abort_requested = False
            self._rescue_started = False
            self._frame_t0 = time.time()
        self.link.require_ok(C.AsyncCommand.start_process(1))
        self._apply("observe")
        reply(f"OK observe started frames={self.frames_total}")

    def _do_stop(self, t, args, reply):
        with self.lock:
            self._stop_requested = True
        if self.state is ControlState.EXPOSING:
            # abort the integration; the rescue readout digitizes what
            # charge has accumulated once the controller confirms
            self.link.require_ok(C.AsyncCommand.stop_process())
        self._apply("stop")
        reply(f"OK stop state={self.state.value}")

    def _do_abort(self, t, args, reply):
        with self.lock:
            self._abort_requested = True
            self._assembler = None
        try:
            self.link.require_ok(C.AsyncCommand.stop_process())
        except CcdaqError:
            pass     # controller may already be idle
        self._apply("abort")
        reply(f"OK abort state={self.state.value} frames_done={self.frames_done}")

    def _do_run_cmd(self, t, args, reply):
        self._apply("run_cmd")

        def worker():
            try:
                result = self._run_procedure(dict(args))
                reply(_kv_line("OK run_cmd", result))
            except CcdaqError as e:
                reply(f"ERR {e.code} {e}")
            finally:
                self.events.put(("internal", fsm.EV_CMD_COMPLETE, None))

        threading.Thread(target=worker, name="run-cmd", daemon=True).start()

    def _run_procedure(self, args):
        name = args.pop("name", "")
        if name in ("power_on", "power_off", "reset"):
            cmd = {"power_on": C.CMD_POWER_ON, "power_off": C.CMD_POWER_OFF,
                   "reset": C.CMD_RESET}[name]
            self.link.require_ok(C.AsyncCommand(cmd))
            with self.lock:
                self.power_state = "off" if name == "power_off" else "on"
            return {"name": name}
        if name == "sync_clock":
            self.link.require_ok(C.AsyncCommand.sync_clock(time.time()))
            return {"name": name}
        if "." in name:
            dev_name, _, key = name.partition(".")
            dev = self.devices.get(dev_name)
            if dev is None:
                raise ParameterError("name", f"unknown device {dev_name!r}")
            if "value" in args:
                dev.set(key, args["value"])
                return {"name": name, "value": args["value"]}
            return {"name": name, "value": dev.get(key)}
        raise ParameterError("name", f"unknown procedure {name!r}")

    # -- controller side ---------------------------------------------------

    def _pump_controller(self):
        while self._running:
            try:
                msg = self.link.poll(timeout=0.05)
            except CcdaqError:
                time.sleep(0.05)
                continue
            if msg is not None:
                self._on_controller_message(msg)

    def _on_controller_message(self, msg):
        if msg.kind == "video-data":
            chunk = C.VideoChunk.decode(msg.body)
            with self.lock:
                if self._assembler is not None:
                    self._assembler.feed(chunk)
            return
        if msg.kind != "service-request":
            return
        text = msg.body.decode(errors="replace")
        parts = text.split()
        kv = dict(p.split("=", 1) for p in parts[1:] if "=" in p)
        if parts[0] == "event":
            phase = kv.get("phase", "")
            if phase == "reading":
                self.events.put(("internal", fsm.EV_INTEGRATION_COMPLETE, None))
        elif parts[0] == "readout-end":
            self.events.put(("ctrl", kv, None))

    def _handle_ctrl_event(self, kv):
        status = kv.get("status")
        if status == "fault":
            self._apply(fsm.EV_CONTROLLER_FAULT)
            self._publish("event", {"error": "controller-fault",
                                    "code": kv.get("code", "")})
            self.channels.broadcast(_kv_line("EVENT controller-fault", kv))
        elif status == "aborted":
            self._on_readout_aborted()
        elif status == "done":
            self._on_readout_done(kv)

    def _on_readout_aborted(self):
        with self.lock:
            rescue = self._stop_requested and not self._abort_requested \
                and not self._rescue_started
            self._abort_requested = False
            if rescue:
                self._rescue_started = True
                self._assembler = FrameAssembler()
        if rescue:
            self.link.write_params(self.params.with_(flush_before=False), self.seed)
            self.link.write_program(C.RESCUE_SLOT, [C.readout(C.READOUT_FULL)])
            for _ in range(50):
                r = self.link.command(C.AsyncCommand.start_process(C.RESCUE_SLOT))
                if r.ok:
                    return
                time.sleep(0.02)
            raise CcdaqError("rescue readout would not start")

    def _on_readout_done(self, kv):
        with self.lock:
            if self._abort_requested or self._assembler is None \
                    or not self._assembler.started:
                self._abort_requested = False
                return
            asm = self._assembler
            self._assembler = FrameAssembler()
            p = self.params
            frame_index = self.frames_done
        frame = asm.finalize(
            p, self.seed,
            t_start=self._frame_t0,
            t_stop=time.time(),
            detector=self.geom.name,
            ramp_rows=int(kv.get("ramp_rows", 0)),
            saturated=int(kv.get("saturated", 0)),
        )
        path = os.path.join(
            self.config.data_dir,
            f"{self.config.file_prefix}-{self.run_id:03d}-{frame_index:03d}.fits")
        write_fits(frame, path)
        with self.lock:
            self.frames_done += 1
            self.last_file = path
            self.last_frame = frame
            more = self.frames_done < self.frames_total and not self._stop_requested
            done_all = not more
            if done_all:
                self._stop_requested = False
        # settle the state machine before announcing the frame, so that a
        # client issuing `status` right after the event sees a stable state
        if more:
            self._apply(fsm.EV_FRAME_COMPLETE_MORE)
            self._frame_t0 = time.time()
            self.link.require_ok(C.AsyncCommand.start_process(1))
        else:
            self._apply(fsm.EV_FRAME_COMPLETE_DONE)
        self.channels.broadcast(
            f"EVENT readout-complete file={path} frames_done={self.frames_done}"
            f" incomplete={'true' if frame.meta.incomplete else 'false'}")
        self._publish("event", {"readout_complete": True, "file": path,
                                "frames_done": self.frames_done})
