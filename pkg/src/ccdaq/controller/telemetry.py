"""Controller telemetry registers: clock levels, node voltages, temperature.

Writes are range-checked and all-or-nothing; readback carries configured
measurement noise, and the detector temperature relaxes toward its
set-point with a first-order law (configurable half-life).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..config import ConfigMap
from ..errors import ParameterError


@dataclass
class ControllerConfig:
    clock_phases: tuple = ("phi1", "phi2", "phi3", "reset")
    clock_range: tuple = (0.0, 12.0)
    node_voltage_range: tuple = (0.0, 30.0)
    temp_range: tuple = (140.0, 320.0)
    temp_half_life: float = 30.0
    readback_noise: float = 0.05
    tick_seconds: float = 1e-6
    realtime: bool = False
    telemetry_seed: int = 0

    @classmethod
    def from_config(cls, cfg: ConfigMap):
        d = cls()
        return cls(
            clock_phases=cfg.get_str_list("clock_phases", d.clock_phases),
            clock_range=cfg.get_float_list("clock_range", d.clock_range),
            node_voltage_range=cfg.get_float_list("node_voltage_range", d.node_voltage_range),
            temp_range=cfg.get_float_list("temp_range", d.temp_range),
            temp_half_life=cfg.get_float("temp_half_life", d.temp_half_life),
            readback_noise=cfg.get_float("readback_noise", d.readback_noise),
            tick_seconds=cfg.get_float("tick_seconds", d.tick_seconds),
            realtime=cfg.get_bool("realtime", d.realtime),
            telemetry_seed=cfg.get_int("telemetry_seed", d.telemetry_seed),
        )


@dataclass
class TelemetryRegisters:
    clock_levels: dict
    node_voltages: dict
    node_currents: dict
    temperature: float
    power_state: str


class Telemetry:
    def __init__(self, config: ControllerConfig, n_nodes, clock=time.monotonic):
        self.config = config
        self.n_nodes = n_nodes
        self.clock = clock
        self._rng = np.random.default_rng(config.telemetry_seed)
        lo, hi = config.clock_range
        self._clocks = {p: (lo + hi) / 2 for p in config.clock_phases}
        vlo, vhi = config.node_voltage_range
        self._voltages = {i: (vlo + vhi) / 2 for i in range(n_nodes)}
        mid_t = (config.temp_range[0] + config.temp_range[1]) / 2
        self._temp_target = mid_t
        self._temp_anchor = mid_t       # temperature at _temp_t0
        self._temp_t0 = clock()

    # register namespace ---------------------------------------------------

    def ranges(self):
        """Writable registers and their allowed ranges (for client schemas)."""
        out = {}
        for p in self.config.clock_phases:
            out[f"clk.{p}"] = self.config.clock_range
        for i in range(self.n_nodes):
            out[f"node.{i}.voltage"] = self.config.node_voltage_range
        out["ccd-temp"] = self.config.temp_range
        return out

    def write(self, values):
        """Apply register writes atomically; rejects name the register."""
        ranges = self.ranges()
        checked = {}
        for name, raw in values.items():
            if name not in ranges:
                raise ParameterError(name, "unknown or read-only register")
            try:
                v = float(raw)
            except (TypeError, ValueError):
                raise ParameterError(name, f"not a number: {raw!r}") from None
            lo, hi = ranges[name]
            if not (lo <= v <= hi):
                raise ParameterError(name, f"{v} outside [{lo}, {hi}]")
            checked[name] = v
        for name, v in checked.items():
            if name.startswith("clk."):
                self._clocks[name[4:]] = v
            elif name == "ccd-temp":
                now = self.clock()
                self._temp_anchor = self._temperature_at(now)
                self._temp_t0 = now
                self._temp_target = v
            else:
                node = int(name.split(".")[1])
                self._voltages[node] = v

    def _temperature_at(self, now):
        dt = now - self._temp_t0
        decay = 0.5 ** (dt / self.config.temp_half_life)
        return self._temp_target + (self._temp_anchor - self._temp_target) * decay

    def snapshot(self, power_state) -> TelemetryRegisters:
        noise = self.config.readback_noise
        r = self._rng
        clocks = {p: v + r.normal(0, noise) for p, v in self._clocks.items()}
        volts = {i: v + r.normal(0, noise) for i, v in self._voltages.items()}
        # output-stage current tracks its drain voltage (simple linear stand-in)
        currents = {i: 0.2 * v + r.normal(0, noise) for i, v in self._voltages.items()}
        temp = self._temperature_at(self.clock()) + r.normal(0, noise)
        return TelemetryRegisters(clocks, volts, currents, temp, power_state)

    def to_kv(self, power_state):
        s = self.snapshot(power_state)
        d = {"power_state": s.power_state, "ccd-temp": f"{s.temperature:.4f}",
             "ccd-temp-target": f"{self._temp_target:.4f}"}
        for p, v in s.clock_levels.items():
            d[f"clk.{p}"] = f"{v:.4f}"
        for i, v in s.node_voltages.items():
            d[f"node.{i}.voltage"] = f"{v:.4f}"
        for i, v in s.node_currents.items():
            d[f"node.{i}.current"] = f"{v:.4f}"
        return d
