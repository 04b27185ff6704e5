"""Detector, scene and exposure-request types.

Units follow CCD convention throughout: charge in electrons, digitized
signal in ADU, rates in electrons/pixel/second, times in seconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from ..config import ConfigMap
from ..errors import ParameterError

# Sentinel for "read through every output node at once".
ALL_NODES = -1

EXPOSURE_TYPES = ("bias", "dark", "object", "neon", "scan", "push_pull")

# Types whose shutter stays closed no matter what the shutter flag says.
_SHUTTER_CLOSED_TYPES = ("bias", "dark")


@dataclass(frozen=True)
class DetectorGeometry:
    """Static description of one CCD: size, wells, noise and timing tables.

    ``bias_level`` is indexed by output node; ``read_noise`` and
    ``pixel_time`` by readout-speed index; ``gains`` by gain index.
    """

    name: str
    rows: int
    cols: int
    full_well: float
    dark_current: float
    output_nodes: int
    bias_level: tuple
    read_noise: tuple
    pixel_time: tuple
    gains: tuple

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ParameterError("rows/cols", "detector must be at least 1x1")
        if self.full_well <= 0:
            raise ParameterError("full_well", "must be > 0")
        if not (1 <= self.output_nodes <= 4):
            raise ParameterError("output_nodes", "must be in 1..4")
        for fname in ("bias_level", "read_noise", "pixel_time", "gains"):
            if len(getattr(self, fname)) == 0:
                raise ParameterError(fname, "per-index list must be non-empty")
        if len(self.bias_level) < self.output_nodes:
            raise ParameterError("bias_level", "need one bias level per output node")
        if any(g <= 0 for g in self.gains):
            raise ParameterError("gains", "all gains must be > 0")

    @classmethod
    def from_config(cls, cfg: ConfigMap):
        return cls(
            name=cfg.require_str("name"),
            rows=cfg.get_int("rows"),
            cols=cfg.get_int("cols"),
            full_well=cfg.get_float("full_well"),
            dark_current=cfg.get_float("dark_current", 0.0),
            output_nodes=cfg.get_int("output_nodes", 1),
            bias_level=cfg.get_float_list("bias_level"),
            read_noise=cfg.get_float_list("read_noise"),
            pixel_time=cfg.get_float_list("pixel_time"),
            gains=cfg.get_float_list("gains"),
        )


@dataclass(frozen=True)
class Source:
    x: float
    y: float
    flux: float          # e-/s integrated over the PSF
    psf_sigma: float     # pixels

    def __post_init__(self):
        if self.flux < 0:
            raise ParameterError("flux", "must be >= 0")
        if self.psf_sigma <= 0:
            raise ParameterError("psf_sigma", "must be > 0")


@dataclass(frozen=True)
class SceneModel:
    """Synthetic sky: uniform background, linear gradient, Gaussian sources."""

    sky_level: float = 0.0
    sources: tuple = ()
    gradient: tuple = (0.0, 0.0)   # (d rate / d col, d rate / d row)

    def __post_init__(self):
        if self.sky_level < 0:
            raise ParameterError("sky_level", "must be >= 0")

    def combined_with(self, other):
        """Superpose two scenes (used for the comparison-lamp term in neon)."""
        return SceneModel(
            sky_level=self.sky_level + other.sky_level,
            sources=tuple(self.sources) + tuple(other.sources),
            gradient=(self.gradient[0] + other.gradient[0],
                      self.gradient[1] + other.gradient[1]),
        )


@dataclass(frozen=True)
class ExposureParams:
    """One acquisition request: type, timing, geometry and gain settings."""

    exposure_type: str
    exptime: float = 0.0
    flush_before: bool = True
    shutter: bool = True
    filter: int = 0
    speed: int = 0
    bin_x: int = 1
    bin_y: int = 1
    gain_index: int = 0
    node: int = ALL_NODES
    roi: tuple = None          # (x0, y0, width, height) unbinned; None = full frame
    n_exposures: int = 1
    # scan only
    scan_rows: int = None
    row_period: float = None
    # push_pull only
    elementary_exptime: float = None
    n_transfers: int = None
    rows_per_transfer: int = None

    def resolved_roi(self, geom):
        return self.roi if self.roi is not None else (0, 0, geom.cols, geom.rows)

    def validate(self, geom):
        p = self
        if p.exposure_type not in EXPOSURE_TYPES:
            raise ParameterError("exposure_type", f"unknown type {p.exposure_type!r}")
        if p.exptime < 0:
            raise ParameterError("exptime", "must be >= 0")
        if p.bin_x < 1 or p.bin_y < 1:
            raise ParameterError("bin_x/bin_y", "binning factors must be >= 1")
        if not (0 <= p.speed < len(geom.read_noise)):
            raise ParameterError("speed", f"index {p.speed} out of range")
        if not (0 <= p.gain_index < len(geom.gains)):
            raise ParameterError("gain_index", f"index {p.gain_index} out of range")
        if p.node != ALL_NODES and not (0 <= p.node < geom.output_nodes):
            raise ParameterError("node", f"index {p.node} out of range")
        if p.n_exposures < 1:
            raise ParameterError("n_exposures", "must be >= 1")
        x0, y0, w, h = p.resolved_roi(geom)
        if w < 1 or h < 1:
            raise ParameterError("roi", "width and height must be >= 1")
        if x0 < 0 or y0 < 0 or x0 + w > geom.cols or y0 + h > geom.rows:
            raise ParameterError("roi", f"({x0},{y0},{w},{h}) outside {geom.cols}x{geom.rows} detector")
        if w % p.bin_x != 0:
            raise ParameterError("roi", f"width {w} not divisible by bin_x {p.bin_x}")
        if h % p.bin_y != 0:
            raise ParameterError("roi", f"height {h} not divisible by bin_y {p.bin_y}")

        scan_fields = {"scan_rows": p.scan_rows, "row_period": p.row_period}
        pp_fields = {
            "elementary_exptime": p.elementary_exptime,
            "n_transfers": p.n_transfers,
            "rows_per_transfer": p.rows_per_transfer,
        }
        if p.exposure_type == "scan":
            for k, v in scan_fields.items():
                if v is None:
                    raise ParameterError(k, "required for scan exposures")
            if p.scan_rows < 1:
                raise ParameterError("scan_rows", "must be >= 1")
            if p.row_period <= 0:
                raise ParameterError("row_period", "must be > 0")
        else:
            for k, v in scan_fields.items():
                if v is not None:
                    raise ParameterError(k, f"only valid for scan, not {p.exposure_type}")
        if p.exposure_type == "push_pull":
            for k, v in pp_fields.items():
                if v is None:
                    raise ParameterError(k, "required for push_pull exposures")
            if p.elementary_exptime < 0:
                raise ParameterError("elementary_exptime", "must be >= 0")
            if p.n_transfers < 1:
                raise ParameterError("n_transfers", "must be >= 1")
            if p.rows_per_transfer < 1:
                raise ParameterError("rows_per_transfer", "must be >= 1")
            if p.rows_per_transfer >= geom.rows:
                raise ParameterError("rows_per_transfer",
                                     f"{p.rows_per_transfer} shifts the whole {geom.rows}-row image out")
        else:
            for k, v in pp_fields.items():
                if v is not None:
                    raise ParameterError(k, f"only valid for push_pull, not {p.exposure_type}")

    @property
    def shutter_open(self):
        if self.exposure_type in _SHUTTER_CLOSED_TYPES:
            return False
        return self.shutter

    def binned_size(self, geom):
        _, _, w, h = self.resolved_roi(geom)
        return w // self.bin_x, h // self.bin_y

    def with_(self, **kw):
        return replace(self, **kw)

    def to_kv(self):
        """Serialize to flat key-value pairs (config / wire format)."""
        d = {
            "exposure_type": self.exposure_type,
            "exptime": repr(self.exptime),
            "flush_before": "true" if self.flush_before else "false",
            "shutter": "true" if self.shutter else "false",
            "filter": self.filter,
            "speed": self.speed,
            "bin_x": self.bin_x,
            "bin_y": self.bin_y,
            "gain_index": self.gain_index,
            "node": self.node,
            "n_exposures": self.n_exposures,
        }
        if self.roi is not None:
            d["roi"] = ", ".join(str(v) for v in self.roi)
        for k in ("scan_rows", "row_period", "elementary_exptime",
                  "n_transfers", "rows_per_transfer"):
            v = getattr(self, k)
            if v is not None:
                d[k] = repr(v) if isinstance(v, float) else v
        return d

    @classmethod
    def from_kv(cls, cfg: ConfigMap):
        roi = cfg.get_float_list("roi")
        return cls(
            exposure_type=cfg.require_str("exposure_type"),
            exptime=cfg.get_float("exptime", 0.0),
            flush_before=cfg.get_bool("flush_before", True),
            shutter=cfg.get_bool("shutter", True),
            filter=cfg.get_int("filter", 0),
            speed=cfg.get_int("speed", 0),
            bin_x=cfg.get_int("bin_x", 1),
            bin_y=cfg.get_int("bin_y", 1),
            gain_index=cfg.get_int("gain_index", 0),
            node=cfg.get_int("node", ALL_NODES),
            roi=tuple(int(v) for v in roi) if roi is not None else None,
            n_exposures=cfg.get_int("n_exposures", 1),
            scan_rows=cfg.get_int("scan_rows"),
            row_period=cfg.get_float("row_period"),
            elementary_exptime=cfg.get_float("elementary_exptime"),
            n_transfers=cfg.get_int("n_transfers"),
            rows_per_transfer=cfg.get_int("rows_per_transfer"),
        )


@dataclass
class ChargeImage:
    """Accumulated charge (electrons, real-valued) for the full detector."""

    rows: int
    cols: int
    charge: np.ndarray

    def __post_init__(self):
        assert self.charge.shape == (self.rows, self.cols)


@dataclass
class FrameMeta:
    params: ExposureParams
    t_start: float
    t_stop: float
    node: int
    saturated: int
    seed: int
    detector: str = ""
    incomplete: bool = False
    missing_rows: list = field(default_factory=list)
    ramp_rows: int = 0


@dataclass
class RawFrame:
    """Digitized 16-bit frame.  ``samples`` is (height, width) uint16."""

    width: int
    height: int
    samples: np.ndarray
    meta: FrameMeta

    def __post_init__(self):
        assert self.samples.dtype == np.uint16
        assert self.samples.shape == (self.height, self.width)


def _preset_text(name):
    ref = resources.files("ccdaq.configs").joinpath(f"{name}.cfg")
    return ref.read_text()


def load_detector_preset(name_or_path):
    """Load a DetectorGeometry from a shipped preset name or a config path."""
    p = Path(str(name_or_path))
    if p.suffix == ".cfg" and p.exists():
        return DetectorGeometry.from_config(ConfigMap.load(p))
    return DetectorGeometry.from_config(
        ConfigMap.from_text(_preset_text(str(name_or_path)), f"preset:{name_or_path}"))


def load_scene(path_or_cfg):
    """Load a SceneModel from a config file.

    Schema: ``sky_level``, ``gradient = gx, gy`` and numbered sources
    ``source.N = x, y, flux, psf_sigma``.
    """
    cfg = path_or_cfg if isinstance(path_or_cfg, ConfigMap) else ConfigMap.load(path_or_cfg)
    sources = []
    for key in sorted(k for k in cfg.values if k.startswith("source.")):
        x, y, flux, sigma = cfg.get_float_list(key)
        sources.append(Source(x, y, flux, sigma))
    grad = cfg.get_float_list("gradient", (0.0, 0.0))
    return SceneModel(
        sky_level=cfg.get_float("sky_level", 0.0),
        sources=tuple(sources),
        gradient=(grad[0], grad[1]),
    )
