"""CCD charge integration and digitized readout for all six exposure types.

Everything here is a pure function of (scene, geometry, params, seed):
identical inputs give bit-identical outputs, from any number of threads.

Noise model: photon and dark shot noise are Poisson draws per unbinned
pixel over the full detector (in a fixed order, so a ROI readout equals the
matching crop of a full-frame readout); read noise is one Gaussian draw per
digitized sample, anchored at the top-left unbinned pixel of its bin block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError, WrongOperationError
from . import kernels
from .geometry import (
    ALL_NODES,
    ChargeImage,
    DetectorGeometry,
    ExposureParams,
    FrameMeta,
    RawFrame,
    SceneModel,
)


def step_seed(seed, frame, step):
    """Deterministic per-(frame, step) child seed used by every operation.

    The controller emulator derives the same children while executing
    instruction programs, which is what makes the networked path bit-exact
    against direct model calls.
    """
    return np.random.SeedSequence(seed, spawn_key=(frame, step))


def _rng(seed, frame=None, step=None):
    if frame is None:
        return np.random.default_rng(seed)
    return np.random.default_rng(step_seed(seed, frame, step))


def scene_rate_map(scene: SceneModel, geom: DetectorGeometry):
    """Photon arrival rate (e-/px/s) over the full detector, clamped >= 0."""
    gx, gy = scene.gradient
    cols = np.arange(geom.cols, dtype=np.float64)
    rows = np.arange(geom.rows, dtype=np.float64)
    rate = np.full((geom.rows, geom.cols), float(scene.sky_level))
    if gx:
        rate += gx * cols[np.newaxis, :]
    if gy:
        rate += gy * rows[:, np.newaxis]
    for src in scene.sources:
        # evaluate inside a 6-sigma window only
        half = int(np.ceil(6 * src.psf_sigma))
        x0 = max(0, int(np.floor(src.x)) - half)
        x1 = min(geom.cols, int(np.ceil(src.x)) + half + 1)
        y0 = max(0, int(np.floor(src.y)) - half)
        y1 = min(geom.rows, int(np.ceil(src.y)) + half + 1)
        if x0 >= x1 or y0 >= y1:
            continue
        xs = cols[x0:x1] - src.x
        ys = rows[y0:y1] - src.y
        g = np.exp(-0.5 * (ys[:, np.newaxis] ** 2 + xs[np.newaxis, :] ** 2) / src.psf_sigma ** 2)
        g *= src.flux / (2 * np.pi * src.psf_sigma ** 2)
        rate[y0:y1, x0:x1] += g
    np.clip(rate, 0.0, None, out=rate)
    return rate


def integrate_charge(scene, geom, params, seed) -> ChargeImage:
    """Accumulate photon + dark charge over ``params.exptime`` seconds.

    Per-pixel charge is Poisson(photon expectation) + Poisson(dark_current *
    exptime); photon expectation is zero with the shutter closed.  The
    result is clamped at the full well.
    """
    params.validate(geom)
    rng = np.random.default_rng(seed)
    shape = (geom.rows, geom.cols)
    if params.shutter_open and params.exptime > 0:
        lam = scene_rate_map(scene, geom) * params.exptime
    else:
        lam = np.zeros(shape)
    charge = rng.poisson(lam).astype(np.float64)
    dark = geom.dark_current * params.exptime
    charge += rng.poisson(np.full(shape, dark)) if dark > 0 else 0.0
    np.clip(charge, 0.0, geom.full_well, out=charge)
    return ChargeImage(geom.rows, geom.cols, charge)


def node_bias_columns(geom, params, width):
    """Per-column bias levels for the selected output node(s).

    node = ALL splits the binned frame into ``output_nodes`` vertical strips
    of (near-)equal width, strip i digitized with bias_level[i]; a single
    node index reads the whole frame through that node's chain.
    """
    bias = np.empty(width, dtype=np.float64)
    if params.node == ALL_NODES and geom.output_nodes > 1:
        n = geom.output_nodes
        for i in range(n):
            lo = (i * width) // n
            hi = ((i + 1) * width) // n
            bias[lo:hi] = geom.bias_level[i]
    else:
        node = 0 if params.node == ALL_NODES else params.node
        bias[:] = geom.bias_level[node]
    return bias


def digitize_readout(charge, geom, params, seed, t_start=0.0) -> RawFrame:
    """Crop ROI, bin by charge summation, add read noise, digitize to ADU."""
    if (charge.rows, charge.cols) != (geom.rows, geom.cols):
        raise ParameterError("charge", "charge image does not match detector geometry")
    params.validate(geom)
    x0, y0, w, h = params.resolved_roi(geom)
    bx, by = params.bin_x, params.bin_y
    width, height = w // bx, h // by

    binned = kernels.bin_sum(charge.charge[y0:y0 + h, x0:x0 + w], by, bx)

    # Read-noise draws cover the full unbinned grid so that ROI readouts
    # reproduce the matching crop of a full-frame readout.
    rng = np.random.default_rng(seed)
    grid = rng.standard_normal((geom.rows, geom.cols))
    noise = grid[y0:y0 + h:by, x0:x0 + w:bx] * geom.read_noise[params.speed]

    bias = node_bias_columns(geom, params, width)
    samples, nsat = kernels.quantize(binned + noise, geom.gains[params.gain_index], bias)

    readout_time = width * height * geom.pixel_time[params.speed]
    meta = FrameMeta(
        params=params,
        t_start=t_start,
        t_stop=t_start + params.exptime + readout_time,
        node=params.node,
        saturated=nsat,
        seed=_seed_repr(seed),
        detector=geom.name,
    )
    return RawFrame(width=width, height=height, samples=samples, meta=meta)


def _seed_repr(seed):
    if isinstance(seed, np.random.SeedSequence):
        return int(seed.entropy) if isinstance(seed.entropy, int) else 0
    return int(seed)


def simulate_exposure(scene, geom, params, seed, lamp=None, t0=0.0):
    """Frame-by-frame acquisition for bias / dark / object / neon.

    Runs ``n_exposures`` integrate+digitize cycles with per-frame child
    seeds; neon superposes the comparison-lamp scene while integrating.
    Returns the list of frames with strictly increasing start times.
    """
    if params.exposure_type not in ("bias", "dark", "object", "neon"):
        raise WrongOperationError(
            f"{params.exposure_type} exposures are not frame-by-frame; "
            "use drift_scan or push_pull")
    params.validate(geom)
    eff_scene = scene
    if params.exposure_type == "neon" and lamp is not None:
        eff_scene = scene.combined_with(lamp)
    eff_params = params.with_(exptime=0.0) if params.exposure_type == "bias" else params

    frames = []
    t = t0
    for i in range(params.n_exposures):
        charge = integrate_charge(eff_scene, geom, eff_params, step_seed(seed, i, 0))
        frame = digitize_readout(charge, geom, eff_params, step_seed(seed, i, 1), t_start=t)
        frames.append(frame)
        t = frame.meta.t_stop + 1e-3  # inter-frame gap keeps starts strictly increasing
    return frames


@dataclass
class ScanRow:
    """One digitized drift-scan row."""

    index: int
    timestamp: float
    samples: np.ndarray    # (binned width,) uint16
    ramp_up: bool


def drift_scan(scene, geom, params, seed):
    """Drift-scan (TDI) readout: one digitized row per ``row_period``.

    Each charge packet transits all ``geom.rows`` rows while the shutter is
    open, dwelling one period per row, so a steady-state row's expectation
    is the column-integrated scene rate times row_period (plus dark charge
    for the full transit).  Rows are emitted in steady state; the first
    ``geom.rows`` emitted rows are additionally flagged ramp_up because
    their light predates the scan start.
    """
    if params.exposure_type != "scan":
        raise WrongOperationError("drift_scan requires exposure_type=scan")
    params.validate(geom)
    x0, _, w, _ = params.resolved_roi(geom)
    bx = params.bin_x
    width = w // bx

    rate = scene_rate_map(scene, geom)
    col_lam = rate[:, x0:x0 + w].sum(axis=0) * params.row_period
    dark_lam = geom.dark_current * geom.rows * params.row_period
    gain = geom.gains[params.gain_index]
    sigma_r = geom.read_noise[params.speed]
    bias = node_bias_columns(geom, params, width)

    for k in range(params.scan_rows):
        rng = np.random.default_rng(step_seed(seed, 0, k))
        charge = rng.poisson(col_lam).astype(np.float64)
        if dark_lam > 0:
            charge += rng.poisson(np.full(w, dark_lam))
        np.clip(charge, 0.0, geom.full_well, out=charge)
        binned = kernels.bin_sum(charge[np.newaxis, :], 1, bx)
        noise = rng.standard_normal(width) * sigma_r
        samples, _ = kernels.quantize(binned + noise, gain, bias)
        yield ScanRow(
            index=k,
            timestamp=k * params.row_period,
            samples=samples[0],
            ramp_up=k < geom.rows,
        )


def push_pull(scene, geom, params, seed) -> RawFrame:
    """Combined integration/transfer mode.

    Repeats ``n_transfers`` times: integrate ``elementary_exptime``, then
    shift the charge image by ``rows_per_transfer`` rows (charge shifted
    past the edge is discarded); a single final readout digitizes the
    accumulated image.
    """
    if params.exposure_type != "push_pull":
        raise WrongOperationError("push_pull requires exposure_type=push_pull")
    params.validate(geom)
    n = params.n_transfers
    shift = params.rows_per_transfer
    elem = params.with_(exposure_type="object", exptime=params.elementary_exptime,
                        elementary_exptime=None, n_transfers=None, rows_per_transfer=None)

    charge = np.zeros((geom.rows, geom.cols))
    for t in range(n):
        charge += integrate_charge(scene, geom, elem, step_seed(seed, 0, t)).charge
        charge[shift:, :] = charge[:-shift, :]
        charge[:shift, :] = 0.0
        np.clip(charge, 0.0, geom.full_well, out=charge)

    frame = digitize_readout(ChargeImage(geom.rows, geom.cols, charge), geom,
                             params, step_seed(seed, 0, n),
                             t_start=0.0)
    frame.meta.t_stop = n * params.elementary_exptime + (
        frame.width * frame.height * geom.pixel_time[params.speed])
    return frame
