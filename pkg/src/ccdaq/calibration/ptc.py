"""Photon-transfer analysis: conversion gain and read noise.

The method uses matched flat-field pairs so that fixed-pattern structure
cancels in the difference: for each illumination level,

    signal  = mean(A, B) - mean(bias)         [ADU]
    variance = var(A - B) / 2                 [ADU^2]

and the photon-transfer relation variance = signal/gain + read_noise_ADU^2
is fitted as a weighted least-squares line.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateFitError, InsufficientDataError

log = logging.getLogger("ccdaq.calibration")

# a level is considered saturated when more than this fraction of pixels clips
SATURATION_FRACTION = 1e-3
_FULL_SCALE = 65535


@dataclass
class PhotonTransferResult:
    gain: float              # electrons / ADU
    read_noise: float        # electrons rms
    fit_points: list         # (mean signal ADU, variance ADU^2)
    residual_rms: float      # ADU^2


def _samples(frame):
    return frame if isinstance(frame, np.ndarray) else frame.samples


def _is_saturated(a, b):
    clipped = np.count_nonzero(a == _FULL_SCALE) + np.count_nonzero(b == _FULL_SCALE)
    return clipped > SATURATION_FRACTION * (a.size + b.size)


def photon_transfer(flat_pairs, bias_frames) -> PhotonTransferResult:
    if len(flat_pairs) < 5:
        raise InsufficientDataError(
            f"need at least 5 illumination levels, got {len(flat_pairs)}")
    if not bias_frames:
        raise InsufficientDataError("need at least one bias frame")

    bias = float(np.mean([np.mean(_samples(f), dtype=np.float64)
                          for f in bias_frames]))

    points = []
    for a_frame, b_frame in flat_pairs:
        a = _samples(a_frame).astype(np.float64)
        b = _samples(b_frame).astype(np.float64)
        if _is_saturated(_samples(a_frame), _samples(b_frame)):
            log.warning("excluding saturated level (mean %.1f ADU)", a.mean())
            continue
        signal = (a.mean() + b.mean()) / 2.0 - bias
        variance = np.var(a - b) / 2.0
        points.append((signal, variance))

    points.sort()
    # keep the monotone-variance prefix: once variance turns over (onset of
    # soft saturation) the photon-transfer relation no longer holds
    usable = []
    for signal, variance in points:
        if usable and variance < 0.5 * usable[-1][1]:
            log.warning("excluding non-monotone level at %.1f ADU", signal)
            continue
        usable.append((signal, variance))

    if len(usable) < 3:
        raise InsufficientDataError(
            f"only {len(usable)} usable illumination levels")

    sig = np.array([p[0] for p in usable])
    var = np.array([p[1] for p in usable])
    if np.ptp(sig) < 10.0:
        raise InsufficientDataError(
            "illumination levels are not distinct (signal spans "
            f"{np.ptp(sig):.2f} ADU)")
    if np.all(var <= 0):
        raise DegenerateFitError("zero variance at every level")

    # weight ~ 1/Var(variance estimate) ~ 1/variance^2
    w = 1.0 / np.maximum(var, np.max(var) * 1e-6) ** 2
    A = np.vstack([sig, np.ones_like(sig)]).T
    Aw = A * w[:, None]
    try:
        coeffs = np.linalg.solve(A.T @ Aw, Aw.T @ var)
    except np.linalg.LinAlgError:
        raise DegenerateFitError("singular photon-transfer fit") from None
    slope, intercept = coeffs
    if slope <= 0:
        raise DegenerateFitError(f"non-positive photon-transfer slope {slope:.3g}")

    gain = 1.0 / slope
    read_noise = gain * float(np.sqrt(max(intercept, 0.0)))
    residuals = var - (A @ coeffs)
    return PhotonTransferResult(
        gain=float(gain),
        read_noise=read_noise,
        fit_points=usable,
        residual_rms=float(np.sqrt(np.mean(residuals ** 2))),
    )
