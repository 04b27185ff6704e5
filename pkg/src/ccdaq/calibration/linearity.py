"""Transfer-characteristic linearization.

The ideal response is the least-squares line through the lowest 30% of
the measured signal range (low-signal operation is assumed linear); the
correction is a monotone piecewise-cubic map from measured ADU onto
that line, falling back to identity outside the calibrated range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from ..errors import BadRampError, InsufficientDataError

FULL_SCALE = 65535.0


@dataclass
class TransferCurve:
    points: list                     # (exposure s, mean ADU)
    correction: object               # callable ADU -> ADU
    max_nonlinearity_before: float   # percent of full scale
    max_nonlinearity_after: float


def _mean_adu(frame):
    if isinstance(frame, (int, float, np.floating)):
        return float(frame)
    arr = frame if isinstance(frame, np.ndarray) else frame.samples
    return float(np.mean(arr, dtype=np.float64))


class _Correction:
    """Monotone map over the calibrated range, identity elsewhere."""

    def __init__(self, measured, ideal):
        self._lo = measured[0]
        self._hi = measured[-1]
        self._pchip = PchipInterpolator(measured, ideal, extrapolate=False)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        inside = (x >= self._lo) & (x <= self._hi)
        out = np.where(inside, self._pchip(np.clip(x, self._lo, self._hi)), x)
        return out if out.ndim else float(out)


def fit_transfer_curve(ramp) -> TransferCurve:
    if len(ramp) < 8:
        raise InsufficientDataError(
            f"need at least 8 exposure levels, got {len(ramp)}")
    pts = sorted((float(t), _mean_adu(f)) for t, f in ramp)
    t = np.array([p[0] for p in pts])
    m = np.array([p[1] for p in pts])
    if np.any(np.diff(m) <= 0):
        k = int(np.argmax(np.diff(m) <= 0))
        raise BadRampError(
            f"mean signal not increasing between exposures {t[k]:g}s and {t[k + 1]:g}s")

    # ideal response: line through the low 30% of the signal range
    cut = m[0] + 0.3 * (m[-1] - m[0])
    low = m <= cut
    if np.count_nonzero(low) < 3:
        low = np.zeros_like(low)
        low[:3] = True
    a, b = np.polyfit(t[low], m[low], 1)
    ideal = a * t + b

    correction = _Correction(m, ideal)

    dev_before = np.max(np.abs(m - ideal)) / FULL_SCALE * 100.0
    # evaluate residuals between the knots as well: model the measured
    # response continuously in exposure, correct it, compare to the line
    t_dense = np.linspace(t[0], t[-1], 64 * len(t))
    measured_dense = PchipInterpolator(t, m)(t_dense)
    corrected = correction(measured_dense)
    ideal_dense = a * t_dense + b
    dev_after = np.max(np.abs(corrected - ideal_dense)) / FULL_SCALE * 100.0

    return TransferCurve(
        points=pts,
        correction=correction,
        max_nonlinearity_before=float(dev_before),
        max_nonlinearity_after=float(dev_after),
    )
