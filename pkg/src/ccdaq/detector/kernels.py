"""Hot per-pixel kernels for readout digitization.

Each kernel has a numba ``@njit`` version and a pure-numpy fallback that
produce bit-identical results.  Selection: numpy is forced when the
``CCDAQ_NO_NUMBA`` environment variable is set (or numba is missing);
otherwise the jitted versions are used.  ``benchmarks/bench_kernels.py``
compares the two paths.
"""

from __future__ import annotations

import os

import numpy as np

_FORCE_NUMPY = bool(os.environ.get("CCDAQ_NO_NUMBA"))

if not _FORCE_NUMPY:
    try:
        from numba import njit
    except ImportError:       # pragma: no cover - numba is a declared dep
        _FORCE_NUMPY = True

USING_NUMBA = not _FORCE_NUMPY


# -- binning ---------------------------------------------------------------

def _bin_sum_np(img, bin_y, bin_x):
    h, w = img.shape
    return img.reshape(h // bin_y, bin_y, w // bin_x, bin_x).sum(axis=(1, 3))


if USING_NUMBA:

    @njit(cache=True)
    def _bin_sum_nb(img, bin_y, bin_x):
        h, w = img.shape
        oh = h // bin_y
        ow = w // bin_x
        out = np.zeros((oh, ow), dtype=np.float64)
        for i in range(oh):
            for j in range(ow):
                s = 0.0
                for di in range(bin_y):
                    for dj in range(bin_x):
                        s += img[i * bin_y + di, j * bin_x + dj]
                out[i, j] = s
        return out


def bin_sum(img, bin_y, bin_x):
    """Sum ``img`` over non-overlapping bin_y x bin_x blocks (on-chip binning)."""
    if bin_y == 1 and bin_x == 1:
        return np.ascontiguousarray(img, dtype=np.float64)
    img = np.ascontiguousarray(img, dtype=np.float64)
    if USING_NUMBA:
        return _bin_sum_nb(img, bin_y, bin_x)
    return _bin_sum_np(img, bin_y, bin_x)


# -- quantization ----------------------------------------------------------
#
# ADU = round_half_away_from_zero(electrons / gain) + bias_for_column,
# clamped to [0, 65535].  Returns the uint16 image and the count of samples
# clamped at the top rail.

def _quantize_np(electrons, gain, bias_col):
    v = electrons / gain
    q = np.sign(v) * np.floor(np.abs(v) + 0.5)
    adu = q + bias_col[np.newaxis, :]
    nsat = int(np.count_nonzero(adu > 65535))
    out = np.clip(adu, 0, 65535).astype(np.uint16)
    return out, nsat


if USING_NUMBA:

    @njit(cache=True)
    def _quantize_nb(electrons, gain, bias_col):
        h, w = electrons.shape
        out = np.empty((h, w), dtype=np.uint16)
        nsat = 0
        for i in range(h):
            for j in range(w):
                v = electrons[i, j] / gain
                if v >= 0.0:
                    q = np.floor(v + 0.5)
                else:
                    q = -np.floor(-v + 0.5)
                adu = q + bias_col[j]
                if adu > 65535.0:
                    adu = 65535.0
                    nsat += 1
                elif adu < 0.0:
                    adu = 0.0
                out[i, j] = np.uint16(adu)
        return out, nsat


def quantize(electrons, gain, bias_col):
    electrons = np.ascontiguousarray(electrons, dtype=np.float64)
    bias_col = np.ascontiguousarray(bias_col, dtype=np.float64)
    if USING_NUMBA:
        out, nsat = _quantize_nb(electrons, gain, bias_col)
        return out, int(nsat)
    return _quantize_np(electrons, gain, bias_col)


# -- preview downsampling --------------------------------------------------

def _downsample_np(img, factor):
    h, w = img.shape
    th, tw = h // factor, w // factor
    img = img[: th * factor, : tw * factor].astype(np.float64)
    block = img.reshape(th, factor, tw, factor).mean(axis=(1, 3))
    return np.floor(block + 0.5).astype(np.uint16)


if USING_NUMBA:

    @njit(cache=True)
    def _downsample_nb(img, factor):
        h, w = img.shape
        th = h // factor
        tw = w // factor
        out = np.empty((th, tw), dtype=np.uint16)
        norm = float(factor * factor)
        for i in range(th):
            for j in range(tw):
                s = 0.0
                for di in range(factor):
                    for dj in range(factor):
                        s += img[i * factor + di, j * factor + dj]
                out[i, j] = np.uint16(np.floor(s / norm + 0.5))
        return out


def downsample(img, factor):
    """Block-mean downsample of a uint16 image, rounded half-up to uint16."""
    if USING_NUMBA:
        return _downsample_nb(np.ascontiguousarray(img), factor)
    return _downsample_np(img, factor)
