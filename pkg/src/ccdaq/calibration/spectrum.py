"""Video-channel noise spectra and minimum-variance filter taps.

The power spectral density comes from a Welch average of half-
overlapping Hann-windowed segments.  The "optimum filter" is the L-tap
FIR estimator with unit DC gain minimizing output variance for noise
with the measured spectrum; its taps solve the normal equations built
from the autocorrelation implied by the PSD.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, signal

from ..errors import DegenerateFitError, InsufficientDataError, ParameterError


@dataclass
class NoiseSpectrum:
    frequencies: np.ndarray   # cycles/sample, 0 .. 0.5
    psd: np.ndarray           # ADU^2 per (cycles/sample)
    n_segments: int
    filter_coeffs: np.ndarray


def _autocorrelation_from_psd(psd, segment_len):
    # undo the one-sided doubling (DC and Nyquist are not doubled), then an
    # inverse real FFT over the two-sided density gives r_k exactly:
    # r_k = sum_j p_j exp(2*pi*i*j*k/N) * df with df = 1/N
    p = psd.astype(np.float64).copy()
    p[1:-1] /= 2.0
    return np.fft.irfft(p, n=segment_len)


def optimum_filter(autocorr, n_taps):
    """Minimum-variance unit-DC-gain taps from autocorrelation values."""
    if len(autocorr) < n_taps:
        raise ParameterError("n_taps", "more taps than autocorrelation lags")
    R = linalg.toeplitz(autocorr[:n_taps])
    ones = np.ones(n_taps)
    try:
        x = linalg.solve(R, ones, assume_a="sym")
    except linalg.LinAlgError:
        raise DegenerateFitError("singular noise covariance") from None
    denom = ones @ x
    if not np.isfinite(denom) or denom == 0:
        raise DegenerateFitError("degenerate filter normalization")
    w = x / denom
    return w / w.sum()     # make the DC constraint exact despite rounding


def noise_spectrum(stream, segment_len, n_taps=8) -> NoiseSpectrum:
    stream = np.asarray(stream, dtype=np.float64)
    if segment_len < 2 or segment_len & (segment_len - 1):
        raise ParameterError("segment_len", f"{segment_len} is not a power of two")
    if stream.size < 8 * segment_len:
        raise InsufficientDataError(
            f"stream of {stream.size} samples; need >= {8 * segment_len}")

    # remove the mean once globally; per-segment detrending would bias
    # the bins next to DC low
    stream = stream - stream.mean()
    freqs, psd = signal.welch(
        stream, fs=1.0, window="hann", nperseg=segment_len,
        noverlap=segment_len // 2, detrend=False,
        scaling="density", return_onesided=True)
    step = segment_len - segment_len // 2
    n_segments = (stream.size - segment_len) // step + 1

    autocorr = _autocorrelation_from_psd(psd, segment_len)
    coeffs = optimum_filter(autocorr, n_taps)
    return NoiseSpectrum(
        frequencies=freqs,
        psd=psd,
        n_segments=int(n_segments),
        filter_coeffs=coeffs,
    )
