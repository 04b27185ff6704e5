"""``ccdcal``: calibration analytics over recorded files.

Subcommands write a key-value report to stdout and, with ``--csv``, a
plot-ready table.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from ..errors import CcdaqError
from ..server.fits import read_fits
from .linearity import fit_transfer_curve
from .ptc import photon_transfer
from .spectrum import noise_spectrum


def build_parser():
    ap = argparse.ArgumentParser(prog="ccdcal",
                                 description="CCD calibration analytics")
    sub = ap.add_subparsers(dest="command", required=True)

    ptc = sub.add_parser("ptc", help="photon-transfer gain and read noise")
    ptc.add_argument("--bias", nargs="+", required=True, metavar="FITS")
    ptc.add_argument("--flats", nargs="+", required=True, metavar="FITS",
                     help="flat fields, two per illumination level, in order")
    ptc.add_argument("--csv", help="write (signal, variance) table here")

    psd = sub.add_parser("psd", help="noise spectrum and optimum filter taps")
    psd.add_argument("input", help=".npy sample stream or a FITS frame")
    psd.add_argument("--segment", type=int, default=1024,
                     help="Welch segment length (power of two)")
    psd.add_argument("--taps", type=int, default=8, help="filter length")
    psd.add_argument("--csv", help="write (frequency, psd) table here")

    lin = sub.add_parser("linearity", help="transfer-curve linearization")
    lin.add_argument("frames", nargs="+", metavar="FITS",
                     help="flat ramp; exposure read from EXPTIME")
    lin.add_argument("--csv", help="write (exposure, measured, corrected) table")
    return ap


def _load_stream(path):
    if path.endswith(".npy"):
        return np.load(path).ravel().astype(np.float64)
    samples, _ = read_fits(path)
    return samples.ravel().astype(np.float64)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def cmd_ptc(args):
    if len(args.flats) % 2 or len(args.flats) < 2:
        print("ccdcal: --flats needs an even number of files", file=sys.stderr)
        return 2
    bias = [read_fits(p)[0] for p in args.bias]
    flats = [read_fits(p)[0] for p in args.flats]
    pairs = [(flats[i], flats[i + 1]) for i in range(0, len(flats), 2)]
    result = photon_transfer(pairs, bias)
    print(f"gain = {result.gain:.6f}")
    print(f"read_noise = {result.read_noise:.6f}")
    print(f"levels = {len(result.fit_points)}")
    print(f"residual_rms = {result.residual_rms:.6f}")
    if args.csv:
        _write_csv(args.csv, ["signal_adu", "variance_adu2"], result.fit_points)
    return 0


def cmd_psd(args):
    stream = _load_stream(args.input)
    spec = noise_spectrum(stream, args.segment, n_taps=args.taps)
    print(f"samples = {stream.size}")
    print(f"segments = {spec.n_segments}")
    print(f"variance = {np.var(stream):.6f}")
    taps = ", ".join(f"{c:.8f}" for c in spec.filter_coeffs)
    print(f"filter_coeffs = {taps}")
    print(f"filter_sum = {spec.filter_coeffs.sum():.12f}")
    if args.csv:
        _write_csv(args.csv, ["frequency", "psd"],
                   zip(spec.frequencies, spec.psd))
    return 0


def cmd_linearity(args):
    ramp = []
    for path in args.frames:
        samples, header = read_fits(path)
        ramp.append((float(header.get("EXPTIME", 0.0)), samples))
    curve = fit_transfer_curve(ramp)
    print(f"levels = {len(curve.points)}")
    print(f"max_nonlinearity_before = {curve.max_nonlinearity_before:.5f}")
    print(f"max_nonlinearity_after = {curve.max_nonlinearity_after:.5f}")
    if args.csv:
        rows = [(t, m, curve.correction(m)) for t, m in curve.points]
        _write_csv(args.csv, ["exposure_s", "measured_adu", "corrected_adu"], rows)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return {"ptc": cmd_ptc, "psd": cmd_psd,
                "linearity": cmd_linearity}[args.command](args)
    except (CcdaqError, OSError) as e:
        print(f"ccdcal: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
