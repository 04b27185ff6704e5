#!/usr/bin/env python3
"""Timing comparison of the jitted and pure-numpy readout kernels.

Runs each kernel on a full-frame-sized image in the current process,
then re-runs itself in a subprocess with ``CCDAQ_NO_NUMBA=1`` and prints
both timings side by side.  Results from the two paths are asserted to
be bit-identical before any timing is reported.

Usage: python3 benchmarks/bench_kernels.py [--rows N] [--cols N] [--repeat N]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from ccdaq.detector import kernels  # noqa: E402


def make_inputs(rows, cols, seed=1234):
    rng = np.random.default_rng(seed)
    electrons = rng.uniform(0.0, 130000.0, (rows, cols))
    bias_col = np.full(cols, 500.0)
    image = rng.integers(0, 65536, (rows, cols), dtype=np.uint16)
    return electrons, bias_col, image


def run_benchmarks(rows, cols, repeat):
    electrons, bias_col, image = make_inputs(rows, cols)
    cases = {
        "bin_sum 2x2": lambda: kernels.bin_sum(electrons, 2, 2),
        "quantize": lambda: kernels.quantize(electrons, 2.0, bias_col),
        "downsample 8x": lambda: kernels.downsample(image, 8),
    }
    results = {}
    for name, fn in cases.items():
        fn()  # warm-up (includes jit compilation on the numba path)
        results[name] = min(timeit.repeat(fn, number=1, repeat=repeat))
    return results


def checksums(rows, cols):
    electrons, bias_col, image = make_inputs(rows, cols)
    binned = kernels.bin_sum(electrons, 2, 2)
    quantized, nsat = kernels.quantize(electrons, 2.0, bias_col)
    down = kernels.downsample(image, 8)
    return {
        "bin_sum": float(binned.sum()),
        "quantize": int(quantized.astype(np.uint64).sum()),
        "nsat": nsat,
        "downsample": int(down.astype(np.uint64).sum()),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=2048)
    ap.add_argument("--cols", type=int, default=2048)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--emit-json", action="store_true",
                    help="print raw results as JSON (used by the subprocess)")
    args = ap.parse_args()

    mine = {
        "path": "numba" if kernels.USING_NUMBA else "numpy",
        "times": run_benchmarks(args.rows, args.cols, args.repeat),
        "check": checksums(args.rows, args.cols),
    }
    if args.emit_json:
        print(json.dumps(mine))
        return

    env = dict(os.environ, CCDAQ_NO_NUMBA="1")
    out = subprocess.run(
        [sys.executable, os.path.abspath(__file__),
         "--rows", str(args.rows), "--cols", str(args.cols),
         "--repeat", str(args.repeat), "--emit-json"],
        env=env, capture_output=True, text=True, check=True)
    other = json.loads(out.stdout)

    if mine["check"] != other["check"]:
        print("MISMATCH: the two kernel paths disagree", file=sys.stderr)
        print(f"  {mine['path']}: {mine['check']}", file=sys.stderr)
        print(f"  {other['path']}: {other['check']}", file=sys.stderr)
        sys.exit(1)

    print(f"kernel timings, {args.rows}x{args.cols} image, "
          f"best of {args.repeat} (ms):")
    print(f"{'kernel':<16} {mine['path']:>10} {other['path']:>10} {'speedup':>9}")
    for name in mine["times"]:
        a = mine["times"][name] * 1e3
        b = other["times"][name] * 1e3
        print(f"{name:<16} {a:>10.3f} {b:>10.3f} {b / a:>8.2f}x")
    print("outputs of both paths are bit-identical")


if __name__ == "__main__":
    main()
