"""Throughput comparison of the compiled and pure-Python Viterbi kernels.

Both kernels implement the same add-compare-select + traceback contract; the
compiled one is the default when the extension is built. Run with:

    python3 benchmarks/bench_viterbi.py [--block-bits N] [--repeats N]
"""

import argparse
import time

import numpy as np

from dualink import _viterbi_py
from dualink.fec import ConvCode, _trellis

try:
    from dualink import _viterbi_c
except ImportError:
    _viterbi_c = None


def bench(kernel, llr, trellis, repeats):
    """Median decode time in seconds over the given repeats."""
    pred_state, pred_sign, shift = trellis
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        kernel.viterbi_rate2(llr, pred_state, pred_sign, shift)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--block-bits", type=int, default=210,
                        help="information bits per decoded block")
    parser.add_argument("--repeats", type=int, default=50,
                        help="timed repetitions per kernel (median reported)")
    args = parser.parse_args(argv)

    code = ConvCode()
    trellis = _trellis(code)
    n_steps = args.block_bits + code.n_tail_bits
    rng = np.random.default_rng(0)
    llr = rng.normal(size=(n_steps, 2))

    kernels = [("python", _viterbi_py)]
    if _viterbi_c is not None:
        kernels.append(("cython", _viterbi_c))
    else:
        print("compiled kernel not built; benchmarking fallback only")

    results = {}
    for name, kernel in kernels:
        seconds = bench(kernel, llr, trellis, args.repeats)
        results[name] = seconds
        print(f"{name:7s} {args.block_bits} bits/block: "
              f"{seconds * 1e3:8.3f} ms  ({args.block_bits / seconds / 1e3:8.1f} kbit/s)")

    if "cython" in results:
        print(f"speedup: {results['python'] / results['cython']:.1f}x")

    if _viterbi_c is not None:
        a = _viterbi_c.viterbi_rate2(llr, *trellis)
        b = _viterbi_py.viterbi_rate2(llr, *trellis)
        assert np.array_equal(a, b), "kernels disagree"
        print("kernels agree on the benchmark input")


if __name__ == "__main__":
    main()
