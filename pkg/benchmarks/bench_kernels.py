"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--samples N] [--repeat R]
"""

import argparse
import timeit

import numpy as np

from wingfuse import _fallback
from wingfuse.dsp import highpass_coefficients

try:
    from wingfuse import _kernels
except ImportError:
    _kernels = None


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=96_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    x = rng.standard_normal(args.samples)
    coeffs = highpass_coefficients(8.0, 96_000.0, 2)
    beam = np.clip(1.0 - 0.8 * (rng.random(args.samples) < 0.001), 0.0, 1.0)

    cases = {
        "first_order_sections": lambda m: m.first_order_sections(x, coeffs),
        "falling_crossings": lambda m: m.falling_crossings(beam, 0.5, 24_000),
    }
    backends = [("python", _fallback)] + ([("cython", _kernels)] if _kernels else [])
    print(f"{'kernel':<22} {'backend':<8} {'best ms':>10} {'speedup':>8}")
    for name, fn in cases.items():
        base = None
        for label, mod in backends:
            best = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)) * 1e3
            base = base or best
            print(f"{name:<22} {label:<8} {best:>10.2f} {base / best:>7.1f}x")
        if _kernels is not None:
            same = np.array_equal(fn(_fallback), fn(_kernels))
            print(f"{'':<22} outputs identical: {same}")


if __name__ == "__main__":
    main()
