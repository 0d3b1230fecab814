"""Time the compiled im2col / col2im against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Shapes are the ones the default 8x8 and 32x32 models actually hit.
"""

import argparse
import timeit

import numpy as np

from giugan import kernels
from giugan.kernels import _fallback

# (label, N, C, H, W, K, stride, pad)
CASES = [
    ("G up 4->8 convT k4", 16, 32, 8, 8, 4, 2, 1),
    ("D conv3 8x8", 48, 16, 8, 8, 3, 1, 1),
    ("GIU unfold k3 8x8", 16, 32, 8, 8, 3, 1, 1),
    ("D down k4 s2 32x32", 48, 16, 32, 32, 4, 2, 1),
    ("conv3 32x32", 16, 64, 32, 32, 3, 1, 1),
]


def best_ms(fn, repeat):
    return 1e3 * min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    if kernels.BACKEND != "cython":
        print("compiled extension not built; only the fallback is available")
        return 1

    from giugan.kernels import _ext

    rng = np.random.default_rng(0)
    print(f"{'case':24s} {'op':7s} {'cython ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for label, n, c, h, w, k, s, p in CASES:
        x = rng.standard_normal((n, c, h, w))
        cols = _fallback.im2col(x, k, s, p)
        assert np.array_equal(_ext.im2col(x, k, s, p), cols)
        assert np.array_equal(_ext.col2im(cols, h, w, s, p), _fallback.col2im(cols, h, w, s, p))
        for op, fast, slow in (
            ("im2col", lambda: _ext.im2col(x, k, s, p), lambda: _fallback.im2col(x, k, s, p)),
            ("col2im", lambda: _ext.col2im(cols, h, w, s, p), lambda: _fallback.col2im(cols, h, w, s, p)),
        ):
            tf, ts = best_ms(fast, args.repeat), best_ms(slow, args.repeat)
            print(f"{label:24s} {op:7s} {tf:10.3f} {ts:10.3f} {ts / tf:7.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
