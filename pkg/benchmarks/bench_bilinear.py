"""Time the bilinear sampling kernels on each available backend.

Run with ``python3 benchmarks/bench_bilinear.py``. The workload matches one
fitting step of the two-layer scene: a 17-plane volume sampled at 96x128.
"""

import argparse
import timeit

import numpy as np

from aquasweep import _kernels


def workload(levels, height, width, channels, seed=0):
    rng = np.random.default_rng(seed)
    src = rng.uniform(size=(levels, height, width, channels))
    coords = np.stack([rng.uniform(-1, width, (levels, height, width)),
                       rng.uniform(-1, height, (levels, height, width))], -1)
    gout = rng.normal(size=(levels, height, width, channels))
    return src, coords, gout


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--levels", type=int, default=17)
    parser.add_argument("--size", default="96x128", help="HxW")
    parser.add_argument("--channels", type=int, default=3)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    height, width = (int(v) for v in args.size.lower().split("x"))
    src, coords, gout = workload(args.levels, height, width, args.channels)

    reference = None
    print(f"{args.levels} planes at {height}x{width}x{args.channels}, best of {args.repeat}")
    for name in sorted(_kernels.BACKENDS):
        fwd = _kernels.sample_forward(src, coords, backend=name)
        if reference is None:
            reference = fwd
        else:
            assert np.allclose(fwd[0], reference[0], rtol=0, atol=1e-12), "backends disagree"
        t_fwd = min(timeit.repeat(lambda: _kernels.sample_forward(src, coords, backend=name),
                                  number=1, repeat=args.repeat))
        t_bwd = min(timeit.repeat(lambda: _kernels.sample_backward(src, coords, gout, backend=name),
                                  number=1, repeat=args.repeat))
        print(f"{name:>9}: forward {t_fwd * 1e3:8.2f} ms  backward {t_bwd * 1e3:8.2f} ms")


if __name__ == "__main__":
    main()
