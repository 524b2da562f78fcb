"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Both backends must produce bitwise-identical output; the script checks this
before timing.
"""

import argparse
import timeit

import numpy as np

from stochshape import _pykernels

try:
    from stochshape import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def cases():
    rng = np.random.default_rng(0)
    x = np.cos(np.linspace(0.0, np.pi, 26))
    x_big = np.cos(np.linspace(0.0, np.pi, 2000))
    dw = rng.standard_normal((2000, 1000)) * np.sqrt(1e-3)
    dw_long = rng.standard_normal((50, 2**14)) * np.sqrt(2.0**-14)
    return {
        "legendre_table N=25, 26 nodes": ("legendre_table", (25, x)),
        "legendre_table N=100, 2000 nodes": ("legendre_table", (100, x_big)),
        "em_affine OU, 2000 paths x 1000 steps": ("em_affine", (np.ones(2000), dw, 1e-3, 0.0, -1.0, 0.1, 0.0)),
        "em_affine OU, 50 paths x 16384 steps": ("em_affine", (np.ones(50), dw_long, 2.0**-14, 0.0, -1.0, 0.1, 0.0)),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    backends = {"python": _pykernels}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    else:
        print("compiled extension not available; timing the fallback only")

    print(f"{'case':42s}" + "".join(f"{name:>12s}" for name in backends) + f"{'speedup':>10s}")
    for label, (fname, fargs) in cases().items():
        outputs = {name: getattr(mod, fname)(*fargs) for name, mod in backends.items()}
        if len(outputs) == 2 and not _same(outputs["python"], outputs["cython"]):
            raise SystemExit(f"{label}: backends disagree")
        best = {}
        for name, mod in backends.items():
            fn = getattr(mod, fname)
            number = 1
            while timeit.timeit(lambda: fn(*fargs), number=number) < 0.2 and number < 1000:
                number *= 2
            best[name] = min(timeit.repeat(lambda: fn(*fargs), number=number, repeat=args.repeat)) / number
        speedup = f"{best['python'] / best['cython']:9.1f}x" if "cython" in best else ""
        print(f"{label:42s}" + "".join(f"{best[n] * 1e3:10.3f}ms" for n in backends) + f"{speedup:>10s}")


if __name__ == "__main__":
    main()
