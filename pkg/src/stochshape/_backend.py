"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback. ``STOCHSHAPE_BACKEND=python`` forces the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
kernels = _pykernels

if os.environ.get("STOCHSHAPE_BACKEND", "").lower() != "python":
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        pass
    else:
        kernels = _ckernels
        BACKEND = "cython"


def legendre_table(lmax, x):
    return kernels.legendre_table(int(lmax), x)


def em_affine(x0, dw, dt, b0, b1, s0, s1):
    return kernels.em_affine(x0, dw, float(dt), float(b0), float(b1), float(s0), float(s1))
