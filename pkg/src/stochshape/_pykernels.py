"""Pure numpy versions of the compiled kernels in ``_ckernels.pyx``.

Both modules must produce bitwise-identical output; the operation order in
each loop body is kept the same for that reason.
"""

import numpy as np


def legendre_table(lmax, x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    ncol = (lmax + 1) * (lmax + 2) // 2
    out = np.zeros((x.shape[0], ncol))
    s = np.sqrt(np.maximum(0.0, (1.0 - x) * (1.0 + x)))
    pmm = np.full_like(x, np.sqrt(1.0 / (4.0 * 3.141592653589793)))
    for m in range(lmax + 1):
        if m > 0:
            pmm = -np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * pmm
        out[:, m * (m + 1) // 2 + m] = pmm
        if m == lmax:
            break
        p2 = pmm
        p1 = np.sqrt(2.0 * m + 3.0) * x * pmm
        out[:, (m + 1) * (m + 2) // 2 + m] = p1
        for l in range(m + 2, lmax + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (float(l) * l - float(m) * m))
            b = np.sqrt(((l - 1.0) * (l - 1.0) - float(m) * m) / (4.0 * (l - 1.0) * (l - 1.0) - 1.0))
            p = a * (x * p1 - b * p2)
            out[:, l * (l + 1) // 2 + m] = p
            p2, p1 = p1, p
    return out


def em_affine(x0, dw, dt, b0, b1, s0, s1):
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    dw = np.ascontiguousarray(dw, dtype=np.float64)
    n, k_steps = dw.shape
    paths = np.empty((n, k_steps + 1))
    paths[:, 0] = x0
    x = x0.copy()
    bad = -1
    alive = np.ones(n, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(k_steps):
            step = x + (b0 + b1 * x) * dt + (s0 + s1 * x) * dw[:, k]
            x = np.where(alive, step, x)
            paths[:, k + 1] = x
            newly_bad = alive & ~np.isfinite(x)
            if newly_bad.any():
                if bad < 0:
                    bad = k + 1
                alive &= ~newly_bad
    return paths, bad
