"""Hot numeric kernels: fixed-step RK4 for the linear lift system.

The coefficient matrices are pre-sampled on a half-step grid, so the stepper
is pure array arithmetic and can be JIT-compiled.  Set ``GEOCONN_NUMBA=0`` to
force the pure-numpy path; without numba installed the fallback is used
automatically.
"""

import os

import numpy as np


def rk4_linear_numpy(amats, h, y0):
    """Integrate ``y' = A(t) y`` with classical RK4.

    ``amats`` holds A at ``t0, t0+h/2, t0+h, ...`` (shape ``(2*steps+1, l, l)``)
    and the return value stacks y at the full-step nodes.
    """
    steps = (amats.shape[0] - 1) // 2
    size = y0.shape[0]
    out = np.empty((steps + 1, size))
    y = y0.copy()
    out[0] = y
    for i in range(steps):
        a0 = amats[2 * i]
        am = amats[2 * i + 1]
        a1 = amats[2 * i + 2]
        k1 = a0 @ y
        k2 = am @ (y + 0.5 * h * k1)
        k3 = am @ (y + 0.5 * h * k2)
        k4 = a1 @ (y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i + 1] = y
    return out


def _numba_enabled() -> bool:
    return os.environ.get("GEOCONN_NUMBA", "1").lower() not in ("0", "false", "no")


HAVE_NUMBA = False
rk4_linear_jit = None
if _numba_enabled():
    try:
        from numba import njit

        rk4_linear_jit = njit(cache=True)(rk4_linear_numpy)
        HAVE_NUMBA = True
    except ImportError:
        pass


def rk4_linear(amats, h, y0):
    if HAVE_NUMBA:
        return rk4_linear_jit(amats, h, y0)
    return rk4_linear_numpy(amats, h, y0)
