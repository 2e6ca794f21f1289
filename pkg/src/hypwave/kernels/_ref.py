"""Reference numpy implementation of the hot RHS kernels.

Computes dpi/dt = lap(phi) + N on the full grid, where N is either zero
(linear wave) or the cubic-in-gradient term phi * (-pi^2 + |grad phi|^2).
The compiled extension in ``_core`` implements the same contract with the
same stencils; this module is the import-time fallback and the oracle the
extension is tested against.
"""

import numpy as np

IMPL = "numpy"


def _lap(v, h):
    inv_h2 = 1.0 / (h * h)
    dxx = np.empty_like(v)
    dxx[1:-1, :] = (v[2:, :] - 2.0 * v[1:-1, :] + v[:-2, :]) * inv_h2
    dxx[0, :] = (2.0 * v[0, :] - 5.0 * v[1, :] + 4.0 * v[2, :] - v[3, :]) * inv_h2
    dxx[-1, :] = (2.0 * v[-1, :] - 5.0 * v[-2, :] + 4.0 * v[-3, :] - v[-4, :]) * inv_h2
    dyy = np.empty_like(v)
    dyy[:, 1:-1] = (v[:, 2:] - 2.0 * v[:, 1:-1] + v[:, :-2]) * inv_h2
    dyy[:, 0] = (2.0 * v[:, 0] - 5.0 * v[:, 1] + 4.0 * v[:, 2] - v[:, 3]) * inv_h2
    dyy[:, -1] = (2.0 * v[:, -1] - 5.0 * v[:, -2] + 4.0 * v[:, -3] - v[:, -4]) * inv_h2
    return dxx + dyy


def _grad(v, h):
    gx = np.gradient(v, h, axis=0, edge_order=2)
    gy = np.gradient(v, h, axis=1, edge_order=2)
    return gx, gy


def rhs_linear(phi, pi, h, out_dpi):
    out_dpi[...] = _lap(phi, h)
    return out_dpi


def rhs_wavemap(phi, pi, h, out_dpi):
    gx, gy = _grad(phi, h)
    out_dpi[...] = _lap(phi, h) + phi * (-pi * pi + gx * gx + gy * gy)
    return out_dpi
