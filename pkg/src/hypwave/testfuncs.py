"""Closed-form scalar test functions of (t, x) with exact derivatives.

A small fixed family (polynomials, spacetime Gaussians, plane-wave cosines)
closed under sums and products.  Every member reports the exact gradient and
Hessian over the combined coordinates y = (t, x^1, ..., x^d), which is what
lets the identity checks run at 1e-10 tolerances.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "AnalyticTestFunction",
    "monomial",
    "polynomial",
    "gaussian",
    "cosine",
    "coordinate",
    "constant",
    "scaled",
    "random_test_function",
]


class AnalyticTestFunction:
    """Wraps callables for value / gradient / Hessian in y = (t, x)."""

    def __init__(self, value, grad, hess):
        self._value = value
        self._grad = grad
        self._hess = hess

    def value(self, t: float, x: np.ndarray) -> float:
        return float(self._value(_y(t, x)))

    def grad(self, t: float, x: np.ndarray) -> np.ndarray:
        return np.asarray(self._grad(_y(t, x)), dtype=float)

    def hess(self, t: float, x: np.ndarray) -> np.ndarray:
        return np.asarray(self._hess(_y(t, x)), dtype=float)

    def __add__(self, other: "AnalyticTestFunction") -> "AnalyticTestFunction":
        return AnalyticTestFunction(
            lambda y: self._value(y) + other._value(y),
            lambda y: self._grad(y) + other._grad(y),
            lambda y: self._hess(y) + other._hess(y),
        )

    def __mul__(self, other) -> "AnalyticTestFunction":
        if isinstance(other, AnalyticTestFunction):
            def hess(y):
                f, g = self._value(y), other._value(y)
                df, dg = self._grad(y), other._grad(y)
                return (self._hess(y) * g + f * other._hess(y)
                        + np.outer(df, dg) + np.outer(dg, df))
            return AnalyticTestFunction(
                lambda y: self._value(y) * other._value(y),
                lambda y: self._grad(y) * other._value(y)
                + self._value(y) * other._grad(y),
                hess,
            )
        c = float(other)
        return AnalyticTestFunction(
            lambda y: c * self._value(y),
            lambda y: c * self._grad(y),
            lambda y: c * self._hess(y),
        )

    __rmul__ = __mul__


def _y(t: float, x: np.ndarray) -> np.ndarray:
    return np.concatenate(([float(t)], np.asarray(x, dtype=float)))


def scaled(f: AnalyticTestFunction, m: int) -> AnalyticTestFunction:
    """Pullback through the dyadic scaling map that fixes t = 2:
    (S_m f)(t, x) = f(2^m (t-2) + 2, 2^m x)."""
    lam = 2.0 ** int(m)

    def mapped(y):
        ys = lam * np.asarray(y, dtype=float)
        ys[0] = lam * (y[0] - 2.0) + 2.0
        return ys

    return AnalyticTestFunction(
        lambda y: f._value(mapped(y)),
        lambda y: lam * np.asarray(f._grad(mapped(y)), dtype=float),
        lambda y: lam * lam * np.asarray(f._hess(mapped(y)), dtype=float),
    )


def monomial(powers) -> AnalyticTestFunction:
    """prod_k y_k^{powers[k]} over y = (t, x)."""
    pw = np.asarray(powers, dtype=int)

    def value(y):
        return np.prod(y ** pw)

    def grad(y):
        g = np.zeros_like(y)
        for k in range(len(y)):
            if pw[k] == 0:
                continue
            q = pw.copy()
            q[k] -= 1
            g[k] = pw[k] * np.prod(y ** q)
        return g

    def hess(y):
        n = len(y)
        h = np.zeros((n, n))
        for k in range(n):
            for l in range(k, n):
                q = pw.copy()
                if k == l:
                    if pw[k] < 2:
                        continue
                    q[k] -= 2
                    h[k, k] = pw[k] * (pw[k] - 1) * np.prod(y ** q)
                else:
                    if pw[k] == 0 or pw[l] == 0:
                        continue
                    q[k] -= 1
                    q[l] -= 1
                    h[k, l] = h[l, k] = pw[k] * pw[l] * np.prod(y ** q)
        return h

    return AnalyticTestFunction(value, grad, hess)


def polynomial(terms) -> AnalyticTestFunction:
    """Sum of (coefficient, powers) monomials."""
    out = None
    for coeff, powers in terms:
        term = float(coeff) * monomial(powers)
        out = term if out is None else out + term
    if out is None:
        raise ValueError("polynomial needs at least one term")
    return out


def constant(c: float, d: int) -> AnalyticTestFunction:
    return polynomial([(c, (0,) * (d + 1))])


def coordinate(k: int, d: int) -> AnalyticTestFunction:
    """y_k: k = 0 is t, k = 1..d are the spatial coordinates."""
    pw = [0] * (d + 1)
    pw[k] = 1
    return monomial(pw)


def gaussian(center, widths, amplitude: float = 1.0) -> AnalyticTestFunction:
    """A exp(-sum_k ((y_k - c_k) / w_k)^2) over y = (t, x)."""
    c = np.asarray(center, dtype=float)
    w = np.asarray(widths, dtype=float)
    a = 2.0 / w ** 2

    def value(y):
        z = y - c
        return amplitude * np.exp(-np.sum(z * z / w ** 2))

    def grad(y):
        z = y - c
        return -a * z * value(y)

    def hess(y):
        z = y - c
        v = value(y)
        return (np.outer(a * z, a * z) - np.diag(a)) * v

    return AnalyticTestFunction(value, grad, hess)


def cosine(wavevec, phase: float = 0.0,
           amplitude: float = 1.0) -> AnalyticTestFunction:
    """A cos(k . y + phase) over y = (t, x)."""
    k = np.asarray(wavevec, dtype=float)

    def value(y):
        return amplitude * np.cos(k @ y + phase)

    def grad(y):
        return -amplitude * np.sin(k @ y + phase) * k

    def hess(y):
        return -amplitude * np.cos(k @ y + phase) * np.outer(k, k)

    return AnalyticTestFunction(value, grad, hess)


def random_test_function(rng: np.random.Generator,
                         d: int = 2) -> AnalyticTestFunction:
    """A random Gaussian-times-cosine plus a low-order polynomial.

    Smooth everywhere with O(1) derivatives near the sampling region used in
    the identity sweeps.
    """
    center = rng.uniform(-2.0, 2.0, size=d + 1)
    widths = rng.uniform(1.0, 3.0, size=d + 1)
    amp = rng.uniform(-1.0, 1.0)
    g = gaussian(center, widths, amp if amp != 0.0 else 0.5)
    k = rng.uniform(-1.0, 1.0, size=d + 1)
    f = g * cosine(k, phase=rng.uniform(0, 2 * np.pi))
    powers = rng.integers(0, 3, size=d + 1)
    poly = polynomial([(rng.uniform(-0.5, 0.5), tuple(powers))])
    return f + poly
