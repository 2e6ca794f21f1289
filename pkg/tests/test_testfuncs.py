import numpy as np
import pytest

import hypwave.testfuncs as tf


def _fd_grad(f, t, x, eps=1e-5):
    out = np.empty(1 + x.size)
    out[0] = (f.value(t + eps, x) - f.value(t - eps, x)) / (2 * eps)
    for i in range(x.size):
        dx = np.zeros_like(x)
        dx[i] = eps
        out[1 + i] = (f.value(t, x + dx) - f.value(t, x - dx)) / (2 * eps)
    return out


def _fd_hess(f, t, x, eps=1e-4):
    n = 1 + x.size
    out = np.empty((n, n))

    def at(dy):
        return f.value(t + dy[0], x + dy[1:])

    for i in range(n):
        for j in range(n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i] = eps
            ej[j] = eps
            out[i, j] = (at(ei + ej) - at(ei - ej)
                         - at(ej - ei) + at(-ei - ej)) / (4 * eps * eps)
    return out


def test_polynomial_values_and_derivs():
    # f = 2 t^2 x1 - x2^3
    f = tf.polynomial([(2.0, (2, 1, 0)), (-1.0, (0, 0, 3))])
    t, x = 3.0, np.array([1.5, -2.0])
    assert f.value(t, x) == pytest.approx(2 * 9 * 1.5 + 8.0)
    g = f.grad(t, x)
    np.testing.assert_allclose(g, [2 * 2 * t * 1.5, 2 * t * t,
                                   -3 * x[1] ** 2])
    h = f.hess(t, x)
    assert h[0, 1] == pytest.approx(4 * t)
    assert h[2, 2] == pytest.approx(-6 * x[1])


def test_constant_function():
    f = tf.constant(7.0, d=2)
    assert f.value(10.0, np.array([1.0, 2.0])) == 7.0
    np.testing.assert_allclose(f.grad(10.0, np.array([1.0, 2.0])), 0.0)


@pytest.mark.parametrize("maker", [
    lambda: tf.gaussian(center=(2.5, 0.3, -1.0), widths=(1.0, 0.7, 1.3),
                        amplitude=0.8),
    lambda: tf.cosine(wavevec=(0.5, -1.0, 0.7), phase=0.3, amplitude=1.2),
    lambda: tf.monomial((1, 2, 1)),
    lambda: tf.scaled(tf.gaussian(center=(2.0, 0.0, 0.0),
                                  widths=(1.0, 1.0, 1.0)), 3.0),
])
def test_analytic_derivatives_match_finite_differences(maker):
    f = maker()
    t, x = 2.7, np.array([0.4, -0.9])
    np.testing.assert_allclose(f.grad(t, x), _fd_grad(f, t, x),
                               rtol=1e-7, atol=1e-7)
    np.testing.assert_allclose(f.hess(t, x), _fd_hess(f, t, x),
                               rtol=1e-5, atol=1e-5)


def test_fd_convergence_is_second_order():
    # the central-difference error of a smooth member shrinks ~4x per halving
    f = tf.gaussian(center=(2.0, 0.5, 0.0), widths=(0.8, 1.0, 1.1))
    t, x = 2.4, np.array([0.2, 0.6])
    exact = f.grad(t, x)
    errs = []
    for eps in (2e-3, 1e-3, 5e-4):
        errs.append(np.max(np.abs(_fd_grad(f, t, x, eps=eps) - exact)))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.1)


def test_random_family_derivatives(rng):
    for _ in range(25):
        f = tf.random_test_function(rng, d=2)
        t = rng.uniform(2.0, 8.0)
        x = rng.uniform(-3.0, 3.0, 2)
        np.testing.assert_allclose(f.grad(t, x), _fd_grad(f, t, x),
                                   rtol=1e-6, atol=1e-6)


def test_random_family_d3(rng):
    f = tf.random_test_function(rng, d=3)
    x = np.array([0.5, -0.2, 0.8])
    g = f.grad(3.0, x)
    assert g.shape == (4,)
    np.testing.assert_allclose(g, _fd_grad(f, 3.0, x), rtol=1e-6, atol=1e-6)
