"""Quadrature rules for integrals against the standard Gaussian measure."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..exceptions import ParameterError

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@lru_cache(maxsize=32)
def hermite_rule(order: int):
    """Nodes and weights with ``sum(w * f(z)) ~ int f(z) exp(-z^2/2) dz / sqrt(2 pi)``."""
    z, w = np.polynomial.hermite_e.hermegauss(order)
    w = w / np.sqrt(2.0 * np.pi)
    z.setflags(write=False)
    w.setflags(write=False)
    return z, w


def gauss_measure_integral(f, order=96):
    """Gauss-Hermite estimate of ``int Dz f(z)`` with ``Dz`` the standard normal density.

    ``f`` must accept a numpy array of nodes.
    """
    if order < 32:
        raise ParameterError(f"order must be >= 32, got {order}")
    z, w = hermite_rule(int(order))
    return float(np.dot(w, f(z)))


@lru_cache(maxsize=8)
def _legendre(order):
    return np.polynomial.legendre.leggauss(order)


def even_panel_rule(a, c, order=16, zmax=14.0):
    """Composite Gauss-Legendre rule for ``int Dz f(z^2)`` with f even in z.

    The EOS integrands are logistic functions of ``c + a z^2 / 2``; for ``a > 0``
    and ``c < 0`` they switch from 0 to 1 near ``z* = sqrt(-2c/a)`` over a width
    ``1/(a z*)``. Unit panels on ``[0, zmax]`` are refined around that switch so
    the rule stays accurate however sharp the step becomes, where a fixed
    Gauss-Hermite rule does not.

    Returns nodes on ``[0, zmax]`` and weights that already include the
    Gaussian density and the factor 2 from folding the real line.
    """
    x, wgl = _legendre(int(order))
    edges = [np.arange(0.0, zmax + 0.5, 1.0)]
    if a > 0 and c < 0:
        zs = np.sqrt(-2.0 * c / a)
        width = 1.0 / (a * zs)
        k = np.array([0.0, 1.0, 3.0, 10.0, 40.0])
        edges += [zs - k * width, zs + k * width]
    e = np.unique(np.clip(np.concatenate(edges), 0.0, zmax))
    lo, hi = e[:-1], e[1:]
    half = 0.5 * (hi - lo)
    z = (half[:, None] * x[None, :] + 0.5 * (hi + lo)[:, None]).ravel()
    w = (half[:, None] * wgl[None, :]).ravel() * (2.0 * _INV_SQRT_2PI) * np.exp(-0.5 * z * z)
    return z, w
