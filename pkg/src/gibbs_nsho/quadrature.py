"""Gauss rules and graded composite meshes shared by the integrators."""

from __future__ import annotations

import functools
import math

import numpy as np
from numpy.polynomial.legendre import leggauss


@functools.lru_cache(maxsize=64)
def _leggauss(order: int):
    x, w = leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(order: int, a: float = -1.0, b: float = 1.0):
    x, w = _leggauss(order)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def composite_gauss_legendre(edges, order: int):
    """Nodes and weights of a Gauss-Legendre rule on each ``[edges[j], edges[j+1]]``."""
    edges = np.asarray(edges, dtype=float)
    x, w = _leggauss(order)
    left, right = edges[:-1, None], edges[1:, None]
    half = 0.5 * (right - left)
    nodes = left + half * (x[None, :] + 1.0)
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def graded_edges(length: float, panels: int, exponent: float, two_sided: bool = False):
    """Panel edges on ``[0, length]`` clustered like ``(j/J)**exponent`` near 0.

    With ``two_sided`` the map ``u**p / (u**p + (1-u)**p)`` clusters toward both ends.
    """
    u = np.linspace(0.0, 1.0, panels + 1)
    if two_sided:
        up = u**exponent
        down = (1.0 - u) ** exponent
        g = up / (up + down)
    else:
        g = u**exponent
    g[0], g[-1] = 0.0, 1.0
    return length * g


def geometric_edges(lower: float, upper: float, ratio: float = 2.0):
    """Edges ``0, lower, lower*ratio, ..., upper`` for a geometrically graded start."""
    count = max(1, int(math.ceil(math.log(upper / lower) / math.log(ratio))))
    inner = lower * ratio ** np.arange(count)
    return np.concatenate([[0.0], inner[inner < upper], [upper]])


def barycentric_weights(nodes):
    nodes = np.asarray(nodes, dtype=float)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / np.prod(diff, axis=1)


def barycentric_matrix(nodes, bary, points):
    """Matrix mapping values at ``nodes`` to interpolated values at ``points``."""
    nodes = np.asarray(nodes, dtype=float)
    points = np.atleast_1d(np.asarray(points, dtype=float))
    diff = points[:, None] - nodes[None, :]
    exact = diff == 0.0
    diff[exact] = 1.0
    terms = bary[None, :] / diff
    out = terms / terms.sum(axis=1, keepdims=True)
    hit = exact.any(axis=1)
    if hit.any():
        out[hit] = exact[hit].astype(float)
    return out
