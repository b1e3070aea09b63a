"""Mehler kernel of the rotated harmonic oscillator at complex time.

The kernel of ``exp(-tau H_theta)`` is

    M(x, y) = sqrt(w1/pi) * exp(2 w1 x y - w2 (x^2 + y^2))

with ``w1 = (e^{i theta}/2) csch(2 tau)`` and ``w2 = (e^{i theta}/2) coth(2 tau)``.
All quantities are iπ-periodic in ``tau``; the imaginary part is reduced to
``(-pi/2, pi/2]`` before evaluation.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

import numpy as np

from . import regions
from .errors import (OutsideSemiModule, PoleAtTau, QuadratureBudgetExceeded,
                     RegimeUndefined)
from .quadrature import composite_gauss_legendre

_EPS = np.finfo(float).eps
_CROSS_CHECK_RTOL = 1e-12


@dataclass(frozen=True)
class MehlerCoeffs:
    """Coefficients at ``(theta, tau)``.

    ``w_plus = w2 + w1`` and ``w_minus = w2 - w1`` are evaluated directly
    (as ``(e^{i theta}/2) coth tau`` and ``(e^{i theta}/2) tanh tau``) and
    ``gap = r2**2 - r1**2`` as the product of their real parts, which avoids
    the cancellation of the naive difference near the boundary.
    """

    theta: float
    tau: complex
    lam: complex
    w1: complex
    w2: complex
    w_plus: complex
    w_minus: complex

    @property
    def r1(self) -> float:
        return self.w1.real

    @property
    def r2(self) -> float:
        return self.w2.real

    @property
    def gap(self) -> float:
        return self.w_plus.real * self.w_minus.real


def reduce_tau(tau: complex) -> complex:
    tau = complex(tau)
    return complex(tau.real, math.remainder(tau.imag, math.pi))


def _check_pole(tau: complex) -> None:
    two_tau = 2.0 * tau
    nearest = round(two_tau.imag / math.pi)
    dist = abs(two_tau - 1j * math.pi * nearest)
    if dist < 1e-300 or dist <= 8 * _EPS * max(1.0, abs(two_tau)):
        raise PoleAtTau(f"2*tau = {two_tau!r} sits on the pole lattice i*pi*Z")
    if abs(two_tau.real) < 300 and abs(cmath.sinh(two_tau)) < 1e-300:
        raise PoleAtTau(f"|sinh(2 tau)| underflows at tau = {tau!r}")


def _rational_form(theta, tau):
    phase = cmath.exp(1j * theta)
    sign = 1.0 if tau.real >= 0 else -1.0
    st = sign * tau
    mu = cmath.exp(-2.0 * st)
    one_minus_mu = -complex(np.expm1(-2.0 * st))
    one_minus_mu2 = -complex(np.expm1(-4.0 * st))
    w1 = sign * phase * mu / one_minus_mu2
    w2 = sign * 0.5 * phase * (1.0 + mu * mu) / one_minus_mu2
    w_plus = sign * 0.5 * phase * (1.0 + mu) / one_minus_mu
    w_minus = sign * 0.5 * phase * one_minus_mu / (1.0 + mu)
    return w1, w2, w_plus, w_minus


def _hyperbolic_form(theta, tau):
    phase = cmath.exp(1j * theta)
    s, c = cmath.sinh(2 * tau), cmath.cosh(2 * tau)
    return 0.5 * phase / s, 0.5 * phase * c / s


def coeffs(theta: float, tau: complex) -> MehlerCoeffs:
    theta = regions._check_theta(theta)
    original = complex(tau)
    if not cmath.isfinite(original):
        raise ValueError("tau must be finite")
    tau = reduce_tau(original)
    _check_pole(tau)
    w1, w2, w_plus, w_minus = _rational_form(theta, tau)
    if abs(tau.real) < 300:
        h1, h2 = _hyperbolic_form(theta, tau)
        for a, b in ((w1, h1), (w2, h2)):
            if abs(a - b) > _CROSS_CHECK_RTOL * max(abs(a), abs(b)):
                raise ArithmeticError(f"rational/hyperbolic mismatch at tau={original!r}")
    lam = cmath.exp(-2.0 * tau)
    return MehlerCoeffs(theta, original, lam, w1, w2, w_plus, w_minus)


def kernel(theta: float, tau: complex, x, y):
    """Principal-branch kernel value; broadcasts over array ``x`` and ``y``."""
    c = coeffs(theta, tau)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    prefactor = cmath.sqrt(c.w1 / math.pi)
    value = prefactor * np.exp(2.0 * c.w1 * x * y - c.w2 * (x * x + y * y))
    return value[()] if value.ndim == 0 else value


def kernel_modulus(theta: float, tau: complex, x, y):
    """``|M|`` from the completed square in ``y``."""
    c = coeffs(theta, tau)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r1, r2 = c.r1, c.r2
    gap = c.gap
    exponent = -r2 * (r1 * x / r2 - y) ** 2 - (gap / r2) * x * x
    return math.sqrt(abs(c.w1) / math.pi) * np.exp(exponent)


def _require_inside(theta, tau) -> MehlerCoeffs:
    c = coeffs(theta, tau)
    if not (c.r2 > 0 and c.w_plus.real > 0 and c.w_minus.real > 0):
        raise OutsideSemiModule(f"tau = {complex(tau)!r} is outside the semi-module at theta={theta}")
    return c


def hs_norm_sq(theta: float, tau: complex) -> float:
    """Squared Hilbert-Schmidt norm ``|w1| / (2 sqrt(r2^2 - r1^2))``."""
    c = _require_inside(theta, tau)
    return abs(c.w1) / (2.0 * math.sqrt(c.gap))


def _gauss_window(kappa: float, x0: float, x1: float) -> float:
    """``int_{x0}^{x1} exp(-kappa x^2) dx`` with erfc on same-sign tails."""
    root = math.sqrt(kappa)
    scale = 0.5 * math.sqrt(math.pi) / root
    if x0 >= 0:
        return scale * (math.erfc(root * x0) - math.erfc(root * x1))
    if x1 <= 0:
        return scale * (math.erfc(-root * x1) - math.erfc(-root * x0))
    return scale * (math.erf(root * x1) - math.erf(root * x0))


def windowed_hs_norm_sq(theta: float, omega: float, t: float, x0: float, x1: float) -> float:
    """Contribution of ``x0 <= x <= x1`` to the squared Hilbert-Schmidt norm.

    Integrating ``|M|^2`` over ``y`` first leaves
    ``|w1| / sqrt(2 pi r2) * exp(-2 (r2^2 - r1^2) x^2 / r2)``.
    """
    if not x0 <= x1:
        raise ValueError("window requires x0 <= x1")
    if x0 == x1:
        return 0.0
    c = _require_inside(theta, cmath.rect(t, omega))
    kappa = 2.0 * c.gap / c.r2
    return abs(c.w1) / math.sqrt(2.0 * math.pi * c.r2) * _gauss_window(kappa, x0, x1)


class Quantity(str, enum.Enum):
    ABS_W1 = "AbsW1"
    R2 = "R2"
    INV_GAP = "InvR2SqMinusR1Sq"
    HS_NORM_SQ = "HsNormSq"


class Regime(str, enum.Enum):
    INTERIOR = "Interior"
    BOUNDARY = "Boundary"


@dataclass(frozen=True)
class AsympLaw:
    """Leading small-``t`` behaviour ``coefficient * t**exponent``."""

    exponent: int
    coefficient: float
    regime: Regime


def asymp_law(theta: float, omega: float, quantity, boundary_tol: float = 1e-9) -> AsympLaw:
    """Leading term as ``t -> 0+`` of a quantity evaluated at ``tau = e^{i omega} t``.

    Coefficients were derived from the Laurent expansions
    ``coth(tau) = 1/tau + tau/3 + ...`` and ``tanh(tau) = tau - tau^3/3 + ...``.
    On the boundary ray where ``cos(omega - theta)`` vanishes the leading
    ``1/t`` term of ``r2`` cancels and the linear term takes over.
    """
    theta = regions._check_theta(theta)
    quantity = Quantity(quantity)
    edge = regions.HALF_PI - abs(theta)
    if abs(omega) > edge + boundary_tol or abs(abs(omega) - regions.HALF_PI) <= boundary_tol:
        raise RegimeUndefined(f"omega={omega} outside |omega| <= pi/2 - |theta| = {edge}")
    boundary = abs(abs(omega) - edge) <= boundary_tol
    regime = Regime.BOUNDARY if boundary else Regime.INTERIOR
    sin2 = abs(math.sin(2.0 * theta))
    # the ray where the leading part of Re(w2) vanishes
    degenerate = boundary and abs(math.cos(omega - theta)) <= 1e-6

    if quantity is Quantity.ABS_W1:
        return AsympLaw(-1, 0.25, regime)
    if quantity is Quantity.R2:
        if degenerate:
            return AsympLaw(1, sin2 / 3.0, regime)
        return AsympLaw(-1, math.cos(omega - theta) / 4.0, regime)
    if quantity is Quantity.INV_GAP:
        if boundary:
            return AsympLaw(-2, 12.0 / sin2**2, regime)
        return AsympLaw(0, 4.0 / (math.cos(theta) ** 2 - math.sin(omega) ** 2), regime)
    if boundary:
        return AsympLaw(-2, math.sqrt(3.0) / (4.0 * sin2), regime)
    return AsympLaw(-1, 1.0 / (4.0 * math.sqrt(math.cos(theta) ** 2 - math.sin(omega) ** 2)), regime)


def evaluate_quantity(theta: float, tau: complex, quantity) -> float:
    quantity = Quantity(quantity)
    c = coeffs(theta, tau)
    if quantity is Quantity.ABS_W1:
        return abs(c.w1)
    if quantity is Quantity.R2:
        return c.r2
    if quantity is Quantity.INV_GAP:
        return 1.0 / c.gap
    return hs_norm_sq(theta, tau)


@dataclass(frozen=True)
class QuadSpec:
    order: int = 64
    panel_width: float = 0.5
    half_width: float = 12.0
    budget: float = 1e-8


@dataclass(frozen=True)
class SemigroupAction:
    x: np.ndarray
    values: np.ndarray
    error_estimate: float


def apply_semigroup(theta: float, tau: complex, f, x, quad: QuadSpec = QuadSpec()) -> SemigroupAction:
    """Evaluate ``(e^{-tau H_theta} f)(x) = int M(x, y) f(y) dy`` on ``[-L, L]``.

    ``f`` is a vectorised callable.  The error estimate adds the difference to a
    half-order rule and a Gaussian tail bound past ``+-L``.
    """
    c = _require_inside(theta, tau)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    length = quad.half_width
    panels = max(1, int(math.ceil(2 * length / quad.panel_width)))
    edges = np.linspace(-length, length, panels + 1)

    def integrate(order):
        y, w = composite_gauss_legendre(edges, order)
        fy = np.asarray(f(y), dtype=complex)
        return kernel(theta, tau, x[:, None], y[None, :]) @ (w * fy)

    values = integrate(quad.order)
    coarse = integrate(max(2, quad.order // 2))
    quad_err = float(np.max(np.abs(values - coarse))) if values.size else 0.0

    ends = np.array([-length, length])
    fend = np.abs(np.asarray(f(ends), dtype=complex))
    centre = np.abs(c.r1 * x / c.r2)
    reach = np.maximum(length - centre, 1e-300)
    tail = np.max(np.abs(kernel(theta, tau, x[:, None], ends[None, :])) * fend[None, :], axis=1)
    tail_err = float(np.max(tail / (2 * c.r2 * reach))) if x.size else 0.0
    estimate = quad_err + tail_err
    if estimate > quad.budget:
        raise QuadratureBudgetExceeded(f"estimated error {estimate:.3e} exceeds budget {quad.budget:.3e}")
    return SemigroupAction(x, values, estimate)
