"""Membership tests for the complex regions attached to the rotated oscillator.

Every test returns a :class:`RegionVerdict` carrying a signed margin.  A
positive margin means the point satisfies all constraints with that much
slack; a negative margin measures the worst violation.  Open regions
(sectors, the semi-module) require ``margin > tolerance``; closed regions
(numerical range, pseudospectral enclosures) accept ``margin >= -tolerance``.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import NonConvergence, PoleAtTau

DEFAULT_TOLERANCE = 1e-12
HALF_PI = 0.5 * math.pi


def _check_theta(theta: float) -> float:
    theta = float(theta)
    if not math.isfinite(theta) or abs(theta) >= HALF_PI:
        raise ValueError(f"theta must satisfy |theta| < pi/2, got {theta!r}")
    return theta


@dataclass(frozen=True)
class Sector:
    """The open sector ``{r e^{i w}: r > 0, -alpha < w < beta}``."""

    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("alpha", "beta"):
            value = getattr(self, name)
            if not (0.0 < value <= HALF_PI + 1e-15):
                raise ValueError(f"{name} must lie in (0, pi/2], got {value!r}")


@dataclass(frozen=True)
class SemiModuleQuery:
    theta: float
    tau: complex
    tolerance: float = DEFAULT_TOLERANCE

    def __post_init__(self):
        _check_theta(self.theta)
        if not math.isfinite(self.tolerance) or self.tolerance < 0:
            raise ValueError("tolerance must be finite and non-negative")
        if not cmath.isfinite(complex(self.tau)):
            raise ValueError("tau must be finite")


@dataclass(frozen=True)
class RegionVerdict:
    inside: bool
    margin: float
    flags: tuple = field(default=())


class SemiModuleMethod(str, enum.Enum):
    ARG_TANH = "argtanh"
    MEHLER_REALS = "mehler-reals"


def in_sector(tau: complex, sector: Sector, tolerance: float = DEFAULT_TOLERANCE) -> RegionVerdict:
    tau = complex(tau)
    if not cmath.isfinite(tau):
        raise ValueError("tau must be finite")
    if tau == 0:
        return RegionVerdict(False, -math.inf)
    angle = cmath.phase(tau)
    margin = min(angle + sector.alpha, sector.beta - angle)
    return RegionVerdict(margin > tolerance, margin)


def semimodule_margin(theta: float, tau: complex) -> float:
    """Angular slack ``(pi/2 - |theta|) - |arg tanh tau|``.

    Negative whenever ``Re tau <= 0`` because then ``Re tanh tau <= 0``.
    """
    value = cmath.tanh(complex(tau))
    if value == 0:
        return -math.inf
    return (HALF_PI - abs(theta)) - abs(cmath.phase(value))


def in_semimodule(query: SemiModuleQuery, method=SemiModuleMethod.ARG_TANH) -> RegionVerdict:
    method = SemiModuleMethod(method)
    theta, tau, tol = query.theta, complex(query.tau), query.tolerance
    if method is SemiModuleMethod.ARG_TANH:
        margin = semimodule_margin(theta, tau)
        inside = tau.real > 0 and margin > tol
        return RegionVerdict(inside, margin)

    # local import: mehler depends on this module
    from .mehler import coeffs

    c = coeffs(theta, tau)
    # cosines of the arguments of w2+w1, w2-w1 and w2; all positive iff inside
    margin = min(
        c.w_plus.real / abs(c.w_plus),
        c.w_minus.real / abs(c.w_minus),
        c.r2 / abs(c.w2),
    )
    return RegionVerdict(margin > tol, margin)


def numrange_coordinates(z: complex, theta: float) -> tuple[float, float]:
    """Solve ``z = e^{-i theta} s + e^{i theta} t`` for real ``(s, t)``."""
    z = complex(z)
    total = z.real / math.cos(theta)
    diff = z.imag / math.sin(theta)
    return 0.5 * (total - diff), 0.5 * (total + diff)


def in_numrange(z: complex, theta: float, tolerance: float = DEFAULT_TOLERANCE) -> RegionVerdict:
    """Numerical range of the rotated oscillator, with ``s, t > 0``.

    The margin is ``sqrt(s t) - 1/2`` (or ``-min(s, t)`` when a coordinate is
    non-positive).  At ``theta = 0`` the region degenerates to ``[1, inf)``.
    """
    theta = _check_theta(theta)
    z = complex(z)
    if theta == 0.0:
        margin = z.real - 1.0 if abs(z.imag) <= tolerance else -abs(z.imag)
        return RegionVerdict(margin >= -tolerance, margin)
    s, t = numrange_coordinates(z, theta)
    if s <= 0 or t <= 0:
        margin = min(s, t)
        if margin == 0:
            margin = -0.5
        return RegionVerdict(False, margin)
    margin = math.sqrt(s * t) - 0.5
    return RegionVerdict(margin >= -tolerance, margin)


def numrange_boundary_points(theta: float, n: int, s_range=(1e-2, 1e2)) -> np.ndarray:
    """Points ``e^{-i theta} s + e^{i theta}/(4 s)`` on the hyperbola ``s t = 1/4``."""
    theta = _check_theta(theta)
    s = np.geomspace(s_range[0], s_range[1], n)
    return np.exp(-1j * theta) * s + np.exp(1j * theta) / (4.0 * s)


def _rq_radius(w: complex, q: float) -> float | None:
    """Root ``r`` of ``|w - r| = r**q`` on ``[0, Re w]``, if any."""
    if w.real <= 0:
        return None

    def gap(r):
        return abs(w - r) - r**q

    upper = w.real
    if gap(upper) > 0:
        return None
    if gap(0.0) <= 0:
        return 0.0
    try:
        return brentq(gap, 0.0, upper, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    except RuntimeError as exc:
        raise NonConvergence(str(exc)) from exc


def in_Rq(z: complex, q: float, theta: float, shift: float = 0.0,
          tolerance: float = 1e-10) -> RegionVerdict:
    """Membership in ``shift + {r + r**q e^{i w}: r >= 0, |w| <= |theta|}``.

    For a candidate representation the angle is pinned down by ``r``:
    ``|w - r| = r**q``.  Along ``[0, Re w]`` the difference of the two sides is
    strictly decreasing, and a root outside that interval would force
    ``|arg(w - r)| > pi/2``, so a single bracketed solve decides membership.
    The margin is the angular slack ``|theta| - |arg(w - r)|``.
    """
    if not q > 1:
        raise ValueError("q must exceed 1")
    w = complex(z) - shift
    if w == 0:
        return RegionVerdict(True, abs(theta))
    try:
        r = _rq_radius(w, q)
    except NonConvergence:
        return RegionVerdict(False, math.nan, ("non-convergence",))
    if r is None:
        return RegionVerdict(False, -math.inf if w.real <= 0 else abs(theta) - HALF_PI)
    rest = w - r
    angle = 0.0 if rest == 0 else abs(cmath.phase(rest))
    margin = abs(theta) - angle
    return RegionVerdict(margin >= -tolerance, margin)


def rq_boundary_points(q: float, theta: float, shift: float, r_max: float, n: int) -> np.ndarray:
    """Two boundary curves ``shift + r + r**q e^{+-i|theta|}`` sampled on ``[0, r_max]``."""
    r = np.linspace(0.0, r_max, n)
    upper = shift + r + r**q * np.exp(1j * abs(theta))
    lower = shift + r + r**q * np.exp(-1j * abs(theta))
    return np.concatenate([upper, lower[::-1]])


def sample_grid(predicate, re_range, im_range, nx: int, ny: int):
    """Evaluate a verdict-returning predicate on a rectangular grid.

    Returns ``(re, im, inside, margin)`` as flat arrays in row-major order
    (imaginary part outer).
    """
    re = np.linspace(re_range[0], re_range[1], nx)
    im = np.linspace(im_range[0], im_range[1], ny)
    rows = []
    for y in im:
        for x in re:
            try:
                verdict = predicate(complex(x, y))
                rows.append((x, y, verdict.inside, verdict.margin))
            except PoleAtTau:
                rows.append((x, y, False, math.nan))
    arr = np.array(rows, dtype=object)
    return (arr[:, 0].astype(float), arr[:, 1].astype(float),
            arr[:, 2].astype(bool), arr[:, 3].astype(float))
