"""Eigenvalue asymptotics, pseudospectra and resolvent decay of truncated operators.

Everything reported here is filtered by truncation doubling: an eigenvalue or
a resolvent norm counts only if it is reproduced by the same operator at
twice the basis size.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import linalg
from .errors import InsufficientTrustedEigenvalues, SingularShift, TrustedWindowEmpty
from .linalg import as_array

EIGEN_RTOL = 1e-4
RAY_RTOL = 0.05
K_START = 3


@dataclass
class SpectralReport:
    eigenvalues: list
    alpha_seq: list
    beta_plus_seq: list
    beta_minus_seq: list
    K_alpha: Optional[float]
    K_beta: Optional[float]
    trusted_window: tuple
    exponent_alpha: Optional[float] = None
    exponent_beta_plus: Optional[float] = None
    exponent_beta_minus: Optional[float] = None
    flags: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [[z.real, z.imag] for z in self.eigenvalues],
            "alpha_seq": self.alpha_seq, "beta_plus_seq": self.beta_plus_seq,
            "beta_minus_seq": self.beta_minus_seq, "K_alpha": self.K_alpha, "K_beta": self.K_beta,
            "trusted_window": list(self.trusted_window), "exponent_alpha": self.exponent_alpha,
            "exponent_beta_plus": self.exponent_beta_plus, "exponent_beta_minus": self.exponent_beta_minus,
            "flags": self.flags, "meta": self.meta,
        }


def trusted_eigenvalues(coarse, refined, rtol: float = EIGEN_RTOL) -> np.ndarray:
    """Longest prefix (by real part) of ``coarse`` eigenvalues reproduced by ``refined``."""
    lam = linalg.eigenvalues(coarse)
    ref = linalg.eigenvalues(refined)
    kept = []
    for z in lam:
        if np.min(np.abs(ref - z)) > rtol * max(1.0, abs(z)):
            break
        kept.append(z)
    return np.array(kept, dtype=complex)


def _min_ratio(values, power) -> Optional[float]:
    n = np.arange(1, len(values) + 1, dtype=float)
    sel = n >= K_START
    if not sel.any():
        return None
    return float(np.min(np.asarray(values)[sel] / n[sel] ** power))


def _growth_exponent(values) -> Optional[float]:
    n = np.arange(1, len(values) + 1, dtype=float)
    v = np.asarray(values, dtype=float)
    sel = (n >= K_START) & (v > 0)
    if sel.sum() < 3:
        return None
    return float(np.polyfit(np.log(n[sel]), np.log(v[sel]), 1)[0])


def spectral_report(a, a_refined, theta: float, count: int, rtol: float = EIGEN_RTOL) -> SpectralReport:
    """Sequences ``alpha_n = Re lambda_n`` and ``beta_n^+- = Re(e^{+-i(pi/2 - |theta|)} lambda_n)``.

    ``n`` counts from 1 in the statistics; ``K_alpha = min alpha_n / n`` and
    ``K_beta = min beta_n^+- / sqrt(n)`` are taken over ``n >= 3``.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    trusted = trusted_eigenvalues(a, a_refined, rtol)
    if trusted.size < count:
        raise InsufficientTrustedEigenvalues(f"only {trusted.size} trusted eigenvalues, {count} requested")
    lam = trusted[:count]
    rot = math.pi / 2 - abs(theta)
    alpha = np.sort(lam.real)
    beta_plus = np.sort((np.exp(1j * rot) * lam).real)
    beta_minus = np.sort((np.exp(-1j * rot) * lam).real)
    flags = []
    if theta == 0:
        flags.append("theta-zero-excluded")
    k_alpha = _min_ratio(alpha, 1.0)
    kb = [_min_ratio(beta_plus, 0.5), _min_ratio(beta_minus, 0.5)]
    k_beta = None if kb[0] is None else min(kb)
    return SpectralReport(
        eigenvalues=lam.tolist(), alpha_seq=alpha.tolist(), beta_plus_seq=beta_plus.tolist(),
        beta_minus_seq=beta_minus.tolist(), K_alpha=k_alpha, K_beta=k_beta,
        trusted_window=(0, int(trusted.size)), exponent_alpha=_growth_exponent(alpha),
        exponent_beta_plus=_growth_exponent(beta_plus), exponent_beta_minus=_growth_exponent(beta_minus),
        flags=flags,
        meta={"N": int(as_array(a).shape[0]), "N_refined": int(as_array(a_refined).shape[0]),
              "rtol": rtol, "theta": theta, "K_from_n": K_START},
    )


@dataclass
class PseudospecGrid:
    rectangle: tuple
    resolution: tuple
    values: np.ndarray

    @property
    def re(self) -> np.ndarray:
        return np.linspace(self.rectangle[0], self.rectangle[1], self.resolution[0])

    @property
    def im(self) -> np.ndarray:
        return np.linspace(self.rectangle[2], self.rectangle[3], self.resolution[1])

    def rows(self):
        """``(re, im, sigma_min)`` per node, real part varying fastest."""
        for j, y in enumerate(self.im):
            for i, x in enumerate(self.re):
                yield float(x), float(y), float(self.values[j, i])


def pseudospectrum(a, rectangle: Sequence[float], resolution: Sequence[int]) -> PseudospecGrid:
    """``sigma_min(A - z)`` on a uniform grid; ``values[j, i]`` sits at ``(re[i], im[j])``."""
    nx, ny = (int(v) for v in resolution)
    if nx < 2 or ny < 2:
        raise ValueError("resolution must be at least 2 x 2")
    re0, re1, im0, im1 = (float(v) for v in rectangle)
    if not (re0 < re1 and im0 < im1):
        raise ValueError("rectangle must satisfy re_min < re_max and im_min < im_max")
    arr = as_array(a).astype(complex)
    eye = np.eye(arr.shape[0])
    values = np.empty((ny, nx))
    for j, y in enumerate(np.linspace(im0, im1, ny)):
        for i, x in enumerate(np.linspace(re0, re1, nx)):
            values[j, i] = linalg.sigma_min(arr - complex(x, y) * eye)
    return PseudospecGrid((re0, re1, im0, im1), (nx, ny), values)


def resolvent_norm(a, z: complex) -> float:
    """``||(A - z)^{-1}||_inf = 1 / sigma_min(A - z)``."""
    arr = as_array(a)
    smallest = linalg.sigma_min(arr - z * np.eye(arr.shape[0]))
    return math.inf if smallest == 0 else 1.0 / smallest


class RayDirection(str, enum.Enum):
    PLUS_THETA = "PlusTheta"
    MINUS_THETA = "MinusTheta"


@dataclass
class RayScan:
    direction: RayDirection
    beta: float
    rho_values: list
    norms: list
    norms_refined: list
    deltas: list
    trusted: list

    @property
    def trusted_norms(self) -> list:
        return [v for v, ok in zip(self.norms, self.trusted) if ok]

    @property
    def strictly_decreasing(self) -> bool:
        vals = self.trusted_norms
        return all(b < a for a, b in zip(vals, vals[1:]))

    @property
    def decrease_fraction(self) -> float:
        vals = self.trusted_norms
        if len(vals) < 2:
            return 1.0
        return sum(b < a for a, b in zip(vals, vals[1:])) / (len(vals) - 1)

    @property
    def max_delta(self) -> float:
        d = [v for v, ok in zip(self.deltas, self.trusted) if ok]
        return max(d) if d else math.nan


def _scan(a, a_refined, direction, theta, beta, rhos, rtol):
    sign = 1 if direction is RayDirection.PLUS_THETA else -1
    shifts = [np.exp(sign * 1j * theta) * rho + beta for rho in rhos]
    norms = [resolvent_norm(a, z) for z in shifts]
    refined = [resolvent_norm(a_refined, z) for z in shifts]
    deltas = [abs(n - r) / r for n, r in zip(norms, refined)]
    trusted = []
    ok = True
    for d in deltas:
        ok = ok and d < rtol
        trusted.append(ok)
    if not any(trusted):
        raise TrustedWindowEmpty(f"no ladder point on the {direction.value} ray is stable under doubling")
    return RayScan(direction, float(beta), list(map(float, rhos)), norms, refined, deltas, trusted)


def resolvent_ray(a, a_refined, theta: float, beta: float, rho_ladder: Sequence[float],
                  rtol: float = RAY_RTOL) -> tuple[RayScan, RayScan]:
    """Resolvent norms at ``e^{+-i theta} rho + beta`` for both rays.

    A ladder point is trusted while it and every smaller point change by less
    than ``rtol`` under doubling of the truncation.
    """
    rhos = np.asarray(rho_ladder, dtype=float)
    if rhos.size == 0 or np.any(rhos <= 0) or np.any(np.diff(rhos) <= 0):
        raise ValueError("rho ladder must be positive and increasing")
    return (_scan(a, a_refined, RayDirection.PLUS_THETA, theta, beta, rhos, rtol),
            _scan(a, a_refined, RayDirection.MINUS_THETA, theta, beta, rhos, rtol))


@dataclass(frozen=True)
class SchattenDecay:
    value: float
    delta: Optional[float]
    n_basis: int


def _inverse_schatten(a, z, q) -> float:
    arr = as_array(a).astype(complex)
    sv = linalg.singular_values(arr - z * np.eye(arr.shape[0]))
    scale = max(1.0, float(sv[0]))
    if sv[-1] <= 64 * np.finfo(float).eps * scale * arr.shape[0]:
        raise SingularShift(f"z = {z!r} is numerically an eigenvalue")
    return linalg.schatten_from_singular_values(1.0 / sv, q)


def resolvent_schatten_decay(a, z: complex, q, a_refined=None) -> SchattenDecay:
    """``||(A - z)^{-1}||_q``; ``delta`` is the relative change against ``a_refined``."""
    value = _inverse_schatten(a, z, q)
    delta = None
    if a_refined is not None:
        ref = _inverse_schatten(a_refined, z, q)
        delta = abs(ref - value) / ref
    return SchattenDecay(value, delta, int(as_array(a).shape[0]))
