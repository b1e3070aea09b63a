"""Diagonal toy generators with exactly computable semigroup norms.

``T = diag(n)`` with perturbations ``A_alpha = T**alpha`` gives

    ||A_alpha e^{-Tt}||_q**q = sum_n n**(alpha q) e^{-t q n} = Li_{-alpha q}(e^{-t q}).

The cubic generator ``T = diag(i n**3 + n)`` shows resolvent decay without
a Gibbs property for its bounded-looking perturbations ``A_b = diag(b n)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NonPositiveTime, SpectralBoundViolated

_CHUNK = 1 << 15
_TAIL_RTOL = 1e-16


class DiagonalKind(str, enum.Enum):
    HARMONIC_LIKE = "HarmonicLike"
    CUBIC_COUNTEREXAMPLE = "CubicCounterexample"
    CUSTOM = "Custom"


@dataclass(frozen=True)
class DiagonalGenerator:
    kind: DiagonalKind
    rule: Optional[Callable] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", DiagonalKind(self.kind))
        if self.kind is DiagonalKind.CUSTOM and self.rule is None:
            raise ValueError("custom generators need a rule")

    def eigenvalues(self, n):
        n = np.asarray(n, dtype=float)
        if self.kind is DiagonalKind.HARMONIC_LIKE:
            return n.astype(complex)
        if self.kind is DiagonalKind.CUBIC_COUNTEREXAMPLE:
            return n + 1j * n**3
        return np.asarray(self.rule(n), dtype=complex)


HARMONIC_LIKE = DiagonalGenerator(DiagonalKind.HARMONIC_LIKE)
CUBIC_COUNTEREXAMPLE = DiagonalGenerator(DiagonalKind.CUBIC_COUNTEREXAMPLE)


@dataclass(frozen=True)
class GrowthBound:
    phi: float


def growth_bound(generator: DiagonalGenerator, n_max: int = 10_000) -> GrowthBound:
    """``phi = -inf_n Re lambda_n``; exact for the catalogued kinds, sampled otherwise."""
    if generator.kind is not DiagonalKind.CUSTOM:
        return GrowthBound(-1.0)
    values = generator.eigenvalues(np.arange(1, n_max + 1))
    return GrowthBound(-float(np.min(values.real)))


def _check_time(t):
    if not t > 0:
        raise NonPositiveTime(f"t must be positive, got {t}")


def trace_norm_semigroup(t: float) -> float:
    """``||e^{-Tt}||_1 = e^{-t} / (1 - e^{-t})`` for ``T = diag(n)``."""
    _check_time(t)
    return 1.0 / math.expm1(t)


def power_series_sum(power: float, rate: float) -> float:
    """``sum_{n >= 1} n**power e^{-rate n}`` with a geometric tail certificate.

    Past the mode ``power / rate`` the term ratio is bounded by
    ``((n+1)/n)**power e^{-rate} < 1`` and decreasing, which bounds the tail
    by ``term * rho / (1 - rho)``; summation stops once that is below
    ``1e-16`` of the running total.
    """
    if rate <= 0:
        raise NonPositiveTime("series rate must be positive")
    start = 1
    log_max = None
    total = 0.0
    mode = power / rate if power > 0 else 0.0
    while True:
        n = np.arange(start, start + _CHUNK, dtype=float)
        logs = power * np.log(n) - rate * n
        if log_max is None:
            log_max = power * math.log(max(mode, 1.0)) - rate * max(mode, 1.0)
            log_max = max(log_max, float(logs.max()))
        total += float(np.sum(np.exp(logs - log_max)))
        last = n[-1]
        if last > mode:
            rho = ((last + 1) / last) ** power * math.exp(-rate) if power > 0 else math.exp(-rate)
            if rho < 1:
                tail = math.exp(float(logs[-1]) - log_max) * rho / (1 - rho)
                if tail <= _TAIL_RTOL * total:
                    return total * math.exp(log_max)
        start += _CHUNK


def perturbation_schatten_norm(alpha: float, q, t: float) -> float:
    """``||A_alpha e^{-Tt}||_q`` for the harmonic-like diagonal generator."""
    _check_time(t)
    q = float(q)
    if not q >= 1:
        raise ValueError("q must be at least 1")
    if math.isinf(q):
        if alpha <= 0:
            candidates = [1]
        else:
            peak = alpha / t
            candidates = {1, max(1, math.floor(peak)), max(1, math.ceil(peak))}
        return max(n**alpha * math.exp(-t * n) for n in candidates)
    return power_series_sum(alpha * q, t * q) ** (1.0 / q)


def classify_pcq(alpha: float, q: float) -> bool:
    """``A_alpha`` is a class PC_q perturbation iff ``q > 1/(1 - alpha)``."""
    if not alpha < 1:
        raise ValueError("alpha must be below 1")
    if not q >= 1:
        raise ValueError("q must be at least 1")
    return q > 1.0 / (1.0 - alpha)


class CounterexampleClass(str, enum.Enum):
    GIBBS = "Gibbs"
    UNITARY_GROUP_ONLY = "UnitaryGroupOnly"
    NOT_GENERATOR = "NotGenerator"


def counterexample_classify(b: float) -> CounterexampleClass:
    """Nature of ``T + A_b`` with eigenvalues ``i n**3 + n (1 + b)``."""
    if b > -1:
        return CounterexampleClass.GIBBS
    if b == -1:
        return CounterexampleClass.UNITARY_GROUP_ONLY
    return CounterexampleClass.NOT_GENERATOR


def counterexample_perturbation_norm(b: float, t: float) -> float:
    """``||A_b e^{-Tt}||_inf = |b| max_n n e^{-n t}`` for the cubic generator."""
    _check_time(t)
    peak = 1.0 / t
    candidates = {1, max(1, math.floor(peak)), max(1, math.ceil(peak))}
    return abs(b) * max(n * math.exp(-n * t) for n in candidates)


def _harmonic_resolvent(r: float, y: float):
    # with r < 1 every |n - r - iy| is smallest at n = 1
    return 1.0 / abs(complex(1.0 - r, -y)), 1


def _cubic_resolvent(r: float, y: float):
    centre = round(math.copysign(abs(y) ** (1.0 / 3.0), y)) if y else 0
    width = int(math.ceil(2 + abs(y) ** (1.0 / 3.0)))
    lo, hi = max(1, centre - width), max(1, centre + width)
    n = np.arange(lo, hi + 1, dtype=float)
    dist = np.hypot(n - r, n**3 - y)
    k = int(np.argmin(dist))
    best = float(dist[k])
    # certificate: past the window both |n - r| and |n^3 - y| grow away from it (r < 1 <= n)
    left_ok = lo == 1 or math.hypot(1.0 - r, (lo - 1.0) ** 3 - y) >= best
    right_ok = math.hypot(hi + 1.0 - r, (hi + 1.0) ** 3 - y) >= best
    if not (left_ok and right_ok):
        raise ArithmeticError(f"candidate window failed to certify the supremum at y={y}")
    return 1.0 / best, int(n[k])


def resolvent_argmax(kind, r: float, y: float):
    """``(sup_n 1/|lambda_n - r - i y|, argmax n)`` for a catalogued kind."""
    kind = DiagonalKind(kind)
    phi = -1.0
    if r >= -phi:
        raise SpectralBoundViolated(f"r = {r} must lie left of the spectral bound {-phi}")
    if kind is DiagonalKind.HARMONIC_LIKE:
        return _harmonic_resolvent(r, y)
    if kind is DiagonalKind.CUBIC_COUNTEREXAMPLE:
        return _cubic_resolvent(r, y)
    raise ValueError("resolvent_norm supports the catalogued kinds only")


def resolvent_norm(kind, r: float, y: float) -> float:
    return resolvent_argmax(kind, r, y)[0]


def diagonal_entries(kind, n_terms: int) -> np.ndarray:
    return DiagonalGenerator(kind).eigenvalues(np.arange(1, n_terms + 1))
