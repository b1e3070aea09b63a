"""Dense complex linear algebra used by the discretisations and the Dyson engine."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import NonConvergence, OverflowRisk


class Provenance(str, enum.Enum):
    FOCK = "Fock"
    GRID = "Grid"
    DIAGONAL = "Diagonal"
    DERIVED = "Derived"


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    entries: np.ndarray
    provenance: Provenance = Provenance.DERIVED
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        arr = np.asarray(self.entries)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise ValueError(f"operator matrix must be square and non-empty, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("operator matrix has non-finite entries")
        object.__setattr__(self, "entries", arr.astype(complex, copy=False))
        object.__setattr__(self, "provenance", Provenance(self.provenance))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def derived(self, entries, **meta) -> "OperatorMatrix":
        return OperatorMatrix(entries, Provenance.DERIVED, {**self.meta, **meta})


def as_array(a) -> np.ndarray:
    if isinstance(a, OperatorMatrix):
        return a.entries
    return np.asarray(a)


def _check_q(q) -> float:
    q = float(q)
    if not q >= 1:
        raise ValueError(f"Schatten index must satisfy q >= 1, got {q}")
    return q


def singular_values(a) -> np.ndarray:
    try:
        return sla.svdvals(as_array(a))
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(str(exc)) from exc


def schatten_from_singular_values(sv, q) -> float:
    q = _check_q(q)
    sv = np.asarray(sv, dtype=float)
    if sv.size == 0:
        return 0.0
    top = float(np.max(sv))
    if top == 0.0 or math.isinf(q):
        return top
    return top * float(np.sum((sv / top) ** q)) ** (1.0 / q)


def schatten_norm(a, q) -> float:
    """``(sum sigma_i**q)**(1/q)``; ``q = inf`` gives the operator norm."""
    return schatten_from_singular_values(singular_values(a), q)


def sigma_min(a) -> float:
    return float(singular_values(a)[-1])


def matrix_exp(a, ceiling: float = 1e6) -> OperatorMatrix:
    """Matrix exponential by scaling and squaring with Padé approximants.

    Delegates to :func:`scipy.linalg.expm`; refuses inputs whose 1-norm
    exceeds ``ceiling``.
    """
    arr = as_array(a)
    norm1 = float(np.max(np.sum(np.abs(arr), axis=0))) if arr.size else 0.0
    if norm1 > ceiling:
        raise OverflowRisk(f"||A||_1 = {norm1:.3e} exceeds the ceiling {ceiling:.3e}")
    meta = dict(a.meta) if isinstance(a, OperatorMatrix) else {}
    return OperatorMatrix(sla.expm(arr.astype(complex)), Provenance.DERIVED, meta)


def sort_spectrum(values) -> np.ndarray:
    values = np.asarray(values, dtype=complex)
    order = np.lexsort((values.imag, values.real))
    return values[order]


def eigenvalues(a) -> np.ndarray:
    """All eigenvalues, ascending by real part then imaginary part."""
    try:
        values = sla.eigvals(as_array(a), check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(str(exc)) from exc
    return sort_spectrum(values)


def numrange_boundary(a, n_angles: int) -> np.ndarray:
    """Support points of the field of values on a uniform angle grid.

    For each angle ``phi`` the top eigenvector of the Hermitian part of
    ``e^{i phi} A`` yields the boundary point ``v* A v``.
    """
    if n_angles < 3:
        raise ValueError("n_angles must be at least 3")
    arr = as_array(a).astype(complex)
    points = np.empty(n_angles, dtype=complex)
    for k, phi in enumerate(2 * np.pi * np.arange(n_angles) / n_angles):
        rotated = np.exp(1j * phi) * arr
        herm = 0.5 * (rotated + rotated.conj().T)
        _, vecs = sla.eigh(herm, subset_by_index=[arr.shape[0] - 1, arr.shape[0] - 1])
        v = vecs[:, 0]
        points[k] = np.vdot(v, arr @ v)
    return points


def numrange_support(a, n_angles: int) -> tuple[np.ndarray, np.ndarray]:
    """Angles and support values ``max eig Re(e^{i phi} A)`` of the field of values."""
    arr = as_array(a).astype(complex)
    phis = 2 * np.pi * np.arange(n_angles) / n_angles
    support = np.empty(n_angles)
    for k, phi in enumerate(phis):
        rotated = np.exp(1j * phi) * arr
        support[k] = sla.eigvalsh(0.5 * (rotated + rotated.conj().T))[-1]
    return phis, support
