"""Dyson-Phillips expansion of perturbed semigroups.

For a generator ``T`` and perturbation ``A``,

    e^{-(T+A)t} = sum_k (-1)^k W_k(t),
    W_0(t) = e^{-Tt},  W_k(t) = int_0^t W_{k-1}(t-s) A e^{-Ts} ds.

The terms are computed level by level.  Each level is stored at the
Gauss-Legendre nodes of a mesh on ``[0, t]`` graded toward ``s = 0``, where
``||A e^{-Ts}||_q`` may blow up like ``s^{-gamma}``.  The next level is
integrated on a mesh graded toward both ends of ``[0, u]``, with barycentric
interpolation in the stored families.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import linalg
from .errors import ContractionNotSatisfied, NonPositiveTime, SingularityTooStrong
from .linalg import OperatorMatrix, Provenance, as_array
from .quadrature import (barycentric_matrix, barycentric_weights, composite_gauss_legendre,
                         gauss_legendre, graded_edges)


class SemigroupProvider:
    """``t -> e^{-Tt}`` for a dense generator, with a read-only cache.

    The growth cap ``M`` is 1 (and ``growth_cap_rigorous`` is true) when the
    Hermitian part of ``T`` is positive semi-definite; otherwise it is the
    largest sampled operator norm on ``[1e-4, 10]``.
    """

    def __init__(self, generator, growth_cap: Optional[float] = None):
        self.generator = as_array(generator).astype(complex)
        self.dim = self.generator.shape[0]
        self._cache: dict = {}
        self._lock = threading.Lock()
        if growth_cap is None:
            growth_cap, rigorous = self._estimate_growth_cap()
        else:
            rigorous = True
        self.growth_cap = float(growth_cap)
        self.growth_cap_rigorous = rigorous

    def _estimate_growth_cap(self):
        herm = 0.5 * (self.generator + self.generator.conj().T)
        lowest = float(sla.eigvalsh(herm)[0])
        scale = max(1.0, float(np.max(np.abs(herm))))
        if lowest >= -1e-13 * scale:
            return 1.0, True
        norms = [linalg.schatten_norm(self.evaluate(t), np.inf) for t in np.geomspace(1e-4, 10, 25)]
        return max(1.0, max(norms)), False

    def evaluate(self, t: float) -> np.ndarray:
        if t < 0:
            raise NonPositiveTime("semigroup time must be non-negative")
        key = float(t)
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        value = sla.expm(-key * self.generator)
        value.setflags(write=False)
        with self._lock:
            if len(self._cache) < 4096:
                self._cache[key] = value
        return value

    def product_norm(self, perturbation, t: float, q) -> float:
        """``||A e^{-Tt}||_q``."""
        return linalg.schatten_norm(as_array(perturbation) @ self.evaluate(t), q)

    def semigroup_defect(self, pairs) -> float:
        """Largest relative defect of ``e^{-T(s+t)} = e^{-Ts} e^{-Tt}`` over sampled pairs."""
        worst = 0.0
        for s, t in pairs:
            lhs = self.evaluate(s + t)
            rhs = self.evaluate(s) @ self.evaluate(t)
            worst = max(worst, float(np.linalg.norm(lhs - rhs, 2) / max(np.linalg.norm(lhs, 2), 1e-300)))
        return worst


class DiagonalSemigroup(SemigroupProvider):
    """Semigroup of ``T = diag(eigenvalues)``; diagonal perturbations may be passed as vectors."""

    def __init__(self, eigenvalues, growth_cap: Optional[float] = None):
        self.eigenvalues = np.asarray(eigenvalues, dtype=complex)
        self.dim = self.eigenvalues.size
        self._cache = {}
        self._lock = threading.Lock()
        lowest = float(np.min(self.eigenvalues.real))
        self.growth_cap = float(growth_cap) if growth_cap is not None else (1.0 if lowest >= 0 else math.inf)
        self.growth_cap_rigorous = True

    @property
    def generator(self):
        return np.diag(self.eigenvalues)

    def evaluate(self, t: float) -> np.ndarray:
        if t < 0:
            raise NonPositiveTime("semigroup time must be non-negative")
        return np.diag(np.exp(-float(t) * self.eigenvalues))

    def product_norm(self, perturbation, t: float, q) -> float:
        if isinstance(perturbation, np.ndarray) and perturbation.ndim == 1:
            sv = np.abs(perturbation * np.exp(-float(t) * self.eigenvalues))
            return linalg.schatten_from_singular_values(sv, q)
        return super().product_norm(perturbation, t, q)


@dataclass(frozen=True)
class GradedMesh:
    """Storage mesh (``panels`` x ``order``) and inner integration mesh on ``[0, 1]``."""

    panels: int = 10
    order: int = 8
    exponent: float = 2.0
    inner_panels: int = 6
    inner_order: int = 8

    def __post_init__(self):
        if self.panels < 1 or self.inner_panels < 1 or self.order < 2 or self.inner_order < 2:
            raise ValueError("mesh needs at least one panel and order >= 2")
        if not self.exponent >= 1:
            raise ValueError("grading exponent must be at least 1")

    @classmethod
    def from_gamma(cls, gamma: float, **kwargs) -> "GradedMesh":
        """Grading ``1/(1 - gamma + 0.05)`` for an integrand singular like ``s^{-gamma}``."""
        if gamma >= 1:
            raise SingularityTooStrong(f"fitted exponent {gamma:.3f} >= 1: integrand not integrable at 0")
        return cls(exponent=max(1.0, 1.0 / (1.0 - gamma + 0.05)), **kwargs)

    def coarsened(self) -> "GradedMesh":
        return replace(self, panels=max(1, self.panels - 2), order=max(2, self.order - 2),
                       inner_panels=max(1, self.inner_panels - 1), inner_order=max(2, self.inner_order - 2))

    def storage_rule(self, t: float):
        edges = graded_edges(t, self.panels, self.exponent)
        nodes, weights = composite_gauss_legendre(edges, self.order)
        return edges, nodes, weights

    def inner_rule(self):
        edges = graded_edges(1.0, self.inner_panels, self.exponent, two_sided=True)
        return composite_gauss_legendre(edges, self.inner_order)


class _Family:
    """A matrix-valued function stored at the nodes of a panel mesh on ``[0, t]``."""

    def __init__(self, edges, order):
        self.edges = edges
        self.order = order
        ref, _ = gauss_legendre(order, 0.0, 1.0)
        self.ref = ref
        self.bary = barycentric_weights(ref)

    def interpolation(self, points) -> sp.csr_matrix:
        points = np.asarray(points, dtype=float)
        panels = len(self.edges) - 1
        idx = np.clip(np.searchsorted(self.edges, points, side="right") - 1, 0, panels - 1)
        left, right = self.edges[idx], self.edges[idx + 1]
        local = (points - left) / (right - left)
        rows = np.empty((points.size, self.order))
        for j in np.unique(idx):
            sel = idx == j
            rows[sel] = barycentric_matrix(self.ref, self.bary, local[sel])
        cols = idx[:, None] * self.order + np.arange(self.order)[None, :]
        shape = (points.size, panels * self.order)
        return sp.csr_matrix((rows.ravel(), cols.ravel(), np.arange(0, rows.size + 1, self.order)), shape=shape)


def _apply(interp: sp.csr_matrix, stack: np.ndarray) -> np.ndarray:
    """Contract a sparse interpolation matrix with a stack of matrices."""
    n = stack.shape[1]
    # the weights are real, so act on the real view of the complex entries
    flat = np.ascontiguousarray(stack).reshape(stack.shape[0], -1).view(np.float64)
    return np.ascontiguousarray(interp @ flat).view(complex).reshape(-1, n, n)


class _DysonEngine:
    def __init__(self, provider: SemigroupProvider, perturbation: np.ndarray, t: float, mesh: GradedMesh):
        self.t = float(t)
        self.mesh = mesh
        self.edges, self.nodes, self.weights = mesh.storage_rule(self.t)
        self.family = _Family(self.edges, mesh.order)
        self.inner_x, self.inner_w = mesh.inner_rule()
        self.a = perturbation
        self.w0_nodes = np.stack([provider.evaluate(s) for s in self.nodes])
        self.w0_t = provider.evaluate(self.t)
        self.c_nodes = np.einsum("ij,qjk->qik", self.a, self.w0_nodes)
        self.targets = np.concatenate([self.nodes, [self.t]])

    def _integrate(self, prev_nodes: np.ndarray, u: float) -> np.ndarray:
        s = u * self.inner_x
        w = u * self.inner_w
        c_int = _apply(self.family.interpolation(s), self.c_nodes)
        p_int = _apply(self.family.interpolation(u - s), prev_nodes)
        n = prev_nodes.shape[1]
        left = (p_int * w[:, None, None]).transpose(1, 0, 2).reshape(n, -1)
        right = c_int.reshape(-1, n)
        return left @ right

    def levels(self, k_max: int):
        """Yield ``W_k(t)`` for ``k = 0..k_max``."""
        yield self.w0_t
        prev = self.w0_nodes
        for k in range(1, k_max + 1):
            final = self._integrate(prev, self.t)
            if k < k_max:
                prev = np.stack([self._integrate(prev, u) for u in self.nodes])
            yield final


def _check_inputs(provider, perturbation, t):
    if not t > 0:
        raise NonPositiveTime(f"t must be positive, got {t}")
    a = as_array(perturbation).astype(complex)
    if a.shape != (provider.dim, provider.dim):
        raise ValueError("perturbation and generator dimensions differ")
    return a


def dyson_terms(provider, perturbation, k_max: int, t: float, mesh: GradedMesh):
    """``[W_0(t), ..., W_{k_max}(t)]`` and per-term error estimates (fine vs coarsened mesh)."""
    a = _check_inputs(provider, perturbation, t)
    fine = list(_DysonEngine(provider, a, t, mesh).levels(k_max))
    coarse = list(_DysonEngine(provider, a, t, mesh.coarsened()).levels(k_max))
    errors = [float(np.linalg.norm(f - c, 2)) for f, c in zip(fine, coarse)]
    return fine, coarse, errors


def term_Wk(provider, perturbation, k: int, t: float, mesh: Optional[GradedMesh] = None,
            q=np.inf) -> OperatorMatrix:
    """Single Dyson term; ``meta["quad_error"]`` holds the Schatten-``q`` error estimate."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if mesh is None:
        mesh = default_mesh(provider, perturbation, t, q)
    fine, coarse, _ = dyson_terms(provider, perturbation, k, t, mesh)
    err = linalg.schatten_norm(fine[k] - coarse[k], q) if k else 0.0
    return OperatorMatrix(fine[k], Provenance.DERIVED, {"k": k, "t": t, "quad_error": err, "q": float(q)})


def contraction_integral(provider, perturbation, t: float, q, mesh: GradedMesh) -> tuple[float, float]:
    """``int_0^t ||A e^{-Ts}||_q ds`` on the graded storage rule, with a coarsened-mesh delta."""

    def integrate(m):
        _, nodes, weights = m.storage_rule(t)
        return float(sum(w * provider.product_norm(perturbation, s, q) for s, w in zip(nodes, weights)))

    value = integrate(mesh)
    return value, abs(value - integrate(mesh.coarsened()))


def admissible_time(provider, perturbation, q, level: float = 0.5, t_max: float = 1.0,
                    mesh: Optional[GradedMesh] = None, iterations: int = 40) -> float:
    """Largest ``a <= t_max`` with ``int_0^a ||A e^{-Ts}||_q ds <= level`` (bisection)."""
    mesh = mesh or GradedMesh(exponent=3.0)
    if contraction_integral(provider, perturbation, t_max, q, mesh)[0] <= level:
        return t_max
    lo, hi = 0.0, t_max
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if contraction_integral(provider, perturbation, mid, q, mesh)[0] <= level:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass
class PerturbationSeries:
    terms: list
    term_norms_q: list
    contraction: float
    tail_bound: float
    growth_cap: float
    q: float
    t: float
    quad_errors: list
    contraction_error: float
    total: np.ndarray = field(repr=False, default=None)
    bound_violations: list = field(default_factory=list)
    n_basis: int = 0

    @property
    def quadrature_budget(self) -> float:
        return float(sum(self.quad_errors))

    def summary(self) -> dict:
        return {
            "K": len(self.terms) - 1, "t": self.t, "q": self.q, "N": self.n_basis,
            "contraction": self.contraction, "contraction_error": self.contraction_error,
            "tail_bound": self.tail_bound, "growth_cap": self.growth_cap,
            "term_norms_q": list(self.term_norms_q), "quad_errors": list(self.quad_errors),
            "quadrature_budget": self.quadrature_budget, "bound_violations": list(self.bound_violations),
        }


def default_mesh(provider, perturbation, t: float, q, **kwargs) -> GradedMesh:
    """Mesh graded by the singularity exponent fitted on ``[t/100, t]``."""
    grid = np.geomspace(t / 100, t, 8)
    report = pcq_report(provider, perturbation, q, grid)
    return GradedMesh.from_gamma(max(report.gamma_fit, 0.0), **kwargs)


def sum_series(provider, perturbation, K: int, t: float, q, mesh: Optional[GradedMesh] = None) -> PerturbationSeries:
    """``sum_{k<=K} (-1)^k W_k(t)`` with the geometric tail certificate.

    Raises :class:`ContractionNotSatisfied` unless ``int_0^t ||A e^{-Ts}||_q ds < 1``.
    """
    a = _check_inputs(provider, perturbation, t)
    if mesh is None:
        mesh = default_mesh(provider, a, t, q)
    contraction, contraction_err = contraction_integral(provider, a, t, q, mesh)
    if contraction >= 1:
        raise ContractionNotSatisfied(f"contraction estimate {contraction:.4f} >= 1 at t={t}")
    if not np.any(a):
        terms = [provider.evaluate(t)] + [np.zeros_like(a)] * K
        coarse = terms
    else:
        terms, coarse, _ = dyson_terms(provider, a, K, t, mesh)
    norms = [linalg.schatten_norm(w, q) for w in terms]
    errors = [linalg.schatten_norm(f - c, q) for f, c in zip(terms, coarse)]
    cap = provider.growth_cap
    tail = cap * contraction ** (K + 1) / (1 - contraction) if np.any(a) else 0.0
    total = sum(((-1) ** k) * w for k, w in enumerate(terms))
    violations = [k for k, (nrm, err) in enumerate(zip(norms, errors))
                  if k > 0 and nrm > cap * (contraction + contraction_err) ** k + err]
    return PerturbationSeries(terms, norms, contraction, tail, cap, float(q), t, errors,
                              contraction_err, total, violations, provider.dim)


def variation_residual(provider, perturbation, t: float, q, mesh: Optional[GradedMesh] = None) -> float:
    """``||e^{-(T+A)t} - e^{-Tt} + int_0^t e^{-(T+A)(t-s)} A e^{-Ts} ds||_q``."""
    a = _check_inputs(provider, perturbation, t)
    mesh = mesh or GradedMesh(exponent=3.0)
    perturbed = provider.generator + a
    _, nodes, weights = mesh.storage_rule(t)
    integral = np.zeros_like(a)
    for s, w in zip(nodes, weights):
        integral += w * (sla.expm(-(t - s) * perturbed) @ (a @ provider.evaluate(s)))
    full = sla.expm(-t * perturbed)
    return linalg.schatten_norm(full - provider.evaluate(t) + integral, q)


@dataclass
class IntegrabilityReport:
    q: float
    gamma_fit: float
    integral_estimate: float
    classified_pcq: Optional[bool]
    fit_residual: float
    t_grid: list
    norms: list
    fit_margin: float
    n_basis: int
    gamma_refined: Optional[float] = None

    @property
    def gamma_delta(self) -> Optional[float]:
        return None if self.gamma_refined is None else abs(self.gamma_refined - self.gamma_fit)

    def summary(self) -> dict:
        return {
            "q": self.q, "gamma_fit": self.gamma_fit, "integral_estimate": self.integral_estimate,
            "classified_pcq": self.classified_pcq, "fit_residual": self.fit_residual,
            "fit_margin": self.fit_margin, "N": self.n_basis, "gamma_refined": self.gamma_refined,
            "gamma_delta": self.gamma_delta, "t_grid": list(self.t_grid), "norms": list(self.norms),
        }


def _fit_gamma(provider, perturbation, q, t_grid):
    norms = np.array([provider.product_norm(perturbation, t, q) for t in t_grid])
    coef = np.polyfit(np.log(t_grid), np.log(norms), 1)
    resid = np.log(norms) - np.polyval(coef, np.log(t_grid))
    return -coef[0], float(np.sqrt(np.mean(resid**2))), norms


def pcq_report(provider, perturbation, q, t_grid: Sequence[float], fit_margin: float = 0.05,
               residual_threshold: float = 0.1, refined=None) -> IntegrabilityReport:
    """Fit ``||A e^{-Ts}||_q ~ s^{-gamma}`` on ``t_grid`` and classify integrability at 0.

    The integral estimate is the graded quadrature over ``[min t_grid, 1]``
    plus the power-law extrapolation of the head (infinite when
    ``gamma >= 1``).  ``refined`` is an optional ``(provider, perturbation)``
    pair at doubled truncation whose fitted exponent is reported alongside.
    """
    t_grid = np.sort(np.asarray(t_grid, dtype=float))
    if t_grid.size < 2 or t_grid[0] <= 0 or t_grid[-1] > 1:
        raise ValueError("t_grid must hold at least two points in (0, 1]")
    gamma, residual, norms = _fit_gamma(provider, perturbation, q, t_grid)
    lower = float(t_grid[0])
    x, w = composite_gauss_legendre(np.geomspace(lower, 1.0, 24), 8)
    body = float(sum(wi * provider.product_norm(perturbation, xi, q) for xi, wi in zip(x, w)))
    head = norms[0] * lower / (1.0 - gamma) if gamma < 1 else math.inf
    classified = None if residual > residual_threshold else bool(gamma < 1 - fit_margin)
    gamma_refined = None
    if refined is not None:
        gamma_refined = _fit_gamma(refined[0], refined[1], q, t_grid)[0]
    return IntegrabilityReport(float(q), float(gamma), body + head, classified, residual,
                               t_grid.tolist(), norms.tolist(), fit_margin, provider.dim, gamma_refined)


@dataclass(frozen=True)
class DominationCheck:
    invertible_A: bool
    bound_constant: Optional[float]
    verified: Optional[bool] = None
    worst_ratio: Optional[float] = None


def domination_check(a, b, threshold: float = 1e-12, provider: Optional[SemigroupProvider] = None,
                     q=None, t_grid: Optional[Sequence[float]] = None) -> DominationCheck:
    """Bound ``||B A^{-1}||_inf`` and, given a provider, test
    ``||B e^{-Tt}||_q <= ||B A^{-1}||_inf ||A e^{-Tt}||_q`` on ``t_grid``."""
    a_arr, b_arr = as_array(a).astype(complex), as_array(b).astype(complex)
    smallest = linalg.sigma_min(a_arr)
    if smallest <= threshold * max(1.0, linalg.schatten_norm(a_arr, np.inf)):
        return DominationCheck(False, None)
    ratio = b_arr @ np.linalg.inv(a_arr)
    constant = linalg.schatten_norm(ratio, np.inf)
    if provider is None or q is None or t_grid is None:
        return DominationCheck(True, constant)
    worst = 0.0
    for t in t_grid:
        lhs = provider.product_norm(b_arr, t, q)
        rhs = provider.product_norm(a_arr, t, q)
        worst = max(worst, lhs / rhs)
    return DominationCheck(True, constant, worst <= constant * (1 + 1e-10), worst)
