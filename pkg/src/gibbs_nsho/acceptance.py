"""Acceptance and smoke suites shared by the test-suite and ``gibbs-nsho reproduce``."""

from __future__ import annotations

import cmath
import json
import math
import time
from dataclasses import dataclass
from importlib import resources
from typing import Callable

import numpy as np
from scipy import integrate

from . import diagmodel, discretize, dyson, linalg, mehler, regions, spectra


@dataclass
class CriterionResult:
    ident: str
    title: str
    passed: bool
    detail: str
    seconds: float
    budget: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} criterion {self.ident} ({self.title}) {self.seconds:.1f}s/{self.budget:.0f}s: {self.detail}"


def load_oracles() -> dict:
    return json.loads(resources.files("gibbs_nsho").joinpath("data/oracles.json").read_text())


ORACLES = load_oracles()


def _timed(ident: str, title: str, budget: float, body: Callable[[], tuple[bool, str]]) -> CriterionResult:
    start = time.perf_counter()
    ok, detail = body()
    seconds = time.perf_counter() - start
    if seconds > budget:
        ok = False
        detail += f"; runtime {seconds:.1f}s over budget"
    return CriterionResult(ident, title, bool(ok), detail, seconds, budget)


def _slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


# --- Mehler kernel -------------------------------------------------------

def hs_by_quadrature(theta: float, tau: complex) -> float:
    """``int int |M(x, y)|^2 dy dx`` by nested adaptive quadrature."""
    c = mehler.coeffs(theta, tau)
    spread = 12.0 / math.sqrt(2.0 * c.r2)

    def inner(x):
        centre = c.r1 * x / c.r2
        val, _ = integrate.quad(lambda y: abs(mehler.kernel(theta, tau, x, y)) ** 2,
                                centre - spread, centre + spread, epsabs=0, epsrel=1e-12, limit=200)
        return val

    total, _ = integrate.quad(inner, -np.inf, np.inf, epsabs=0, epsrel=1e-11, limit=200)
    return total


def sample_semimodule(count: int, seed: int = 20240611):
    """Points with ``theta`` in ``[0.1, 1.2]`` and semi-module margin at least 0.05."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        theta = float(rng.uniform(0.1, 1.2)) * (1 if rng.random() < 0.5 else -1)
        edge = regions.HALF_PI - abs(theta)
        tau = cmath.rect(float(rng.uniform(0.2, 1.2)), float(rng.uniform(-0.9, 0.9)) * edge)
        if regions.semimodule_margin(theta, tau) > 0.05:
            out.append((theta, tau))
    return out


def criterion_1(count: int = 20) -> CriterionResult:
    def body():
        worst, worst_pi = 0.0, math.inf
        for theta, tau in sample_semimodule(count):
            quad = hs_by_quadrature(theta, tau)
            value = mehler.hs_norm_sq(theta, tau)
            worst = max(worst, abs(value - quad) / quad)
            for scaled in (value * math.pi, value / math.pi):
                worst_pi = min(worst_pi, abs(scaled - quad) / quad)
        ok = worst <= 1e-6 and worst_pi > 0.5
        return ok, (f"max rel err {worst:.2e} over {count} samples; pi-free form |w1|/(2 sqrt(r2^2-r1^2)) "
                    f"confirmed, pi-scaled forms off by >= {worst_pi:.2f}")
    return _timed("1", "Mehler HS identity", 120, body)


def criterion_2() -> CriterionResult:
    def body():
        n = np.arange(10_001)
        worst_closed, worst_sum = 0.0, 0.0
        for t in (0.1, 0.5, 1.0):
            value = mehler.hs_norm_sq(0.0, t)
            worst_closed = max(worst_closed, abs(value - 1 / (2 * math.sinh(2 * t))))
            worst_sum = max(worst_sum, abs(value - math.fsum(np.exp(-2 * (2 * n + 1) * t))))
        frozen = max(abs(mehler.hs_norm_sq(0.0, float(t)) - v) for t, v in ORACLES["hs_norm_sq_theta_zero"].items())
        ok = worst_closed <= 1e-12 and worst_sum <= 1e-12 and frozen <= 1e-7
        return ok, f"closed form {worst_closed:.1e}, eigen sum {worst_sum:.1e}, stored oracle {frozen:.1e}"
    return _timed("2", "theta=0 closed form", 1, body)


def criterion_3() -> CriterionResult:
    def body():
        tol = ORACLES["hs_slopes"]["tolerance"]
        t = np.geomspace(1e-3, 1e-1, 40)
        interior = _slope(t, [mehler.hs_norm_sq(0.4, s) for s in t])
        boundary = _slope(t, [mehler.hs_norm_sq(0.4, cmath.rect(s, regions.HALF_PI - 0.4)) for s in t])
        shifts = [(0.4, 0.37 + 0.2j), (0.9, cmath.rect(0.3, 0.5)), (-0.4, 0.8 - 0.1j)]
        shift_err = max(
            abs(mehler.hs_norm_sq(th, tau + 1j * math.pi * k) / mehler.hs_norm_sq(th, tau) - 1)
            for th, tau in shifts for k in (1, -2, 5))
        # exact up to the rounding of Im(tau) + k*pi itself
        periodic = shift_err <= 8 * np.finfo(float).eps
        ok = (abs(interior - ORACLES["hs_slopes"]["interior"]) <= tol
              and abs(boundary - ORACLES["hs_slopes"]["boundary"]) <= tol and periodic)
        return ok, f"interior slope {interior:.4f}, boundary slope {boundary:.4f}, i*pi shift rel diff {shift_err:.1e}"
    return _timed("3", "semigroup-norm exponents", 5, body)


# --- diagonal model ------------------------------------------------------

def _brute_norm(alpha, q, t, n_max=200_000):
    n = np.arange(1, n_max + 1, dtype=float)
    return math.fsum((n**alpha * np.exp(-t * n)) ** q) ** (1 / q)


def criterion_4() -> CriterionResult:
    def body():
        alphas = [0.0, 0.2, 0.4, 0.6, 0.8]
        qs = [1.0, 1.5, 2.0, 4.0, 6.0]
        worst = max(abs(diagmodel.perturbation_schatten_norm(a, q, 0.05) / _brute_norm(a, q, 0.05) - 1)
                    for a in alphas for q in qs)
        t = np.geomspace(1e-4, 1e-2, 15)
        slope_err = max(abs(_slope(t, [diagmodel.perturbation_schatten_norm(a, q, s) for s in t]) + (q * a + 1) / q)
                        for a in alphas for q in qs)
        transition = all(
            not diagmodel.classify_pcq(a, 1 / (1 - a)) and diagmodel.classify_pcq(a, 1 / (1 - a) * (1 + 1e-9))
            and (1 / (1 - a) * (1 - 1e-9) < 1 or not diagmodel.classify_pcq(a, 1 / (1 - a) * (1 - 1e-9)))
            for a in alphas)
        regimes = [diagmodel.counterexample_classify(b).value for b in (0, -1, -2)]
        ok = (worst <= 1e-12 and slope_err <= ORACLES["diagonal_slope_tolerance"] and transition
              and regimes == ["Gibbs", "UnitaryGroupOnly", "NotGenerator"])
        return ok, (f"brute-force rel err {worst:.1e}, max slope deviation {slope_err:.4f}, "
                    f"threshold exact={transition}, regimes {regimes}")
    return _timed("4", "diagonal model", 10, body)


def criterion_5() -> CriterionResult:
    def body():
        n = np.arange(1, 2001, dtype=float)
        errs = []
        for y, expected in ORACLES["cubic_resolvent_at_zero"].items():
            y = float(y)
            brute = float(np.max(1 / np.hypot(n, n**3 - y)))
            got = diagmodel.resolvent_norm("CubicCounterexample", 0.0, y)
            errs.append(max(abs(got - expected), abs(got - brute)))
        y = np.arange(10, 1001, 10, dtype=float) ** 3
        slope = _slope(y, [diagmodel.resolvent_norm("CubicCounterexample", 0.0, v) for v in y])
        oracle = ORACLES["cubic_slope"]
        ok = max(errs) <= 1e-14 and abs(slope - oracle["value"]) <= oracle["tolerance"]
        return ok, f"values off by {max(errs):.1e}, slope {slope:.4f} over y in [1e3, 1e9]"
    return _timed("5", "cubic resolvent decay", 1, body)


# --- Dyson-Phillips ------------------------------------------------------

def _commuting_check(k_max: int) -> float:
    eigs = np.arange(1.0, 7.0)
    pert = np.linspace(0.1, 0.6, 6)
    provider = dyson.SemigroupProvider(np.diag(eigs))
    series = dyson.sum_series(provider, np.diag(pert), k_max, 0.7, 2)
    exact = np.diag(np.exp(-(eigs + pert) * 0.7))
    return float(np.linalg.norm(series.total - exact) / np.linalg.norm(exact))


def criterion_6() -> CriterionResult:
    cfg = ORACLES["dyson"]

    def body():
        commuting = _commuting_check(cfg["K_commuting"])
        n, theta, t, q = cfg["N"], cfg["theta"], cfg["t"], cfg["q"]
        gen = discretize.fock_matrix(discretize.FockSpec(theta, n))
        pot = discretize.potential_fock_matrix(discretize.PotentialSpec(), n)
        provider = dyson.SemigroupProvider(gen)
        series = dyson.sum_series(provider, pot, cfg["K_fock"], t, q)
        exact = linalg.matrix_exp(-t * (gen.entries + pot.entries)).entries
        err = linalg.schatten_norm(series.total - exact, q)
        allowed = series.tail_bound + 10 * series.quadrature_budget
        ok = commuting <= cfg["commuting_tolerance"] and err <= allowed and not series.bound_violations
        return ok, (f"commuting rel err {commuting:.1e}; Fock N={n} error {err:.2e} <= tail {series.tail_bound:.2e}"
                    f" + 10 x budget {series.quadrature_budget:.2e}; contraction {series.contraction:.4f};"
                    f" bound violations {series.bound_violations}")
    return _timed("6", "Dyson-Phillips engine", 300, body)


# --- spectra -------------------------------------------------------------

def criterion_7() -> CriterionResult:
    cfg = ORACLES["eigen"]

    def body():
        count = cfg["count"]
        exact0 = np.max(np.abs(linalg.eigenvalues(discretize.oscillator_matrix(0.0, 50)) - (2 * np.arange(50) + 1)))
        lam = spectra.trusted_eigenvalues(discretize.oscillator_matrix(0.3, 400), discretize.oscillator_matrix(0.3, 800))
        unpert = float(np.max(np.abs(lam[:count] - (2 * np.arange(count) + 1)))) if lam.size >= count else math.inf
        pot = discretize.PotentialSpec()
        fock = spectra.trusted_eigenvalues(discretize.oscillator_matrix(0.3, 400, pot),
                                           discretize.oscillator_matrix(0.3, 800, pot))
        grid = linalg.eigenvalues(discretize.grid_matrix(0.3, pot, discretize.GridSpec(14.0, 2000)))
        dual = float(np.max(np.abs(grid[:count] - fock[:count]))) if fock.size >= count else math.inf
        ok = exact0 == 0 and unpert <= cfg["unperturbed_tolerance"] and dual <= cfg["fock_vs_grid_tolerance"]
        return ok, f"theta=0 error {exact0:.1e}; V=0 error {unpert:.1e}; Fock vs grid {dual:.1e}"
    return _timed("7", "discretization ground truth", 240, body)


def _perturbed_pair(theta=0.4, n=200):
    pot = discretize.PotentialSpec()
    return discretize.oscillator_matrix(theta, n, pot), discretize.oscillator_matrix(theta, 2 * n, pot)


def criterion_8() -> CriterionResult:
    cfg = ORACLES["asymptotics"]

    def body():
        report = spectra.spectral_report(*_perturbed_pair(), 0.4, cfg["count"])
        beta_exp = min(report.exponent_beta_plus, report.exponent_beta_minus)
        ok = (report.K_alpha > 0 and report.K_beta > 0 and report.exponent_alpha >= cfg["alpha_exponent_min"]
              and beta_exp >= cfg["beta_exponent_min"])
        return ok, (f"K_alpha {report.K_alpha:.3f}, K_beta {report.K_beta:.3f}, exponents alpha "
                    f"{report.exponent_alpha:.3f} beta {beta_exp:.3f}; trusted {report.trusted_window[1]}")
    return _timed("8", "eigenvalue asymptotics", 300, body)


def criterion_9() -> CriterionResult:
    cfg = ORACLES["rays"]

    def body():
        a, b = _perturbed_pair()
        rhos = np.geomspace(cfg["rho_min"], cfg["rho_max"], cfg["rho_count"])
        parts, ok = [], True
        for beta in (-1.0, 0.0, 1.0):
            for scan in spectra.resolvent_ray(a, b, 0.4, beta, rhos):
                good = all(scan.trusted) and scan.strictly_decreasing and scan.max_delta < cfg["delta_max"]
                ok = ok and good
                parts.append(f"{scan.direction.value}/beta={beta:+.0f} max delta {scan.max_delta:.1e}")
        return ok, "strictly decreasing on all trusted ladders; " + ", ".join(parts)
    return _timed("9", "resolvent rays", 300, body)


def criterion_10() -> CriterionResult:
    cfg = ORACLES["pcq"]

    def body():
        grid = np.geomspace(cfg["t_min"], cfg["t_max"], cfg["points"])
        gammas = {}
        verdicts = {}
        for n in (200, 400):
            gen = discretize.fock_matrix(discretize.FockSpec(0.4, n))
            pot = discretize.potential_fock_matrix(discretize.PotentialSpec(), n)
            provider = dyson.SemigroupProvider(gen)
            for q in (cfg["integrable_q"], cfg["non_integrable_q"]):
                report = dyson.pcq_report(provider, pot, q, grid)
                gammas[(n, q)] = report.gamma_fit
                verdicts[(n, q)] = report.classified_pcq
        deltas = [abs(gammas[(200, q)] - gammas[(400, q)]) for q in (cfg["integrable_q"], cfg["non_integrable_q"])]
        ok = (all(verdicts[(n, cfg["integrable_q"])] is True for n in (200, 400))
              and all(verdicts[(n, cfg["non_integrable_q"])] is False for n in (200, 400))
              and max(deltas) < cfg["gamma_delta_max"])
        return ok, (f"gamma(q={cfg['integrable_q']:g}) {gammas[(200, cfg['integrable_q'])]:.3f}, "
                    f"gamma(q={cfg['non_integrable_q']:g}) {gammas[(200, cfg['non_integrable_q'])]:.3f}, "
                    f"N-doubling delta {max(deltas):.1e}")
    return _timed("10", "class PC_q thresholds", 300, body)


# --- smoke ---------------------------------------------------------------

def smoke_dyson() -> CriterionResult:
    def body():
        err = _commuting_check(10)
        return err <= 1e-8, f"commuting oracle rel err {err:.1e}"
    return _timed("S1", "Dyson commuting oracle", 20, body)


def smoke_spectra() -> CriterionResult:
    def body():
        pair = (discretize.oscillator_matrix(0.4, 60), discretize.oscillator_matrix(0.4, 120))
        report = spectra.spectral_report(*pair, 0.4, 10)
        err = float(np.max(np.abs(np.array(report.eigenvalues) - (2 * np.arange(10) + 1))))
        return err < 1e-8 and report.K_beta > 0, f"V=0 eigenvalues off by {err:.1e}"
    return _timed("S2", "unperturbed spectrum", 20, body)


def smoke_pcq() -> CriterionResult:
    def body():
        lam = np.arange(1.0, 100_001.0)
        report = dyson.pcq_report(dyson.DiagonalSemigroup(lam), np.sqrt(lam), 4.0, np.geomspace(1e-3, 1e-1, 9))
        return abs(report.gamma_fit - 0.75) <= 0.02 and report.classified_pcq, f"gamma {report.gamma_fit:.4f}"
    return _timed("S3", "diagonal PC_q fit", 20, body)


ACCEPTANCE = {
    "1": criterion_1, "2": criterion_2, "3": criterion_3, "4": criterion_4, "5": criterion_5,
    "6": criterion_6, "7": criterion_7, "8": criterion_8, "9": criterion_9, "10": criterion_10,
}
SMOKE = {"2": criterion_2, "3": criterion_3, "4": criterion_4, "5": criterion_5,
         "S1": smoke_dyson, "S2": smoke_spectra, "S3": smoke_pcq}
SUITES = {"acceptance": ACCEPTANCE, "smoke": SMOKE}


def run_suite(name: str, echo=print) -> list[CriterionResult]:
    results = []
    for fn in SUITES[name].values():
        result = fn()
        if echo is not None:
            echo(result.line())
        results.append(result)
    return results
