import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from gibbs_nsho import discretize, dyson, linalg
from gibbs_nsho.errors import ContractionNotSatisfied, NonPositiveTime, SingularityTooStrong

EIGS = np.arange(1.0, 7.0)
PERT = np.linspace(0.1, 0.6, 6)


@pytest.fixture(scope="module")
def commuting():
    return dyson.SemigroupProvider(np.diag(EIGS)), np.diag(PERT)


@pytest.fixture(scope="module")
def fock_small():
    n = 60
    gen = discretize.fock_matrix(discretize.FockSpec(0.4, n))
    pot = discretize.potential_fock_matrix(discretize.PotentialSpec(), n)
    return dyson.SemigroupProvider(gen), pot


def van_loan_terms(gen, pert, k_max, t):
    """``W_0..W_k`` from the exponential of the block bidiagonal matrix."""
    n = gen.shape[0]
    big = np.zeros(((k_max + 1) * n,) * 2, dtype=complex)
    for k in range(k_max + 1):
        big[k * n:(k + 1) * n, k * n:(k + 1) * n] = -gen
        if k < k_max:
            big[k * n:(k + 1) * n, (k + 1) * n:(k + 2) * n] = pert
    top = sla.expm(t * big)[:n]
    return [top[:, k * n:(k + 1) * n] for k in range(k_max + 1)]


def test_provider_semigroup_identity(fock_small):
    provider, _ = fock_small
    assert provider.semigroup_defect([(0.01, 0.02), (0.1, 0.3), (0.5, 0.25)]) < 1e-10
    assert provider.growth_cap == 1.0 and provider.growth_cap_rigorous


def test_provider_growth_cap_sampled_for_non_accretive():
    gen = np.array([[1.0, 40.0], [0.0, 1.0]])
    provider = dyson.SemigroupProvider(gen)
    assert not provider.growth_cap_rigorous
    assert provider.growth_cap > 1


def test_provider_rejects_negative_time(commuting):
    with pytest.raises(NonPositiveTime):
        commuting[0].evaluate(-1.0)


def test_diagonal_provider_fast_path(commuting):
    diag = dyson.DiagonalSemigroup(EIGS)
    dense, pert = commuting
    for t in (0.05, 0.5):
        assert np.allclose(diag.evaluate(t), dense.evaluate(t), atol=1e-14)
        assert diag.product_norm(PERT, t, 3) == pytest.approx(dense.product_norm(pert, t, 3), rel=1e-12)


def test_mesh_from_gamma():
    assert dyson.GradedMesh.from_gamma(0.5).exponent == pytest.approx(1 / 0.55)
    assert dyson.GradedMesh.from_gamma(-3.0).exponent == 1.0
    with pytest.raises(SingularityTooStrong):
        dyson.GradedMesh.from_gamma(1.0)


def test_term_zero_is_semigroup(commuting):
    provider, pert = commuting
    w0 = dyson.term_Wk(provider, pert, 0, 0.3)
    assert np.allclose(w0.entries, provider.evaluate(0.3))


def test_term_with_zero_perturbation(commuting):
    provider, _ = commuting
    w1 = dyson.term_Wk(provider, np.zeros((6, 6)), 1, 0.3, mesh=dyson.GradedMesh())
    assert np.max(np.abs(w1.entries)) == 0.0


@pytest.mark.parametrize("k", range(7))
def test_commuting_terms_closed_form(commuting, k):
    provider, pert = commuting
    t = 0.7
    got = dyson.term_Wk(provider, pert, k, t, mesh=dyson.GradedMesh())
    exact = np.diag((t * PERT) ** k * np.exp(-EIGS * t) / math.factorial(k))
    assert np.max(np.abs(got.entries - exact)) <= 1e-8
    assert got.meta["quad_error"] <= 1e-8


def test_terms_match_block_exponential():
    rng = np.random.default_rng(4)
    n = 8
    skew = rng.normal(size=(n, n))
    gen = np.diag(np.arange(1.0, n + 1) ** 2) + 0.5j * (skew + skew.T)
    pert = 0.3 * rng.normal(size=(n, n))
    provider = dyson.SemigroupProvider(gen)
    t = 0.4
    terms, _, errors = dyson.dyson_terms(provider, pert, 4, t, dyson.GradedMesh())
    oracle = van_loan_terms(gen, pert, 4, t)
    for got, ref, err in zip(terms, oracle, errors):
        assert np.linalg.norm(got - ref, 2) <= max(1e-10, 10 * err)


def test_series_for_zero_perturbation(commuting):
    provider, _ = commuting
    series = dyson.sum_series(provider, np.zeros((6, 6)), 5, 0.3, 2, mesh=dyson.GradedMesh())
    assert np.array_equal(series.total, provider.evaluate(0.3))
    assert series.tail_bound == 0.0


def test_series_commuting_oracle(commuting):
    provider, pert = commuting
    t = 0.7
    series = dyson.sum_series(provider, pert, 10, t, 2)
    exact = sla.expm(-pert * t) @ sla.expm(-np.diag(EIGS) * t)
    assert np.linalg.norm(series.total - exact) / np.linalg.norm(exact) <= 1e-8
    assert series.tail_bound == pytest.approx(series.growth_cap * series.contraction**11 / (1 - series.contraction))
    assert series.bound_violations == []


def test_series_rejects_large_contraction(commuting):
    provider, _ = commuting
    with pytest.raises(ContractionNotSatisfied):
        dyson.sum_series(provider, 20 * np.eye(6), 3, 0.5, 2, mesh=dyson.GradedMesh())


def test_series_fock_against_matrix_exponential(fock_small):
    provider, pot = fock_small
    t, q = 0.05, 6
    series = dyson.sum_series(provider, pot, 6, t, q)
    exact = linalg.matrix_exp(-t * (provider.generator + pot.entries)).entries
    err = linalg.schatten_norm(series.total - exact, q)
    assert err <= series.tail_bound + 10 * series.quadrature_budget
    assert series.bound_violations == []
    for k, norm in enumerate(series.term_norms_q[1:], start=1):
        assert norm <= series.growth_cap * series.contraction**k + series.quad_errors[k] + 1e-12


def test_partial_sums_monotone_when_contraction_small(fock_small):
    provider, pot = fock_small
    t = 0.02
    series = dyson.sum_series(provider, pot, 6, t, 6)
    assert series.contraction < 0.5
    exact = linalg.matrix_exp(-t * (provider.generator + pot.entries)).entries
    partial = np.zeros_like(exact)
    residuals = []
    for k, term in enumerate(series.terms):
        partial = partial + (-1) ** k * term
        residuals.append(linalg.schatten_norm(partial - exact, 6))
    assert all(b < a for a, b in zip(residuals[:5], residuals[1:5]))


def test_variation_residual_zero_perturbation(commuting):
    provider, _ = commuting
    assert dyson.variation_residual(provider, np.zeros((6, 6)), 0.4, 2) < 1e-14


def test_variation_residual_commuting(commuting):
    provider, pert = commuting
    assert dyson.variation_residual(provider, pert, 0.7, 2) <= 1e-8


def test_variation_residual_fock(fock_small):
    provider, pot = fock_small
    series = dyson.sum_series(provider, pot, 4, 0.05, 6)
    assert dyson.variation_residual(provider, pot, 0.05, 6) <= 10 * max(series.quadrature_budget, 1e-10)


def test_admissible_time_hits_level(fock_small):
    provider, pot = fock_small
    mesh = dyson.GradedMesh(exponent=3.0)
    a = dyson.admissible_time(provider, pot, 6, level=0.5, mesh=mesh)
    value = dyson.contraction_integral(provider, pot, a, 6, mesh)[0]
    assert value == pytest.approx(0.5, rel=1e-6)


LAMBDAS = np.arange(1.0, 100_001.0)
T_GRID = np.geomspace(1e-3, 1e-1, 9)


@pytest.mark.parametrize("q,gamma,integrable", [(4.0, 0.75, True), (1.5, 1.75 / 1.5, False)])
def test_pcq_report_diagonal_model(q, gamma, integrable):
    provider = dyson.DiagonalSemigroup(LAMBDAS)
    report = dyson.pcq_report(provider, np.sqrt(LAMBDAS), q, T_GRID)
    assert report.gamma_fit == pytest.approx(gamma, abs=0.02)
    assert report.classified_pcq is integrable
    assert math.isfinite(report.integral_estimate) is integrable


def test_pcq_report_rejects_bad_grid(commuting):
    with pytest.raises(ValueError):
        dyson.pcq_report(commuting[0], commuting[1], 2, [0.5, 2.0])


def test_pcq_report_fock_small(fock_small):
    provider, pot = fock_small
    grid = np.geomspace(1e-2, 1e-1, 8)
    assert dyson.pcq_report(provider, pot, 6, grid).classified_pcq is True
    assert dyson.pcq_report(provider, pot, 1.5, grid).classified_pcq is False


def test_domination_trivial():
    a = np.diag([1.0, 2.0, 4.0])
    assert dyson.domination_check(a, a).bound_constant == pytest.approx(1.0)
    assert dyson.domination_check(a, 2 * a).bound_constant == pytest.approx(2.0)
    singular = dyson.domination_check(np.diag([1.0, 0.0]), np.eye(2))
    assert not singular.invertible_A and singular.bound_constant is None


def test_domination_dyadic_weights():
    grid = discretize.GridSpec(8.0, 120, "Central2")
    provider = dyson.SemigroupProvider(discretize.grid_matrix(0.3, None, grid).entries)
    x = np.abs(grid.nodes)
    alpha = 0.7
    dyadic = np.where(x < 1, 1.0, 2.0 ** (alpha * np.ceil(np.log2(np.maximum(x, 1.0)))))
    check = dyson.domination_check(np.diag(dyadic), np.diag(x**alpha), provider=provider, q=4,
                                   t_grid=np.geomspace(1e-3, 1, 8))
    assert check.invertible_A and check.bound_constant <= 1.0 + 1e-12
    assert check.verified


def test_equal_asymptotics_ratio(fock_small):
    provider, pot = fock_small
    for t in np.geomspace(1e-3, 1e-1, 5):
        full = linalg.schatten_norm(linalg.matrix_exp(-t * (provider.generator + pot.entries)), 6)
        ratio = full / linalg.schatten_norm(provider.evaluate(t), 6)
        assert 0.5 <= ratio <= 2.0


def test_trace_slope_upper_bound_character(fock_small):
    provider, pot = fock_small
    ts = np.geomspace(1e-3, 1e-1, 6)
    r = 2.0
    norms = [linalg.schatten_norm(linalg.matrix_exp(-t * (provider.generator + pot.entries)), r) for t in ts]
    slope = np.polyfit(np.log(ts), np.log(norms), 1)[0]
    assert slope >= -1 / r - 0.1


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 10_000), scale=st.floats(0.05, 0.5))
def test_lemma_bound_random_accretive(seed, scale):
    rng = np.random.default_rng(seed)
    n = 6
    skew = rng.normal(size=(n, n))
    gen = np.diag(rng.uniform(1, 10, n)) + 1j * (skew + skew.T)
    pert = scale * rng.normal(size=(n, n))
    provider = dyson.SemigroupProvider(gen)
    series = dyson.sum_series(provider, pert, 4, 0.3, 2, mesh=dyson.GradedMesh())
    assert series.growth_cap == 1.0
    for k, norm in enumerate(series.term_norms_q[1:], start=1):
        slack = series.quad_errors[k] + 1e-12
        assert norm <= (series.contraction + series.contraction_error) ** k + slack
