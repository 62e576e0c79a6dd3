import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst
from scipy import integrate, stats

from price_of_uncertainty import pce
from price_of_uncertainty import stochastics as st
from price_of_uncertainty.errors import UnsupportedDistribution
from price_of_uncertainty.linalg_qp import QpProblem, solve_equality_qp, solve_linear


def c2_unbounded():
    return QpProblem([0.2, 0.2], [0.5, 0.6], 0.0)


def test_gaussian_basis():
    b = pce.basis_for(st.gaussian(), 1)
    assert [list(f.coef) for f in b.functions] == [[1.0], [0.0, 1.0]]
    assert b.gram == pytest.approx((1.0, 1.0))


def test_beta_basis(beta_demand):
    b = pce.basis_for(beta_demand, 1)
    assert np.allclose(b.functions[1].coef, [-4.0, 6.0])
    assert b.gram == pytest.approx((1.0, 72 / 63), rel=1e-13)


def test_uniform_basis():
    b = pce.basis_for(st.uniform(-1.2, -1.0), 1)
    assert np.allclose(b.functions[1].coef, [0.0, 1.0])
    assert b.gram == pytest.approx((1.0, 1 / 3))


def test_unsupported_kind():
    with pytest.raises(UnsupportedDistribution):
        pce.basis_for(st.dirac(1.0))


@pytest.mark.parametrize("germ,density", [
    (st.beta(4, 2), stats.beta(4, 2).pdf),
    (st.beta(0.8, 2.5), stats.beta(0.8, 2.5).pdf),
    (st.uniform(-1, 1), stats.uniform(-1, 2).pdf),
    (st.gaussian(), stats.norm().pdf),
])
def test_orthogonality_against_scipy_quadrature(germ, density):
    b = pce.basis_for(germ, 3)
    lo, hi = (germ.support_lo, germ.support_hi) if germ.bounded else (-np.inf, np.inf)
    for i in range(4):
        for j in range(i, 4):
            fi, fj = b.functions[i], b.functions[j]
            v, _ = integrate.quad(lambda x: fi(x) * fj(x) * density(x), lo, hi, epsabs=1e-12, limit=200)
            expected = b.gram[i] if i == j else 0.0
            assert v == pytest.approx(expected, abs=1e-8, rel=1e-8)


def test_orthonormal_flag(beta_demand):
    b = pce.basis_for(beta_demand, 2, orthonormal=True)
    x, w = b.quadrature()
    g = b.evaluate(x) @ np.diag(w) @ b.evaluate(x).T
    assert np.allclose(g, np.eye(3), atol=1e-12)
    assert b.basis_id == "beta:4.0:2.0:L2:orthonormal"


@pytest.mark.parametrize("bid", ["beta:4.0:2.0:L1", "uniform:L2", "gaussian:L3:orthonormal"])
def test_basis_id_round_trip(bid):
    assert pce.basis_from_id(bid).basis_id == bid


def test_demand_expansions(beta_demand):
    for d, expected in [(beta_demand, [-1.1, 0.1]), (st.dirac(-1.0), [-1.0, 0.0]),
                        (st.uniform(-1.2, -1.0), [-1.1, 0.1])]:
        assert np.allclose(pce.pce_of_demand(d).coeffs.ravel(), expected, atol=1e-15)


@given(hst.floats(0.5, 6), hst.floats(0.5, 6), hst.floats(-3, 0), hst.floats(0.01, 2))
@settings(max_examples=50, deadline=None)
def test_expansion_reproduces_law(a, b, lo, w):
    d = st.beta(a, b, lo, lo + w)
    v = pce.pce_of_demand(d)
    mean, std = pce.moments(v)
    assert mean == pytest.approx(d.mean(), rel=1e-10, abs=1e-12)
    assert std == pytest.approx(d.std(), rel=1e-9)
    xi = np.linspace(0, 1, 7)
    assert np.allclose(v.evaluate(xi)[:, 0], lo + w * xi)


def test_moments(beta_demand):
    mean, std = pce.moments(pce.pce_of_demand(beta_demand))
    assert mean == pytest.approx(-1.1)
    assert std == pytest.approx(math.sqrt(0.01 * 72 / 63))
    assert std == pytest.approx(math.sqrt(0.36 * 2 / 63))
    gb = pce.basis_for(st.gaussian())
    assert pce.moments(pce.PceVector(gb, [2.5, 0.0])) == (2.5, 0.0)
    assert pce.moments(pce.PceVector(gb, [0.0, 1.0])) == (0.0, 1.0)


def test_pce_vector_json_round_trip(demand_pce):
    back = pce.PceVector.from_json(demand_pce.to_json())
    assert back.basis.basis_id == demand_pce.basis.basis_id
    assert np.array_equal(back.coeffs, demand_pce.coeffs)


def test_galerkin_order_zero_is_deterministic_kkt():
    b0 = pce.basis_for(st.uniform(-1, 1), 0)
    q = c2_unbounded()
    a, rhs = pce.galerkin_kkt(q, pce.PceVector(b0, [-1.0]))
    z = solve_linear(a, rhs)
    det = solve_equality_qp(q.with_rhs(-1.0))
    assert np.allclose(z[:2], det.primal)
    assert z[2] == pytest.approx(det.multiplier_balance)


def test_galerkin_c2_coefficients(demand_pce):
    a, rhs = pce.galerkin_kkt(c2_unbounded(), demand_pce)
    alpha, lam = pce.split_galerkin_solution(solve_linear(a, rhs), 2, 2)
    assert np.allclose(alpha, [[0.8, 0.3], [-0.05, -0.05]], atol=1e-14)


def test_linear_cost_only_in_mean_block(demand_pce):
    _, rhs = pce.galerkin_kkt(c2_unbounded(), demand_pce)
    assert np.allclose(rhs[:2], [-0.5, -0.6])
    assert np.allclose(rhs[3:5], 0.0)


def test_permutation_check_c2(demand_pce):
    r = pce.permutation_equivalence_check(c2_unbounded(), demand_pce)
    assert r.solution_residual <= 1e-12
    assert r.rhs_residual <= 1e-12
    assert r.matrix_residual <= 1e-12


def test_permutation_order_zero_is_identity():
    b0 = pce.basis_for(st.uniform(-1, 1), 0)
    r = pce.permutation_equivalence_check(c2_unbounded(), pce.PceVector(b0, [-1.0]))
    assert np.array_equal(r.permutation, np.eye(3))


def test_permutation_random_five_bus_order_two():
    rng = np.random.default_rng(11)
    q = QpProblem(rng.uniform(0.1, 2, 5), rng.uniform(-1, 1, 5), 0.0)
    demand = pce.PceVector(pce.basis_for(st.uniform(-1, 1), 2), rng.normal(size=(3, 2)))
    assert pce.permutation_equivalence_check(q, demand).max_residual <= 1e-10


@given(hst.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_permutation_random_instances(seed):
    q, d, active = pce.random_equivalence_case(seed)
    r = pce.permutation_equivalence_check(q, d, active)
    assert r.max_residual <= 1e-10
    m = r.permutation
    assert np.array_equal(m @ m.T, np.eye(m.shape[0]))


@pytest.mark.xfail(strict=True, reason="M' A_h M equals A_s only when M is an involution")
def test_transposed_congruence_form(demand_pce):
    r = pce.permutation_equivalence_check(c2_unbounded(), demand_pce)
    assert r.transposed_form_residual <= 1e-10


def test_germ_map_and_pinned_bound(demand_pce):
    q = QpProblem([0.2, 0.2], [0.5, 0.6], 0.0, upper=[0.85, np.inf])
    a, rhs = pce.galerkin_kkt(q, demand_pce, {(0, "upper")})
    alpha, _ = pce.split_galerkin_solution(solve_linear(a, rhs), 2, 2, n_dual=2)
    assert alpha[0, 0] == pytest.approx(0.85)
    assert alpha[1, 0] == pytest.approx(0.0)
    assert alpha.sum(axis=1) == pytest.approx(-demand_pce.total())
