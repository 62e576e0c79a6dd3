import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst
from scipy import optimize, stats

from price_of_uncertainty import ccopf, dcopf, pce
from price_of_uncertainty import stochastics as st
from price_of_uncertainty.errors import DomainError, InfeasibleTightening

G1 = 72 / 63


def slsqp_oracle(net, delta, d0=-1.1, d1=0.1, g=G1):
    """Independent solve of the moment-tightened policy QP with a general NLP method."""
    gens = net.generators
    hd = np.array([x.cost_quadratic for x in gens])
    hl = np.array([x.cost_linear for x in gens])

    def cost(z):
        a0, a1 = z[:2], z[2:]
        return 0.5 * a0 @ (hd * a0) + 0.5 * g * a1 @ (hd * a1) + hl @ a0

    cons = [{"type": "eq", "fun": lambda z: z[0] + z[1] + d0},
            {"type": "eq", "fun": lambda z: z[2] + z[3] + d1}]
    for i, x in enumerate(gens):
        if math.isfinite(x.p_max):
            cons.append({"type": "ineq",
                         "fun": lambda z, i=i, b=x.p_max: b - z[i] - delta * math.sqrt(g * z[2 + i] ** 2 + 1e-30)})
    r = optimize.minimize(cost, np.array([0.5, 0.5, -0.05, -0.05]), constraints=cons, method="SLSQP",
                          options={"ftol": 1e-15, "maxiter": 500})
    return r.x.reshape(2, 2)


def p_sat_oracle(alpha0, alpha1, bound=0.85):
    # p1 = alpha0 + alpha1 (6 xi - 4) with xi ~ Beta(4, 2) and alpha1 < 0
    cut = ((bound - alpha0) / alpha1 + 4.0) / 6.0
    return float(stats.beta(4, 2).sf(cut))


def solve(net, demand_pce, delta):
    return ccopf.solve_ccopf(net, demand_pce, ccopf.ChanceSpec.from_network(net, delta))


@pytest.mark.parametrize("h11", [0.2, 0.3])
@pytest.mark.parametrize("delta", [0.0, 1.0, 2.0, 3.0])
def test_c1_closed_form(h11, delta, demand_pce):
    net = dcopf.case_c1(h11)
    cs = dcopf.ArgminCaseSplit.from_network(net)
    pol = solve(net, demand_pce, delta)
    b, g = cs.beta, cs.gamma
    expected = [[-b - g * -1.1, b - (1 - g) * -1.1], [-g * 0.1, -(1 - g) * 0.1]]
    assert np.allclose(pol.alpha, expected, atol=1e-14)


@pytest.mark.parametrize("delta,a0,a1,p", [(2.0, 0.788619, -0.028708, 0.9651), (3.0, 0.788964, -0.019031, 0.9986)])
def test_c2_coefficients(c2, demand_pce, delta, a0, a1, p):
    pol = solve(c2, demand_pce, delta)
    assert pol.alpha[0, 0] == pytest.approx(a0, abs=1e-6)
    assert pol.alpha[1, 0] == pytest.approx(a1, abs=1e-6)
    assert np.allclose(pol.alpha, slsqp_oracle(c2, delta), atol=1e-6)
    assert ccopf.satisfaction_probability(pol, c2.total_demand_distribution(), 1, 0.85) == \
        pytest.approx(p, abs=5e-5)


@pytest.mark.parametrize("delta", [2.0, 3.0])
def test_c2_probability_oracle(c2, demand_pce, delta):
    pol = solve(c2, demand_pce, delta)
    expected = p_sat_oracle(pol.alpha[0, 0], pol.alpha[1, 0])
    assert ccopf.satisfaction_probability(pol, c2.total_demand_distribution(), 1, 0.85) == \
        pytest.approx(expected, abs=1e-12)


def test_margin_is_tight(c2, demand_pce):
    pol = solve(c2, demand_pce, 2.0)
    assert pol.mean(1) + 2.0 * pol.std(1) == pytest.approx(0.85, abs=1e-12)
    assert pol.balance_residual() <= 1e-14
    assert all(v <= 1e-10 for v in pol.kkt.values())


def test_delta_zero_c2_is_unconstrained(c2, demand_pce):
    pol = solve(c2, demand_pce, 0.0)
    assert np.allclose(pol.alpha, [[0.8, 0.3], [-0.05, -0.05]])


@given(hst.floats(0.0, 6.0))
@settings(max_examples=40, deadline=None)
def test_against_nlp_oracle(delta):
    net = dcopf.case_c2()
    demand_pce = pce.pce_of_demand(net.total_demand_distribution())
    pol = solve(net, demand_pce, delta)
    assert np.allclose(pol.alpha, slsqp_oracle(net, delta), atol=1e-6)
    assert pol.mean(1) + delta * pol.std(1) <= 0.85 + 1e-12


def test_infeasible_tightening(demand_pce):
    net = dcopf.Network((dcopf.Bus(1, 0.2, 0.5, p_max=0.5, has_generator=True),
                         dcopf.Bus(2, 0.2, 0.6, p_max=0.5, has_generator=True),
                         dcopf.Bus(3, demand=st.beta(4, 2, -1.5, -0.9))))
    with pytest.raises(InfeasibleTightening):
        solve(net, demand_pce, 2.0)


def test_evaluate_c1_at_mean(demand_pce):
    pol = solve(dcopf.case_c1(0.2), demand_pce, 2.0)
    assert np.allclose(ccopf.evaluate_policy(pol, -1.1, physical=True), [0.8, 0.3])
    assert np.allclose(ccopf.evaluate_policy(pol, 2 / 3), [0.8, 0.3])


def test_evaluate_c1_matches_argmin(demand_pce):
    net = dcopf.case_c1(0.2)
    pol = solve(net, demand_pce, 2.0)
    for pd in np.linspace(-1.5, -0.9, 13):
        assert np.allclose(ccopf.evaluate_policy(pol, pd, physical=True), dcopf.argmin(net, [0, 0, pd]),
                           atol=1e-12)


def test_evaluate_c2_extremes(c2, demand_pce):
    pol = solve(c2, demand_pce, 2.0)
    # largest load: xi = 0, psi_1 = -4
    hi = ccopf.evaluate_policy(pol, -1.5, physical=True)
    assert hi[0] == pytest.approx(pol.alpha[0, 0] - 4 * pol.alpha[1, 0])
    assert hi.sum() == pytest.approx(1.5)
    lo = ccopf.evaluate_policy(pol, -0.9, physical=True)
    assert lo[0] == pytest.approx(pol.alpha[0, 0] + 2 * pol.alpha[1, 0])


def test_evaluate_outside_support(c2, demand_pce):
    pol = solve(c2, demand_pce, 2.0)
    with pytest.raises(DomainError):
        ccopf.evaluate_policy(pol, -2.0, physical=True)


def test_policy_density_c2_support(c2, demand_pce):
    pol = solve(c2, demand_pce, 2.0)
    m = ccopf.policy_density(pol, c2.total_demand_distribution(), 1)
    lo, hi = m.support()
    assert lo == pytest.approx(pol.alpha[0, 0] + 2 * pol.alpha[1, 0])
    assert hi == pytest.approx(pol.alpha[0, 0] - 4 * pol.alpha[1, 0])
    assert st.total_mass(m) == pytest.approx(1.0, abs=1e-6)


def test_policy_density_equals_hopf_c1(demand_pce):
    from price_of_uncertainty import hopf
    net = dcopf.case_c1(0.2)
    pol = solve(net, demand_pce, 2.0)
    m = ccopf.policy_density(pol, net.total_demand_distribution(), 1)
    a = hopf.analytic_hopf_density(net)[1]
    assert m.support() == pytest.approx((0.7, 1.0))
    x = np.linspace(0.701, 0.999, 50)
    assert np.allclose(m.density(x), a.density(x), rtol=1e-12)


def test_policy_density_degenerate(demand_pce, beta_demand):
    pol = ccopf.Policy(demand_pce.basis, np.array([[0.5, 0.6], [0.0, -0.1]]), 0.0, (1, 2), demand_pce)
    assert ccopf.policy_density(pol, beta_demand, 1).atoms == ((0.5, 1.0),)


def test_c1_probability_is_one(demand_pce):
    net = dcopf.case_c1(0.2)
    pol = solve(net, demand_pce, 2.0)
    assert ccopf.satisfaction_probability(pol, net.total_demand_distribution(), 1, 1.5) == 1.0
    assert ccopf.violation_probability(pol, net.total_demand_distribution(), 1, 1.5) == 0.0


def test_violation_complements_satisfaction(c2, demand_pce):
    pol = solve(c2, demand_pce, 2.0)
    d = c2.total_demand_distribution()
    assert ccopf.violation_probability(pol, d, 1, 0.85) == pytest.approx(0.0349, abs=5e-5)
    assert ccopf.satisfaction_probability(pol, d, 1, 0.85, "lower") == \
        pytest.approx(ccopf.violation_probability(pol, d, 1, 0.85), abs=1e-15)


def test_policy_json_round_trip(c2, demand_pce):
    pol = solve(c2, demand_pce, 3.0)
    back = ccopf.Policy.from_json(pol.to_json())
    assert np.array_equal(back.alpha, pol.alpha)
    assert back.basis.basis_id == pol.basis.basis_id


def test_policy_affine_map(c2, demand_pce):
    pol = solve(c2, demand_pce, 2.0)
    c, s = ccopf.policy_affine_map(pol, 1)
    for pd in (-1.4, -1.0):
        assert c + s * pd == pytest.approx(ccopf.evaluate_policy(pol, pd, physical=True)[0])
