import numpy as np
import pytest

from price_of_uncertainty import dcopf, hopf
from price_of_uncertainty import stochastics as st
from price_of_uncertainty.errors import InfeasibleProblem, UnsupportedTopology

from conftest import binomial_band


def test_atom_frequency_c2(c2_hopf_samples):
    frac = np.mean(c2_hopf_samples.column(1) == 0.85)
    assert abs(frac - 0.1875) <= binomial_band(0.1875, 100_000)


def test_no_violations_c2(c2_hopf_samples):
    v = c2_hopf_samples.max_violation()
    assert v["balance"] <= 1e-12
    assert v["bounds"] == 0.0


def test_rows_match_box_qp(c2, c2_hopf_samples):
    e = c2_hopf_samples
    for k in range(0, e.n, 997):
        assert np.allclose(e.samples[k], dcopf.argmin(c2, e.demands[k]), atol=1e-12)


def test_dirac_demand_rows():
    net = dcopf.case_c2(st.dirac(-1.0))
    e = hopf.run_hopf(net, 50, seed=1)
    assert np.allclose(e.samples, [0.75, 0.25])


def test_single_sample_deterministic(c2):
    a = hopf.run_hopf(c2, 1, seed=5)
    b = hopf.run_hopf(c2, 1, seed=5)
    assert np.array_equal(a.samples, b.samples)


@pytest.mark.parametrize("chunk,workers", [(7, 1), (1000, 3), (333, 2)])
def test_chunking_does_not_change_output(c2, chunk, workers):
    ref = hopf.run_hopf(c2, 5000, seed=3)
    other = hopf.run_hopf(c2, 5000, seed=3, chunk_size=chunk, workers=workers)
    assert np.array_equal(ref.samples, other.samples)
    assert np.array_equal(ref.demands, other.demands)


def test_infeasible_sample_index():
    net = dcopf.Network((dcopf.Bus(1, 0.2, 0.5, p_min=0.0, p_max=1.0, has_generator=True),
                         dcopf.Bus(2, 0.2, 0.6, p_min=0.0, p_max=0.1, has_generator=True),
                         dcopf.Bus(3, demand=st.uniform(-1.5, -0.5))))
    with pytest.raises(InfeasibleProblem) as info:
        hopf.run_hopf(net, 200, seed=0)
    k = info.value.sample_index
    assert k is not None
    assert hopf.sample_demands(net, 200, 0)[k].sum() < -1.1


def test_analytic_c1_no_atom():
    m = hopf.analytic_hopf_density(dcopf.case_c1(0.2))[1]
    assert m.atoms == ()
    assert m.support() == pytest.approx((0.7, 1.0))
    assert st.total_mass(m) == pytest.approx(1.0, abs=1e-6)


def test_analytic_c2_bus1(c2):
    m = hopf.analytic_hopf_density(c2)[1]
    assert len(m.atoms) == 1
    assert m.atoms[0][0] == 0.85
    assert m.atoms[0][1] == pytest.approx(0.1875, abs=1e-14)
    assert m.continuous_mass() == pytest.approx(0.8125, abs=1e-7)
    assert st.total_mass(m) == pytest.approx(1.0, abs=1e-6)


def test_analytic_c2_bus2(c2):
    m = hopf.analytic_hopf_density(c2)[2]
    assert m.support() == pytest.approx((0.2, 0.65))
    assert 0.35 in [pytest.approx(b) for b in m.breakpoints]
    assert st.total_mass(m) == pytest.approx(1.0, abs=1e-6)


def test_analytic_requires_two_generators():
    net = dcopf.Network((dcopf.Bus(1, 0.2, has_generator=True), dcopf.Bus(2, demand=st.beta(4, 2, -1, 0))))
    with pytest.raises(UnsupportedTopology):
        hopf.analytic_hopf_density(net)


def test_report_c2(c2, c2_hopf_samples):
    a = hopf.analytic_hopf_density(c2)
    r = hopf.empirical_vs_analytic_report(c2_hopf_samples, a[1], 1)
    assert abs(r["atoms"][0]["z_score"]) <= 3.0
    assert r["ks_statistic"] < r["ks_critical_1pct"]
    r2 = hopf.empirical_vs_analytic_report(c2_hopf_samples, a[2], 2)
    assert r2["ks_statistic"] < r2["ks_critical_1pct"]


def test_report_c1_no_atom():
    net = dcopf.case_c1(0.2)
    e = hopf.run_hopf(net, 100_000, seed=8)
    r = hopf.empirical_vs_analytic_report(e, hopf.analytic_hopf_density(net)[1], 1)
    assert all(a["frequency"] == 0.0 for a in r["atoms"])


def test_self_sampling_ks(c2):
    m = hopf.analytic_hopf_density(c2)[2]
    x = m.sample(1_000_000, 99)
    assert st.ks_statistic(x, m.cdf) < st.ks_critical(x.size)


def test_samples_csv(tmp_path, c2):
    e = hopf.run_hopf(c2, 10, seed=1)
    lines = e.to_csv(tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "sample,demand_total,p_bus1,p_bus2,cost"
    assert len(lines) == 11
