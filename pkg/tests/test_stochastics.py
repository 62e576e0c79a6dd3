import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst
from scipy import special, stats

from price_of_uncertainty import stochastics as st
from price_of_uncertainty.errors import DomainError
from price_of_uncertainty.quadrature import adaptive_simpson
from price_of_uncertainty.rng import SplitMix64

from conftest import binomial_band


def test_pdf_outside_support(beta_demand):
    assert st.pdf(beta_demand, -1.6) == 0.0


def test_pdf_uniform_special_case():
    assert st.pdf(st.beta(1, 1), 0.3) == pytest.approx(1.0)


def test_pdf_closed_form(beta_demand):
    assert st.pdf(beta_demand, -1.1) == pytest.approx((2 / 3) ** 3 * (1 / 3) * 20 / 0.6, rel=1e-12)


@pytest.mark.parametrize("d", [st.beta(4, 2, -1.5, -0.9), st.uniform(-1, 1), st.beta(0.7, 3.0)])
def test_cdf_at_upper_end(d):
    assert st.cdf(d, d.support_hi) == 1.0


def test_cdf_binomial_identity(beta_demand):
    assert st.cdf(beta_demand, -1.2) == pytest.approx(6 / 32, abs=1e-14)


def test_cdf_polynomial_oracle():
    x = 0.3103192
    assert st.cdf(st.beta(4, 2), x) == pytest.approx(5 * x**4 * (1 - x) + x**5, abs=1e-14)
    assert st.cdf(st.beta(4, 2), x) == pytest.approx(0.034855, abs=1e-6)


@given(hst.floats(0.2, 30.0), hst.floats(0.2, 30.0), hst.floats(0.0, 1.0))
@settings(max_examples=300, deadline=None)
def test_betainc_matches_scipy(a, b, x):
    assert st.betainc(a, b, x) == pytest.approx(special.betainc(a, b, x), abs=1e-12)


def test_gaussian_cdf_matches_scipy():
    x = np.linspace(-6, 6, 101)
    assert np.allclose(st.cdf(st.gaussian(1.0, 2.0), x), stats.norm(1.0, 2.0).cdf(x), atol=1e-14)


def test_quantiles():
    assert st.quantile(st.uniform(0, 1), 0.25) == pytest.approx(0.25)
    assert st.quantile(st.beta(4, 2, -1.5, -0.9), 0.1875) == pytest.approx(-1.2, abs=1e-12)
    assert st.quantile(st.gaussian(), 0.5) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.5])
def test_quantile_domain(u):
    with pytest.raises(DomainError):
        st.quantile(st.uniform(0, 1), u)


@given(hst.floats(0.5, 8.0), hst.floats(0.5, 8.0), hst.floats(1e-6, 1 - 1e-6))
@settings(max_examples=200, deadline=None)
def test_cdf_inverts_quantile(a, b, u):
    d = st.beta(a, b)
    assert st.cdf(d, st.quantile(d, u)) == pytest.approx(u, rel=1e-9, abs=1e-13)


def test_sample_deterministic(beta_demand):
    assert st.sample(beta_demand, 1, 9)[0] == st.sample(beta_demand, 1, 9)[0]


def test_sample_mean_and_atom_fraction(beta_demand):
    x = st.sample(beta_demand, 100_000, 2024)
    assert abs(x.mean() + 1.1) < 0.002
    assert abs((x <= -1.2).mean() - 0.1875) < binomial_band(0.1875, 100_000)


def test_sample_accepts_stream(beta_demand):
    g = SplitMix64(5)
    a = st.sample(beta_demand, 10, g)
    b = st.sample(beta_demand, 10, g)
    assert np.array_equal(np.concatenate([a, b]), st.sample(beta_demand, 20, 5))


def test_sample_ks(beta_demand):
    x = st.sample(beta_demand, 20_000, 77)
    assert st.ks_statistic(x, lambda t: st.cdf(beta_demand, t)) < st.ks_critical(x.size)


def test_distribution_moments(beta_demand):
    assert beta_demand.mean() == pytest.approx(-1.1)
    assert beta_demand.std() == pytest.approx(math.sqrt(0.36 * 2 / 63))


@pytest.mark.parametrize("d", [st.beta(4, 2, -1.5, -0.9), st.uniform(-1, 2), st.gaussian(0.5, 2), st.dirac(-1.0)])
def test_dict_round_trip(d):
    assert st.Distribution1D.from_dict(d.to_dict()) == d


def test_total_mass_single_atom():
    assert st.total_mass(st.MixedDensity1D(atoms=((0.3, 1.0),))) == 1.0


def test_total_mass_beta(beta_demand):
    assert st.total_mass(st.to_mixed(beta_demand)) == pytest.approx(1.0, abs=1e-6)


def test_mixed_density_rejects_overlap():
    with pytest.raises(ValueError):
        st.MixedDensity1D((st.constant_piece(0, 2, 0.25), st.constant_piece(1, 3, 0.25)))


def test_mixed_cdf_includes_atom():
    m = st.MixedDensity1D((st.constant_piece(0.0, 1.0, 0.5),), ((1.0, 0.5),))
    assert m.cdf(0.5) == pytest.approx(0.25)
    assert m.cdf(1.0) == pytest.approx(1.0)
    assert m.atom_mass == 0.5


def test_mixed_sample_atom_frequency():
    m = st.MixedDensity1D((st.constant_piece(0.0, 1.0, 0.7),), ((2.0, 0.3),))
    x = m.sample(50_000, 3)
    assert abs((x == 2.0).mean() - 0.3) < binomial_band(0.3, 50_000)
    assert np.all((x >= 0.0) & (x <= 2.0))


def test_pushforward_affine_matches_scaled_pdf(beta_demand):
    m = st.pushforward_affine(beta_demand, -0.5, 0.25)
    assert m.support() == pytest.approx((0.7, 1.0))
    assert st.total_mass(m) == pytest.approx(1.0, abs=1e-8)
    assert m.density(0.8) == pytest.approx(2.0 * st.pdf(beta_demand, -1.1))


def test_density_csv(tmp_path, beta_demand):
    path = st.write_density_csv(st.to_mixed(beta_demand), tmp_path / "d.csv")
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert path.read_text().splitlines()[0] == "x,f"
    assert np.trapezoid(data[:, 1], data[:, 0]) == pytest.approx(1.0, abs=1e-4)


def test_adaptive_simpson_polynomial_exact():
    v, _ = adaptive_simpson(lambda x: 3 * x**2, 0.0, 2.0)
    assert v == pytest.approx(8.0, abs=1e-12)


def test_adaptive_simpson_kink():
    v, _ = adaptive_simpson(lambda x: abs(x - 0.3), 0.0, 1.0, tol=1e-10)
    assert v == pytest.approx(0.5 * 0.3**2 + 0.5 * 0.7**2, abs=1e-9)
