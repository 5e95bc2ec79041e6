

import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import stats

from src.api.schemas.params import AltNBKind, AltNBParams, ExtNBParams, NBParams, ParamKind, PoissonParams
from src.services.distributions import (
    ConversionError,
    continuous_log_pmfs,
    convert_params,
    ext_nb_log_pmf,
    law_cdf,
    law_moments,
    law_sample,
    log_ratio,
    nb_cdf,
    nb_log_pmf,
    pois_cdf,
    pois_log_pmf,
    sample_nb,
    sample_pois,
    stationary_point,
    upper_quantile,
)
from src.services.rng import child_rng


class TestParams:
    """Tests for parameter validation."""

    def test_poisson_alias(self):
        """PoissonParams accepts both lam and lambda."""
        assert PoissonParams(lam=2.0) == PoissonParams(**{"lambda": 2.0})

    @pytest.mark.parametrize("p", [0.0, 1.5, -0.1])
    def test_nb_p_range(self, p):
        """p must lie in (0, 1]."""
        with pytest.raises(ValidationError):
            NBParams(nu=1.0, p=p)

    def test_nb_nu_positive(self):
        """nu must be positive."""
        with pytest.raises(ValidationError):
            NBParams(nu=0.0, p=0.5)

    def test_one_minus_p_range(self):
        """P = 1 - p must stay below 1."""
        with pytest.raises(ValidationError):
            AltNBParams(kind=AltNBKind.NU_ONE_MINUS_P, nu=1.0, second=1.0)

    def test_ext_nb_mean_nonnegative(self):
        """mu must be nonnegative."""
        with pytest.raises(ValidationError):
            ExtNBParams(mu=-1.0, p=0.5)


class TestLogPmf:
    """Tests for log-PMFs."""

    def test_poisson_zero(self):
        """Poisson(1) at 0 is e^-1."""
        assert pois_log_pmf(PoissonParams(lam=1.0), 0) == pytest.approx(-1.0, abs=1e-15)

    def test_poisson_two(self):
        """Poisson(2) at 2 is ln 2 - 2."""
        assert pois_log_pmf(PoissonParams(lam=2.0), 2) == pytest.approx(math.log(2) - 2, abs=1e-13)

    def test_poisson_normalized(self):
        """Poisson(10) masses over 0..200 sum to 1."""
        total = np.exp(pois_log_pmf(PoissonParams(lam=10.0), np.arange(201))).sum()
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_geometric(self):
        """NB(1, 0.5) at 0 is ln 0.5."""
        assert nb_log_pmf(NBParams(nu=1.0, p=0.5), 0) == pytest.approx(math.log(0.5), abs=1e-15)

    def test_degenerate(self):
        """NB with p = 1 is the point mass at zero."""
        params = NBParams(nu=3.0, p=1.0)
        assert nb_log_pmf(params, 0) == 0.0
        assert nb_log_pmf(params, 1) == -math.inf

    def test_matches_scipy(self):
        """NB log-PMF agrees with scipy's nbinom."""
        y = np.arange(60)
        ours = nb_log_pmf(NBParams(nu=2.5, p=0.3), y)
        assert np.allclose(ours, stats.nbinom.logpmf(y, 2.5, 0.3), rtol=1e-12)

    def test_moments_table(self):
        """NB(10, 0.9) has mean 1.1111 and variance 1.2346."""
        mean, var = law_moments(NBParams(nu=10.0, p=0.9))
        assert mean == pytest.approx(1.1111, abs=1e-4)
        assert var == pytest.approx(1.2346, abs=1e-4)

    def test_non_integer_support(self):
        """Non-integer support points are rejected."""
        with pytest.raises(ValueError):
            pois_log_pmf(PoissonParams(lam=1.0), 1.5)


class TestExtendedFamily:
    """Tests for the extended NB(mu, p) family."""

    def test_point_mass(self):
        """mu = 0 is the point mass at zero whatever p."""
        params = ExtNBParams(mu=0.0, p=0.3)
        assert ext_nb_log_pmf(params, 0) == 0.0
        assert ext_nb_log_pmf(params, 3) == -math.inf

    def test_poisson_member(self):
        """p = 1 is Poisson(mu)."""
        assert ext_nb_log_pmf(ExtNBParams(mu=5.0, p=1.0), 2) == pois_log_pmf(PoissonParams(lam=5.0), 2)

    def test_continuity_at_p_one(self):
        """p close to 1 approaches the Poisson member."""
        near = ext_nb_log_pmf(ExtNBParams(mu=5.0, p=0.999999), 2)
        assert near == pytest.approx(pois_log_pmf(PoissonParams(lam=5.0), 2), abs=1e-4)

    def test_cdf_dispatch(self):
        """law_cdf of a Poisson-member ExtNB equals the Poisson CDF."""
        y = np.arange(20)
        assert np.allclose(law_cdf(ExtNBParams(mu=3.0, p=1.0), y), pois_cdf(PoissonParams(lam=3.0), y))

    def test_moments(self):
        """Extended family mean mu and variance mu / p."""
        assert law_moments(ExtNBParams(mu=2.0, p=0.5)) == (2.0, 4.0)


class TestCdf:
    """Tests for CDFs and quantiles."""

    def test_geometric_tail(self):
        """NB(1, 0.5) at 3 is 1 - 0.5^4."""
        assert nb_cdf(NBParams(nu=1.0, p=0.5), 3) == pytest.approx(0.9375, abs=1e-14)

    def test_degenerate(self):
        """The p = 1 member has CDF 1 at 0."""
        assert nb_cdf(NBParams(nu=2.0, p=1.0), 0) == 1.0

    def test_far_tail(self):
        """NB(5, 0.5) at 40 matches the summed PMF, about 1 - 4.67e-9."""
        params = NBParams(nu=5.0, p=0.5)
        brute = math.fsum(np.exp(nb_log_pmf(params, np.arange(41))))
        assert nb_cdf(params, 40) == pytest.approx(brute, abs=1e-13)
        assert 1.0 - nb_cdf(params, 40) == pytest.approx(4.67e-9, rel=1e-2)

    def test_poisson_values(self):
        """Poisson(1) at 0 is e^-1 and Poisson(5) at 5 is about 0.6159607."""
        assert pois_cdf(PoissonParams(lam=1.0), 0) == pytest.approx(math.exp(-1), abs=1e-15)
        assert pois_cdf(PoissonParams(lam=5.0), 5) == pytest.approx(0.6159607, abs=1e-7)

    def test_upper_quantile(self):
        """Mass beyond the upper quantile is below the tail level."""
        params = NBParams(nu=0.5, p=0.1)
        y = upper_quantile(params, 1e-10)
        assert 1.0 - nb_cdf(params, y) <= 1e-9
        assert np.exp(nb_log_pmf(params, np.arange(y + 1))).sum() >= 1 - 1e-9

    def test_poisson_limit(self):
        """NB(nu, nu/(nu+lambda)) CDFs approach Poisson(lambda) as nu grows."""
        y = np.arange(201)
        pois = pois_cdf(PoissonParams(lam=4.0), y)
        gaps = [
            np.max(np.abs(nb_cdf(NBParams(nu=nu, p=nu / (nu + 4.0)), y) - pois))
            for nu in (1e2, 1e3, 1e4)
        ]
        assert gaps[0] > gaps[1] > gaps[2]


class TestContinuousExtension:
    """Tests for the real-argument PMFs and their log ratio."""

    def test_at_zero(self):
        """At x = 0 the log-PMFs are -lambda and nu ln(nu/(nu+lambda))."""
        ln_pois, ln_nb = continuous_log_pmfs(5.0, 2.0, 0.0)
        assert ln_pois == pytest.approx(-5.0)
        assert ln_nb == pytest.approx(2.0 * math.log(2.0 / 7.0))

    def test_integer_consistency(self):
        """At integer x both match the discrete log-PMFs."""
        ln_pois, ln_nb = continuous_log_pmfs(5.0, 2.0, 3.0)
        assert ln_pois == pytest.approx(pois_log_pmf(PoissonParams(lam=5.0), 3), abs=1e-12)
        assert ln_nb == pytest.approx(nb_log_pmf(NBParams(nu=2.0, p=2.0 / 7.0), 3), abs=1e-12)

    def test_log_ratio_matches(self):
        """log_ratio is the difference of the two log-PMFs."""
        ln_pois, ln_nb = continuous_log_pmfs(5.0, 2.0, 4.5)
        assert log_ratio(5.0, 2.0, 4.5) == pytest.approx(ln_nb - ln_pois, abs=1e-12)

    @pytest.mark.parametrize("lam,nu", [(1.0, 0.5), (5.0, 2.0), (10.0, 100.0)])
    def test_stationary_point(self, lam, nu):
        """x* lies above lambda and r is smallest there on a grid."""
        x_star = stationary_point(lam, nu)
        assert lam < x_star < lam + 1
        grid = np.linspace(0.0, 4 * lam + 10, 4001)
        r = log_ratio(lam, nu, grid)
        assert abs(grid[np.argmin(r)] - x_star) <= grid[1] - grid[0]


class TestConversions:
    """Tests for alternative parameterizations."""

    def test_nu_mu(self):
        """NB(10, 0.9) has mu = 10 * 0.1 / 0.9."""
        alt = convert_params(NBParams(nu=10.0, p=0.9), ParamKind.NU_MU)
        assert alt.kind == AltNBKind.NU_MU
        assert alt.second == pytest.approx(10 * 0.1 / 0.9, rel=1e-14)

    def test_ext_to_nb(self):
        """ExtNB(5, 0.5) is NB(5, 0.5)."""
        nb = convert_params(ExtNBParams(mu=5.0, p=0.5), ParamKind.NB)
        assert nb.nu == pytest.approx(5.0)
        assert nb.p == 0.5

    def test_boundary_one_minus_p(self):
        """At nu_max the 1 - p parameter is mean / (nu_max + mean)."""
        mean, nu_max = 10.0, 1e4
        alt = convert_params(NBParams(nu=nu_max, p=nu_max / (nu_max + mean)), ParamKind.NU_ONE_MINUS_P)
        assert alt.second == pytest.approx(mean / (nu_max + mean), rel=1e-12)

    @pytest.mark.parametrize("kind", [ParamKind.NU_MU, ParamKind.NU_BIG_P, ParamKind.NU_ONE_MINUS_P, ParamKind.EXT_NB])
    def test_round_trip(self, kind):
        """Converting there and back recovers (nu, p)."""
        source = NBParams(nu=3.7, p=0.42)
        back = convert_params(convert_params(source, kind), ParamKind.NB)
        assert back.nu == pytest.approx(source.nu, rel=1e-12)
        assert back.p == pytest.approx(source.p, rel=1e-12)

    def test_pmf_agreement(self):
        """Converted laws have the same PMF."""
        source = NBParams(nu=3.7, p=0.42)
        ext = convert_params(source, ParamKind.EXT_NB)
        y = np.arange(101)
        assert np.allclose(ext_nb_log_pmf(ext, y), nb_log_pmf(source, y), atol=1e-12)

    def test_poisson_member_unrepresentable(self):
        """ExtNB with p = 1 and mu > 0 has no NB form."""
        with pytest.raises(ConversionError):
            convert_params(ExtNBParams(mu=2.0, p=1.0), ParamKind.NU_MU)


class TestSamplers:
    """Tests for seeded samplers."""

    def test_degenerate_all_zero(self):
        """NB with p = 1 draws only zeros."""
        draws = sample_nb(NBParams(nu=2.0, p=1.0), 100, child_rng(1))
        assert np.all(draws == 0)

    def test_poisson_mean_band(self):
        """Poisson(10) sample mean is within 5 standard errors."""
        draws = sample_pois(PoissonParams(lam=10.0), 100_000, child_rng(7))
        assert abs(draws.mean() - 10.0) <= 5 * math.sqrt(10.0 / 100_000)

    def test_nb_moments(self):
        """NB(10, 0.9) empirical mean and variance match the formulas."""
        draws = sample_nb(NBParams(nu=10.0, p=0.9), 100_000, child_rng(11))
        mean, var = law_moments(NBParams(nu=10.0, p=0.9))
        assert abs(draws.mean() - mean) <= 5 * math.sqrt(var / 100_000)
        assert draws.var() == pytest.approx(var, rel=0.05)

    def test_deterministic(self):
        """The same stream key gives the same draws."""
        a = law_sample(NBParams(nu=1.0, p=0.3), 50, child_rng(3, 1, 2))
        b = law_sample(NBParams(nu=1.0, p=0.3), 50, child_rng(3, 1, 2))
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        """Different keys give different draws."""
        a = law_sample(PoissonParams(lam=5.0), 50, child_rng(3, 1))
        b = law_sample(PoissonParams(lam=5.0), 50, child_rng(3, 2))
        assert not np.array_equal(a, b)

    def test_small_mean(self):
        """NB(1, 0.99) sample mean is near 0.0101."""
        draws = sample_nb(NBParams(nu=1.0, p=0.99), 100_000, child_rng(5))
        assert draws.min() >= 0
        assert draws.mean() == pytest.approx(0.0101, abs=0.002)
