

import math

import numpy as np
import pytest

from src.api.schemas.params import PoissonParams
from src.services.distributions import sample_pois
from src.services.limits import (
    G_lambda,
    G_of,
    StructuralError,
    diff_profile,
    nb_law,
    point_mass_law,
    poisson_law,
    weighted_difference,
)
from src.services.rng import child_rng
from src.services.score import ScoreContext
from src.services.special import digamma
from src.services.sufficient_stats import summarize


class TestDiscreteLaw:
    """Tests for the tail bounds behind the truncations."""

    def test_poisson_tail_bound(self):
        """The geometric bound dominates the actual tail sum."""
        law = poisson_law(5.0)
        y = np.arange(20, 400)
        actual = float(np.sum(law.sf(y)))
        assert law.tail_mass_bound(19) >= actual

    def test_no_bound_yet(self):
        """A ratio bound of at least 1 gives an infinite tail bound."""
        law = nb_law(100.0, 0.01)
        assert math.isinf(law.tail_mass_bound(0))

    def test_point_mass_tail(self):
        """The point mass has no tail."""
        assert point_mass_law().tail_mass_bound(0) == 0.0

    def test_nb_mean(self):
        """NB(nu, p) has mean nu (1 - p) / p."""
        assert nb_law(2.0, 0.25).mean == pytest.approx(6.0)


class TestGLimit:
    """Tests for the almost-sure limit of the score."""

    def test_zero_at_generating_nb(self):
        """G vanishes at the nu of the NB that generated the data."""
        for nu, p in ((2.0, 2 / 7), (0.5, 0.3), (40.0, 0.9)):
            assert abs(G_of(nb_law(nu, p), nu)) <= 1e-8

    def test_poisson_positive(self):
        """Under Poisson(5), G(100) is strictly positive."""
        assert G_lambda(5.0, 100.0) > 0

    def test_poisson_positive_on_grid(self):
        """G_lambda stays positive from small to very large nu."""
        for nu in np.geomspace(1e-2, 1e6, 25):
            assert G_lambda(3.0, float(nu)) > 0

    def test_large_nu_asymptote(self):
        """nu^3 G_lambda(nu) approaches lambda^2 / 2."""
        nu = 1e5
        assert nu ** 3 * G_lambda(4.0, nu, tol=1e-20) == pytest.approx(8.0, rel=1e-3)

    def test_point_mass(self):
        """The point mass at zero gives G = 0."""
        assert G_of(point_mass_law(), 3.0) == 0.0

    def test_nu_domain(self):
        """nu must be positive."""
        with pytest.raises(ValueError):
            G_lambda(1.0, 0.0)


class TestDiffProfile:
    """Tests for the CDF difference profile D(y)."""

    def test_first_value(self):
        """lambda 5, nu 2: D(0) = (2/7)^2 - e^-5."""
        profile = diff_profile(5.0, 2.0)
        assert profile.D[0] == pytest.approx((2 / 7) ** 2 - math.exp(-5.0), abs=1e-12)

    def test_sums_to_zero(self):
        """Matched means make the D(y) sum vanish."""
        profile = diff_profile(5.0, 2.0)
        assert abs(math.fsum(profile.D)) <= 1e-9

    def test_index_order(self):
        """0 <= K1 < K* < K2 <= y_cut."""
        for lam, nu in ((5.0, 2.0), (1.0, 1e6), (3.0, 1e6)):
            profile = diff_profile(lam, nu)
            assert 0 <= profile.K1 < profile.Kstar < profile.K2 <= profile.y_cut

    def test_extremes(self):
        """D peaks at K1 and bottoms out just before K2."""
        for lam, nu in ((10.0, 3.0), (5.0, 2.0), (10.0, 100.0), (1.0, 0.5)):
            profile = diff_profile(lam, nu)
            assert profile.D[profile.K1] == profile.D.max()
            assert profile.D[profile.K2 - 1] == profile.D.min()
            assert profile.D[profile.K2] > profile.D[profile.K2 - 1]

    def test_d_finite_with_heavy_tail(self):
        """Small nu stretches the profile far into the NB tail without overflow."""
        profile = diff_profile(10.0, 0.01)
        assert np.isfinite(profile.d).all()
        assert np.isfinite(profile.D).all()
        assert profile.y_cut > 1000

    def test_d_signs(self):
        """d is positive outside (K1, K2) and negative inside."""
        p = diff_profile(5.0, 2.0)
        assert np.all(p.d[:p.K1 + 1] > 0)
        assert np.all(p.d[p.K1 + 1:p.K2] < 0)

    def test_weighted_difference_matches_G(self):
        """sum D(y) / (nu + y) equals G_lambda(nu)."""
        for lam, nu in ((1.0, 0.5), (5.0, 2.0), (10.0, 100.0)):
            profile = diff_profile(lam, nu)
            assert weighted_difference(profile) == pytest.approx(G_lambda(lam, nu), rel=1e-6, abs=1e-12)

    def test_grid_holds(self):
        """The structure holds from nu = 1e-2 up to 1e6."""
        for lam in (1.0, 3.0, 5.0, 10.0):
            for nu in np.geomspace(1e-2, 1e6, 12):
                profile = diff_profile(lam, float(nu))
                assert profile.K1 < profile.Kstar < profile.K2
                assert weighted_difference(profile) > 0

    def test_weighted_difference_at_large_nu(self):
        """At nu = 1e6 the weighted sum keeps the lambda^2 / (2 nu^3) scale of G_lambda."""
        nu = 1e6
        for lam in (1.0, 5.0):
            value = weighted_difference(diff_profile(lam, nu))
            assert value == pytest.approx(G_lambda(lam, nu, tol=1e-28), rel=1e-2)
            assert value == pytest.approx(lam ** 2 / (2 * nu ** 3), rel=1e-2)

    def test_parameter_domain(self):
        """lambda and nu must be positive."""
        with pytest.raises(ValueError):
            diff_profile(0.0, 1.0)

    def test_structural_error_index(self):
        """StructuralError carries the offending y."""
        err = StructuralError("D(y) never positive", 7)
        assert err.index == 7
        assert "y = 7" in str(err)


@pytest.mark.slow
class TestMonteCarloLimit:
    """The sample score converges to G_lambda."""

    def test_score_tracks_limit(self):
        """g on a Poisson(5) sample of 20000 lies within 3 sd / sqrt(n) of G_lambda."""
        sample = summarize(sample_pois(PoissonParams(lam=5.0), 20_000, child_rng(21)))
        ctx = ScoreContext(sample)
        y = np.asarray(sample.values, dtype=float)
        w = np.asarray(sample.counts, dtype=float) / sample.n
        for nu in (0.5, 3.0, 50.0):
            # per-observation influence of g, including the ln(1 + mean / nu) term
            u = digamma(nu + y) - digamma(nu) - (y - sample.mean) / (nu + sample.mean)
            sd = math.sqrt(float(np.sum(w * (u - np.sum(w * u)) ** 2)))
            band = 3.0 * sd / math.sqrt(sample.n)
            assert abs(ctx.score_g(nu) - G_lambda(5.0, nu)) <= band
