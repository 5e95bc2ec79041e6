"""Profile log-likelihood h(nu), score g(nu) and g'(nu) for NB(nu, p).

With p profiled out at p(nu) = nu / (nu + mean) the likelihood is a function
of nu alone and ``h'(nu) = n * g(nu)``. Two numerically different but
algebraically identical forms are kept:

* ``ScoreForm.FREQ`` works over the frequency table with exact rising sums
  1/nu + ... + 1/(nu + y - 1), cheap when few distinct values occur;
* ``ScoreForm.PSI`` works through digamma/trigamma/log-gamma differences,
  cheap when most values are distinct.

The form follows the distinct-value ratio against ``delta`` unless the caller
forces one.
"""

import logging
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from src.api.schemas.sample import CountSample
from src.services.special import digamma, log_gamma, trigamma

logger = logging.getLogger(__name__)


RISING_SUM_CUTOFF = 10_000
CHUNK_CELLS = 2_000_000


class ScoreForm(str, Enum):
    FREQ = "freq"
    PSI = "psi"


class ScoreDomainError(ValueError):
    """Score quantities requested outside their domain."""
    pass


def p_hat(nu: float, mean: float) -> float:
    """Conditional MLE of p given nu; 1 exactly when the mean is 0."""
    if not nu > 0:
        raise ScoreDomainError(f"nu must be positive, got {nu}")
    return nu / (nu + mean)


class ScoreContext:
    """Precomputed view of a sample for repeated h/g/g' evaluations."""

    def __init__(self, sample: CountSample, delta: float = 0.1, form: Optional[ScoreForm] = None):
        if sample.total == 0:
            raise ScoreDomainError("profile likelihood is undefined for an all-zero sample")
        self.sample = sample
        self.delta = delta
        if form is None:
            form = ScoreForm.FREQ if sample.distinct_ratio < delta else ScoreForm.PSI
        self.form = ScoreForm(form)

        self.n = sample.n
        self.mean = sample.mean
        self._y = sample.values.astype(float)
        self._f = sample.counts.astype(float)
        self._log_factorials = float(np.dot(self._f, log_gamma(self._y + 1.0)))

        small = sample.values <= RISING_SUM_CUTOFF
        self._small_y = sample.values[small]
        self._small_f = self._f[small]
        self._big_y = self._y[~small]
        self._big_f = self._f[~small]
        self._span = int(self._small_y.max()) if self._small_y.size else 0

    # evaluation plumbing

    def _evaluate(self, nu, kernel):
        arr = np.atleast_1d(np.asarray(nu, dtype=float))
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise ScoreDomainError("nu must be finite and positive")
        out = kernel(arr)
        if np.ndim(nu) == 0:
            return float(out[0])
        return out

    def _rising_sums(self, nu: np.ndarray, term) -> np.ndarray:
        """sum_y f_y * sum_{k<y} term(nu, k) over values up to the cutoff."""
        total = np.zeros(nu.size)
        if self._span == 0:
            return total
        k = np.arange(self._span, dtype=float)
        rows = max(1, CHUNK_CELLS // self._span)
        for start in range(0, nu.size, rows):
            block = nu[start:start + rows, None]
            cums = np.zeros((block.shape[0], self._span + 1))
            np.cumsum(term(block, k[None, :]), axis=1, out=cums[:, 1:])
            total[start:start + rows] = cums[:, self._small_y] @ self._small_f
        return total

    def _weighted(self, values: np.ndarray, weights: np.ndarray) -> np.ndarray:
        if values.size == 0:
            return 0.0
        return values @ weights

    # profile log-likelihood

    def _h_freq(self, nu: np.ndarray) -> np.ndarray:
        rising = self._rising_sums(nu, lambda v, k: np.log1p(k / v))
        if self._big_y.size:
            big = log_gamma(nu[:, None] + self._big_y) - log_gamma(nu)[:, None] - self._big_y * np.log(nu)[:, None]
            rising = rising + self._weighted(big, self._big_f)
        total = self.sample.total
        return (
            rising - self._log_factorials + total * np.log(self.mean)
            - (self.n * nu + total) * np.log1p(self.mean / nu)
        )

    def _h_psi(self, nu: np.ndarray) -> np.ndarray:
        p = nu / (nu + self.mean)
        y = self._y[None, :]
        v = nu[:, None]
        logpmf = (
            log_gamma(v + y) - log_gamma(v) - log_gamma(y + 1.0)
            + v * np.log(p)[:, None] + y * np.log1p(-p)[:, None]
        )
        return logpmf @ self._f

    def profile_loglik(self, nu):
        """h(nu) = l(nu, p(nu))."""
        kernel = self._h_freq if self.form == ScoreForm.FREQ else self._h_psi
        return self._evaluate(nu, kernel)

    # score

    def _g_freq(self, nu: np.ndarray) -> np.ndarray:
        harmonic = self._rising_sums(nu, lambda v, k: 1.0 / (v + k))
        if self._big_y.size:
            big = digamma(nu[:, None] + self._big_y) - digamma(nu)[:, None]
            harmonic = harmonic + self._weighted(big, self._big_f)
        return harmonic / self.n - np.log1p(self.mean / nu)

    def _g_psi(self, nu: np.ndarray) -> np.ndarray:
        diff = digamma(nu[:, None] + self._y[None, :]) - digamma(nu)[:, None]
        return (diff @ self._f) / self.n - np.log1p(self.mean / nu)

    def score_g(self, nu):
        """g(nu) = h'(nu) / n."""
        kernel = self._g_freq if self.form == ScoreForm.FREQ else self._g_psi
        return self._evaluate(nu, kernel)

    def _gp_freq(self, nu: np.ndarray) -> np.ndarray:
        squares = self._rising_sums(nu, lambda v, k: 1.0 / ((v + k) * (v + k)))
        if self._big_y.size:
            big = trigamma(nu)[:, None] - trigamma(nu[:, None] + self._big_y)
            squares = squares + self._weighted(big, self._big_f)
        return -squares / self.n + self.mean / (nu * (nu + self.mean))

    def _gp_psi(self, nu: np.ndarray) -> np.ndarray:
        diff = trigamma(nu[:, None] + self._y[None, :]) - trigamma(nu)[:, None]
        return (diff @ self._f) / self.n + self.mean / (nu * (nu + self.mean))

    def score_g_prime(self, nu):
        kernel = self._gp_freq if self.form == ScoreForm.FREQ else self._gp_psi
        return self._evaluate(nu, kernel)

    def value_and_grad(self, nu: float) -> Tuple[float, float]:
        """(h(nu), h'(nu)) for the optimizer."""
        return self.profile_loglik(nu), self.n * self.score_g(nu)

    def ext_nb_score(self, mu: float, p: float) -> Tuple[float, float]:
        """Partial derivatives of the extended-NB log-likelihood in (mu, p).

        Valid on the interior mu > 0, 0 < p < 1; both vanish at mu = mean,
        p = nu_hat / (nu_hat + mean) when nu_hat is an interior root of g.
        """
        if not (mu > 0 and 0 < p < 1):
            raise ScoreDomainError("extended-NB score needs mu > 0 and 0 < p < 1")
        q = 1.0 - p
        nu = mu * p / q
        bracket = self.score_g(nu) + np.log(p + self.mean * q / mu)
        d_mu = self.n * p / q * bracket
        d_p = self.n * mu / (q * q) * bracket + self.n * (mu - self.mean) / q
        return float(d_mu), float(d_p)
