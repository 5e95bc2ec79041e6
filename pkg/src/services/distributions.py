"""PMFs, CDFs, moments and samplers for the count families.

Covers Poisson, NB(nu, p) with its alternative parameterizations, the
continuous-argument PMF extensions used by the limit theory, and the extended
NB(mu, p) family with its Poisson and point-mass members. Evaluation functions
take a scalar or an integer array for ``y`` and answer in kind.
"""

import logging
from typing import Tuple, Union

import numpy as np
from scipy import stats
from scipy.optimize import brentq

from src.api.schemas.params import (
    AltNBKind,
    AltNBParams,
    CountLaw,
    ExtNBParams,
    NBParams,
    ParamKind,
    PoissonParams,
)
from src.services.special import digamma, log_gamma

logger = logging.getLogger(__name__)


class ConversionError(ValueError):
    """Requested parameterization cannot represent the source law."""
    pass


def _support(y) -> np.ndarray:
    arr = np.asarray(y)
    if not np.issubdtype(arr.dtype, np.integer):
        arr = np.asarray(arr, dtype=float)
        if not np.all(np.isfinite(arr)) or not np.all(arr == np.floor(arr)):
            raise ValueError("support points must be integers")
    if np.any(arr < 0):
        raise ValueError("support points must be nonnegative")
    return arr.astype(float)


def _out(result, y):
    if np.ndim(y) == 0:
        return float(result)
    return np.asarray(result, dtype=float)


# Log-PMFs

def pois_log_pmf(params: PoissonParams, y):
    """y ln(lambda) - lambda - ln Gamma(y + 1)."""
    yy = _support(y)
    return _out(yy * np.log(params.lam) - params.lam - log_gamma(yy + 1.0), y)


def _nb_log_pmf_real(nu: float, p: float, x: np.ndarray) -> np.ndarray:
    return (
        log_gamma(nu + x) - log_gamma(nu) - log_gamma(x + 1.0)
        + nu * np.log(p) + x * np.log1p(-p)
    )


def nb_log_pmf(params: NBParams, y):
    """NB log-PMF; the p = 1 member gives 0 at y = 0 and -inf elsewhere."""
    yy = _support(y)
    if params.p == 1.0:
        return _out(np.where(yy == 0, 0.0, -np.inf), y)
    return _out(_nb_log_pmf_real(params.nu, params.p, yy), y)


def ext_nb_log_pmf(params: ExtNBParams, y):
    yy = _support(y)
    if params.mu == 0.0:
        return _out(np.where(yy == 0, 0.0, -np.inf), y)
    if params.p == 1.0:
        return pois_log_pmf(PoissonParams(lam=params.mu), y)
    nu = params.mu * params.p / (1.0 - params.p)
    return _out(_nb_log_pmf_real(nu, params.p, yy), y)


def law_log_pmf(params: CountLaw, y):
    if isinstance(params, PoissonParams):
        return pois_log_pmf(params, y)
    if isinstance(params, NBParams):
        return nb_log_pmf(params, y)
    return ext_nb_log_pmf(params, y)


# CDFs and survival functions

def nb_cdf(params: NBParams, y):
    yy = _support(y)
    if params.p == 1.0:
        return _out(np.ones_like(yy), y)
    return _out(stats.nbinom.cdf(yy, params.nu, params.p), y)


def nb_sf(params: NBParams, y):
    yy = _support(y)
    if params.p == 1.0:
        return _out(np.zeros_like(yy), y)
    return _out(stats.nbinom.sf(yy, params.nu, params.p), y)


def pois_cdf(params: PoissonParams, y):
    yy = _support(y)
    return _out(stats.poisson.cdf(yy, params.lam), y)


def pois_sf(params: PoissonParams, y):
    yy = _support(y)
    return _out(stats.poisson.sf(yy, params.lam), y)


def _as_basic(params: CountLaw) -> Union[PoissonParams, NBParams]:
    if isinstance(params, ExtNBParams):
        if params.mu == 0.0:
            return NBParams(nu=1.0, p=1.0)
        if params.p == 1.0:
            return PoissonParams(lam=params.mu)
        return NBParams(nu=params.mu * params.p / (1.0 - params.p), p=params.p)
    return params


def law_cdf(params: CountLaw, y):
    basic = _as_basic(params)
    if isinstance(basic, PoissonParams):
        return pois_cdf(basic, y)
    return nb_cdf(basic, y)


def law_sf(params: CountLaw, y):
    basic = _as_basic(params)
    if isinstance(basic, PoissonParams):
        return pois_sf(basic, y)
    return nb_sf(basic, y)


def law_moments(params: CountLaw) -> Tuple[float, float]:
    """(mean, variance)."""
    if isinstance(params, PoissonParams):
        return params.lam, params.lam
    if isinstance(params, ExtNBParams):
        return params.mu, params.mu / params.p
    q = 1.0 - params.p
    return params.nu * q / params.p, params.nu * q / (params.p * params.p)


def upper_quantile(params: CountLaw, tail: float = 1e-9) -> int:
    """Smallest y with P(Y > y) <= tail."""
    basic = _as_basic(params)
    if isinstance(basic, NBParams) and basic.p == 1.0:
        return 0
    if isinstance(basic, PoissonParams):
        y = int(stats.poisson.isf(tail, basic.lam))
    else:
        y = int(stats.nbinom.isf(tail, basic.nu, basic.p))
    y = max(y, 0)
    while law_sf(basic, y) > tail:
        y = max(2 * y, y + 1)
    return y


# Continuous-argument extensions

def continuous_log_pmfs(lam: float, nu: float, x) -> Tuple[float, float]:
    """(ln f_lambda(x), ln f_NB(nu, p)(x)) with p = nu / (nu + lambda), x real >= 0."""
    if lam <= 0 or nu <= 0:
        raise ValueError("lambda and nu must be positive")
    xx = np.asarray(x, dtype=float)
    if np.any(xx < 0) or not np.all(np.isfinite(xx)):
        raise ValueError("x must be finite and nonnegative")
    p = nu / (nu + lam)
    ln_pois = xx * np.log(lam) - lam - log_gamma(xx + 1.0)
    ln_nb = _nb_log_pmf_real(nu, p, xx)
    return _out(ln_pois, x), _out(ln_nb, x)


def log_ratio(lam: float, nu: float, x):
    """r(x) = ln f_NB(x) - ln f_lambda(x) at matched mean lambda."""
    xx = np.asarray(x, dtype=float)
    rising = log_gamma(nu + xx) - log_gamma(nu) - xx * np.log(nu)
    return _out(rising - (nu + xx) * np.log1p(lam / nu) + lam, x)


def stationary_point(lam: float, nu: float) -> float:
    """x* solving digamma(nu + x) = ln(nu + lambda); lies in (lambda, lambda + 1)."""
    target = np.log(nu + lam)
    lo = nu + lam
    z = brentq(lambda t: digamma(t) - target, lo, lo + 1.0, xtol=1e-13, rtol=8.9e-16)
    return z - nu


# Parameter conversions

def _to_nb(source) -> NBParams:
    if isinstance(source, NBParams):
        return source
    if isinstance(source, AltNBParams):
        if source.kind == AltNBKind.NU_MU:
            return NBParams(nu=source.nu, p=source.nu / (source.nu + source.second))
        if source.kind == AltNBKind.NU_BIG_P:
            return NBParams(nu=source.nu, p=1.0 / (1.0 + source.second))
        return NBParams(nu=source.nu, p=1.0 - source.second)
    if isinstance(source, ExtNBParams):
        if source.mu == 0.0:
            return NBParams(nu=1.0, p=1.0)
        if source.p == 1.0:
            raise ConversionError(f"ExtNB(mu={source.mu}, p=1) is Poisson and has no finite-nu NB form")
        return NBParams(nu=source.mu * source.p / (1.0 - source.p), p=source.p)
    raise ConversionError(f"cannot convert {type(source).__name__} to an NB parameterization")


def convert_params(source: Union[NBParams, AltNBParams, ExtNBParams], to_kind: ParamKind):
    to_kind = ParamKind(to_kind)
    if to_kind == ParamKind.EXT_NB and isinstance(source, ExtNBParams):
        return source

    nb = _to_nb(source)
    q = 1.0 - nb.p

    if to_kind == ParamKind.NB:
        return nb
    if to_kind == ParamKind.EXT_NB:
        if nb.p == 1.0:
            return ExtNBParams(mu=0.0, p=1.0)
        return ExtNBParams(mu=nb.nu * q / nb.p, p=nb.p)
    if to_kind == ParamKind.NU_MU:
        if isinstance(source, ExtNBParams):
            return AltNBParams(kind=AltNBKind.NU_MU, nu=nb.nu, second=source.mu)
        return AltNBParams(kind=AltNBKind.NU_MU, nu=nb.nu, second=nb.nu * q / nb.p)
    if to_kind == ParamKind.NU_BIG_P:
        return AltNBParams(kind=AltNBKind.NU_BIG_P, nu=nb.nu, second=q / nb.p)
    return AltNBParams(kind=AltNBKind.NU_ONE_MINUS_P, nu=nb.nu, second=q)


# Samplers

def sample_pois(params: PoissonParams, n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.poisson(params.lam, size=n).astype(np.int64)


def sample_nb(params: NBParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """Gamma(nu, (1-p)/p) mixed Poisson draws."""
    if params.p == 1.0:
        return np.zeros(n, dtype=np.int64)
    rates = rng.gamma(shape=params.nu, scale=(1.0 - params.p) / params.p, size=n)
    return rng.poisson(rates).astype(np.int64)


def sample_ext_nb(params: ExtNBParams, n: int, rng: np.random.Generator) -> np.ndarray:
    basic = _as_basic(params)
    if isinstance(basic, PoissonParams):
        return sample_pois(basic, n, rng)
    return sample_nb(basic, n, rng)


def law_sample(params: CountLaw, n: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(params, PoissonParams):
        return sample_pois(params, n, rng)
    if isinstance(params, NBParams):
        return sample_nb(params, n, rng)
    return sample_ext_nb(params, n, rng)
