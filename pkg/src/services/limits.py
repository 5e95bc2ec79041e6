"""Numeric oracles for the large-sample behaviour of the NB score.

``G_of`` evaluates the almost-sure limit of g(nu) under a sampling law F,

    G_F(nu) = sum_y (1 - F(y)) / (nu + y) - ln(1 + mu / nu),

``G_lambda`` specializes it to Poisson(lambda), and ``diff_profile`` builds
the CDF difference D(y) = F_NB - F_Poisson at matched means together with its
sign-change indices K1 < K* < K2.

Truncation points come from geometric tail bounds: once the PMF ratio
pmf(k + 1) / pmf(k) is below q < 1 for every k past y, the remaining tail mass
sum_{k > y} (1 - F(k)) is at most sf(y) * q / (1 - q).
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from src.api.schemas.params import NBParams, PoissonParams
from src.services.distributions import nb_log_pmf, nb_sf, pois_log_pmf, pois_sf

logger = logging.getLogger(__name__)


MAX_TERMS = 10_000_000
FIRST_CHUNK = 4096
SIGN_DEADBAND = 1e-12


class PrecisionError(RuntimeError):
    """A series could not be truncated within the requested tolerance."""
    pass


class StructuralError(RuntimeError):
    """A computed D(y) profile violates its expected sign structure."""

    def __init__(self, message: str, index: int):
        super().__init__(f"{message} (at y = {index})")
        self.index = index


@dataclass(frozen=True)
class DiscreteLaw:
    """A law on {0, 1, 2, ...} as the oracles need it.

    ``ratio_bound(y)`` must return q with pmf(k + 1) <= q * pmf(k) for all
    k > y (any value >= 1 means "no bound yet").
    """

    name: str
    mean: float
    pmf: Callable[[np.ndarray], np.ndarray]
    sf: Callable[[np.ndarray], np.ndarray]
    ratio_bound: Callable[[int], float]

    def tail_mass_bound(self, y: int) -> float:
        """Upper bound on sum_{k > y} (1 - F(k))."""
        tail = float(self.sf(np.array([y]))[0])
        if tail == 0.0:
            return 0.0
        q = self.ratio_bound(y)
        if q >= 1.0:
            return math.inf
        return tail * q / (1.0 - q)


def poisson_law(lam: float) -> DiscreteLaw:
    params = PoissonParams(lam=lam)
    return DiscreteLaw(
        name=f"Poisson({lam:g})",
        mean=lam,
        pmf=lambda y: np.exp(pois_log_pmf(params, y)),
        sf=lambda y: pois_sf(params, y),
        ratio_bound=lambda y: lam / (y + 2.0),
    )


def nb_law(nu: float, p: float) -> DiscreteLaw:
    params = NBParams(nu=nu, p=p)
    return DiscreteLaw(
        name=f"NB({nu:g}, {p:g})",
        mean=nu * (1.0 - p) / p,
        pmf=lambda y: np.exp(nb_log_pmf(params, y)),
        sf=lambda y: nb_sf(params, y),
        ratio_bound=lambda y: (1.0 - p) * max(1.0, (nu + y + 1.0) / (y + 2.0)),
    )


def point_mass_law() -> DiscreteLaw:
    return DiscreteLaw(
        name="PointMass(0)",
        mean=0.0,
        pmf=lambda y: np.where(np.asarray(y) == 0, 1.0, 0.0),
        sf=lambda y: np.zeros(np.shape(y)),
        ratio_bound=lambda y: 0.0,
    )


def _x_minus_log1p(x: float) -> float:
    """x - ln(1 + x) without cancellation for small x."""
    if x > 1e-2:
        return x - math.log1p(x)
    term, total, k = -x, 0.0, 2
    while True:
        term = -term * x
        add = term / k
        total += add
        if abs(add) <= 1e-18 * abs(total):
            return total
        k += 1


def G_of(law: DiscreteLaw, nu: float, tol: float = 1e-10) -> float:
    """Limit of the score under ``law``, truncated with error at most ``tol``.

    Uses the rearrangement
    G = [mu/nu - ln(1 + mu/nu)] - sum_y y (1 - F(y)) / (nu (nu + y)),
    which keeps its accuracy when G is many orders below mu/nu.
    """
    if not nu > 0:
        raise ValueError(f"nu must be positive, got {nu}")
    if law.mean == 0.0:
        return 0.0

    partials = []
    start, chunk = 0, FIRST_CHUNK
    while True:
        y = np.arange(start, start + chunk, dtype=float)
        tail = law.sf(y)
        partials.append(math.fsum(y * tail / (nu * (nu + y))))
        last = start + chunk - 1
        if law.tail_mass_bound(last) / nu <= tol:
            break
        start += chunk
        chunk *= 2
        if start >= MAX_TERMS:
            raise PrecisionError(f"{law.name}: tail of G at nu={nu:g} not below {tol:g} within {MAX_TERMS} terms")

    return _x_minus_log1p(law.mean / nu) - math.fsum(partials)


def G_lambda(lam: float, nu: float, tol: float = 1e-10) -> float:
    return G_of(poisson_law(lam), nu, tol)


@dataclass(frozen=True)
class DiffProfile:
    """d(y) = f_NB(y) - f_lambda(y) and D(y) = F_NB(y) - F_lambda(y) on 0..y_cut."""

    lam: float
    nu: float
    d: np.ndarray
    D: np.ndarray
    r: np.ndarray
    K1: int
    Kstar: int
    K2: int
    y_cut: int


def _profile_cut(lam: float, nu: float, tol: float) -> int:
    pois, nb = poisson_law(lam), nb_law(nu, nu / (nu + lam))
    y = max(16, 2 * int(math.ceil(lam)) + 2)
    while pois.tail_mass_bound(y) > tol or nb.tail_mass_bound(y) > tol:
        y *= 2
        if y > MAX_TERMS:
            raise PrecisionError(f"D profile for lambda={lam:g}, nu={nu:g} needs more than {MAX_TERMS} terms")
    return y


def _integer_log_ratio(lam: float, nu: float, y_cut: int) -> np.ndarray:
    """r(y) on 0..y_cut as sum_{k<y} ln(1 + k/nu) - y ln(1 + x) + nu (x - ln(1 + x)), x = lambda/nu."""
    x = lam / nu
    k = np.arange(y_cut, dtype=float)
    rising = np.concatenate(([0.0], np.cumsum(np.log1p(k / nu))))
    y = np.arange(y_cut + 1, dtype=float)
    return rising - y * math.log1p(x) + nu * _x_minus_log1p(x)


def _pmf_difference(nb: NBParams, pois: PoissonParams, y: np.ndarray, r: np.ndarray) -> np.ndarray:
    """f_NB - f_lambda; expm1 form while r is small, plain difference once the NB tail dominates."""
    log_pois = pois_log_pmf(pois, y)
    near = np.exp(log_pois) * np.expm1(np.minimum(r, 1.0))
    far = np.exp(nb_log_pmf(nb, y)) - np.exp(log_pois)
    return np.where(r <= 1.0, near, far)


def _cumulative_difference(d: np.ndarray, lam: float) -> np.ndarray:
    """D(y) from the left below lambda and as -sum_{k>y} d(k) from the right above it."""
    left = np.cumsum(d)
    right = -np.concatenate((np.cumsum(d[::-1])[::-1][1:], [0.0]))
    return np.where(np.arange(d.size) < lam, left, right)


def diff_profile(lam: float, nu: float, tol: float = 1e-10) -> DiffProfile:
    """Build and check the D(y) profile of NB(nu, nu/(nu+lambda)) against Poisson(lambda).

    K1 is the last y of the leading run with d >= 0 and K2 the first y of the
    trailing one, so D peaks at K1 and bottoms out at K2 - 1.

    Raises StructuralError if any sign-structure property fails.
    """
    if not (lam > 0 and nu > 0):
        raise ValueError("lambda and nu must be positive")

    y_cut = _profile_cut(lam, nu, tol)
    y = np.arange(y_cut + 1)
    nb = NBParams(nu=nu, p=nu / (nu + lam))
    pois = PoissonParams(lam=lam)

    r = _integer_log_ratio(lam, nu, y_cut)
    d = _pmf_difference(nb, pois, y, r)
    D = _cumulative_difference(d, lam)

    sign_d = np.where(r > SIGN_DEADBAND, 1, np.where(r < -SIGN_DEADBAND, -1, 0))
    negative = np.flatnonzero(sign_d < 0)
    if negative.size == 0:
        raise StructuralError("d(y) never turns negative", 0)
    K1 = int(negative[0]) - 1
    K2 = int(negative[-1]) + 1
    if K1 < 0:
        raise StructuralError("d(0) is not positive", 0)
    if K2 > y_cut:
        raise StructuralError("d(y) still negative at the truncation point", y_cut)

    inner = sign_d[K1 + 1:K2]
    if np.any(inner >= 0):
        raise StructuralError("d(y) not strictly negative between K1 and K2", K1 + 1 + int(np.flatnonzero(inner >= 0)[0]))
    if np.any(sign_d[:K1] <= 0):
        raise StructuralError("d(y) not positive before K1", int(np.flatnonzero(sign_d[:K1] <= 0)[0]))
    if np.any(sign_d[K2 + 1:] <= 0):
        raise StructuralError("d(y) not positive after K2", K2 + 1 + int(np.flatnonzero(sign_d[K2 + 1:] <= 0)[0]))

    band = SIGN_DEADBAND * float(np.max(np.abs(D)))
    positive = np.flatnonzero(D > band)
    if positive.size == 0:
        raise StructuralError("D(y) never positive", 0)
    Kstar = int(positive[-1])
    if np.any(D[:Kstar + 1] <= 0):
        raise StructuralError("D(y) not positive up to K*", int(np.flatnonzero(D[:Kstar + 1] <= 0)[0]))
    if Kstar <= K1 or Kstar >= K2:
        raise StructuralError(f"K* = {Kstar} outside (K1, K2) = ({K1}, {K2})", Kstar)
    if D[K1] < D.max() - band:
        raise StructuralError("D(y) maximum not attained at K1", int(np.argmax(D)))
    if D[K2 - 1] > D.min() + band:
        raise StructuralError("D(y) minimum not attained at K2 - 1", int(np.argmin(D)))

    total = math.fsum(D)
    limit = 4.0 * tol + 64.0 * np.finfo(float).eps * float(np.sum(np.abs(D)))
    if abs(total) > limit:
        raise StructuralError(f"sum of D(y) is {total:.3g}, expected 0 within {limit:.3g}", y_cut)

    logger.debug(f"D profile lambda={lam:g} nu={nu:g}: K1={K1} K*={Kstar} K2={K2} y_cut={y_cut}")
    return DiffProfile(lam=lam, nu=nu, d=d, D=D, r=r, K1=K1, Kstar=Kstar, K2=K2, y_cut=y_cut)


def weighted_difference(profile: DiffProfile) -> float:
    """sum_y D(y) / (nu + y); equals G_lambda(nu) up to truncation."""
    y = np.arange(profile.y_cut + 1, dtype=float)
    return math.fsum(profile.D / (profile.nu + y))
