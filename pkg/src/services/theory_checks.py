"""Numeric instances of the large-sample claims, one table row per instance.

Each check returns a DataFrame with a boolean ``passed`` column; the CLI
``verify`` command fails when any row is False.
"""

import logging
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from src.api.schemas.gof import GofConfig
from src.api.schemas.params import NBParams
from src.services.distributions import sample_nb
from src.services.gof import asymptotic_check, is_nonincreasing
from src.services.limits import StructuralError, G_lambda, G_of, diff_profile, nb_law, weighted_difference
from src.services.rng import child_rng
from src.services.score import ScoreContext, ScoreForm
from src.services.sufficient_stats import summarize

logger = logging.getLogger(__name__)


DEFAULT_LAMBDAS = (1.0, 3.0, 5.0, 10.0)
SMALL_NU = 1e-8
LARGE_NU = 1e6
POSITIVITY_TOL = 1e-25


def default_nu_grid(points: int = 40, lo: float = 1e-2, hi: float = 1e6) -> np.ndarray:
    return np.geomspace(lo, hi, points)


def check_g_limits(seed: int, samples: int = 50, members: int = 20) -> pd.DataFrame:
    """Small- and large-nu limits of g and g', plus G_NB(nu)(nu) = 0.

    Random NB samples give nu*g -> 1 - f0/n and nu^2*g' -> f0/n - 1 as
    nu -> 0, and nu^2*g -> (mean - S_n^2)/2 as nu -> infinity.
    """
    rows = []
    for i in range(samples):
        rng = child_rng(seed, 0, i)
        params = NBParams(nu=float(rng.uniform(0.5, 20.0)), p=float(rng.uniform(0.2, 0.8)))
        sample = summarize(sample_nb(params, int(rng.integers(20, 201)), rng))
        if sample.total == 0:
            continue
        ctx = ScoreContext(sample, form=ScoreForm.FREQ)
        zero_share = sample.zero_count / sample.n

        value = SMALL_NU * ctx.score_g(SMALL_NU)
        rows.append(_row("small-nu g", i, value, 1.0 - zero_share, abs(value - (1.0 - zero_share)) <= 1e-4))

        value = SMALL_NU ** 2 * ctx.score_g_prime(SMALL_NU)
        rows.append(_row("small-nu g'", i, value, zero_share - 1.0, abs(value - (zero_share - 1.0)) <= 1e-4))

        gap = sample.mean - sample.var_biased
        if abs(gap) > 0.1:
            value = LARGE_NU ** 2 * ctx.score_g(LARGE_NU)
            rows.append(_row("large-nu g", i, value, gap / 2.0, abs(value - gap / 2.0) <= 0.05 * abs(gap / 2.0)))

    for j in range(members):
        rng = child_rng(seed, 1, j)
        nu0 = float(10 ** rng.uniform(-1.0, 2.0))
        p = float(rng.uniform(0.05, 0.95))
        value = G_of(nb_law(nu0, p), nu0)
        rows.append(_row("G at matching NB", j, value, 0.0, abs(value) <= 1e-8))

    return pd.DataFrame(rows)


def check_G_positivity(
    lambdas: Sequence[float] = DEFAULT_LAMBDAS,
    nu_grid: Optional[Sequence[float]] = None,
) -> pd.DataFrame:
    """G_lambda(nu) > 0 across the grid."""
    nu_grid = default_nu_grid() if nu_grid is None else nu_grid
    rows = []
    for lam in lambdas:
        for nu in nu_grid:
            value = G_lambda(lam, float(nu), tol=POSITIVITY_TOL)
            rows.append({"check": "G_lambda > 0", "lambda": lam, "nu": float(nu), "value": value, "passed": value > 0})
    return pd.DataFrame(rows)


def check_diff_profile(
    lambdas: Sequence[float] = DEFAULT_LAMBDAS,
    nu_grid: Optional[Sequence[float]] = None,
    tol: float = 1e-10,
) -> pd.DataFrame:
    """Sign structure of D(y) and positivity of sum_y D(y) / (nu + y)."""
    nu_grid = default_nu_grid() if nu_grid is None else nu_grid
    rows = []
    for lam in lambdas:
        for nu in nu_grid:
            nu = float(nu)
            try:
                profile = diff_profile(lam, nu, tol)
            except StructuralError as e:
                logger.error(f"D profile lambda={lam:g} nu={nu:g}: {e}")
                rows.append({"lambda": lam, "nu": nu, "K1": None, "Kstar": None, "K2": None,
                             "sum_D": None, "weighted": None, "passed": False})
                continue
            weighted = weighted_difference(profile)
            rows.append({
                "lambda": lam,
                "nu": nu,
                "K1": profile.K1,
                "Kstar": profile.Kstar,
                "K2": profile.K2,
                "sum_D": float(np.sum(profile.D)),
                "weighted": weighted,
                "passed": weighted > 0,
            })
    return pd.DataFrame(rows)


def check_ks_collapse(
    lam: float,
    n_grid: Sequence[int],
    reps: int,
    cfg: GofConfig,
    slack: float = 0.05,
) -> pd.DataFrame:
    """Median D_n and median fitted-vs-true CDF distance shrink along n_grid."""
    frame = asymptotic_check(lam, n_grid, reps, cfg)
    trend = is_nonincreasing(frame["median_D_n"], slack) and is_nonincreasing(frame["median_fit_error"], slack)
    frame["passed"] = trend
    return frame


def _row(check: str, case: int, value: float, expected: float, passed: bool) -> dict:
    return {"check": check, "case": case, "value": float(value), "expected": float(expected), "passed": bool(passed)}
