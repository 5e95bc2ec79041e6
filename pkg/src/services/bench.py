import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, field_validator

from src.api.schemas.fit import FitConfig
from src.api.schemas.params import NBParams, PoissonParams
from src.services.apma import fit_ext_nb, fit_nb, grid_oracle
from src.services.distributions import law_moments, sample_nb, sample_pois
from src.services.rng import child_rng
from src.services.sufficient_stats import summarize

logger = logging.getLogger(__name__)


DEFAULT_NU = (0.01, 0.1, 1.0, 10.0, 100.0)
DEFAULT_P = (0.99, 0.9, 0.5, 0.1, 0.01)
CSV_FLOAT_FORMAT = "%.6g"


class GridSpec(BaseModel):
    """Simulation grid over (nu, p, n)."""

    nu_values: List[float] = Field(default_factory=lambda: list(DEFAULT_NU))
    p_values: List[float] = Field(default_factory=lambda: list(DEFAULT_P))
    n_values: List[int] = Field(default_factory=lambda: [100])
    reps: int = Field(20, ge=10)
    seed: int = 2024

    @field_validator("nu_values", "n_values")
    @classmethod
    def check_positive(cls, values):
        if not values or any(v <= 0 for v in values):
            raise ValueError("grid values must be positive")
        return values

    @field_validator("p_values")
    @classmethod
    def check_probabilities(cls, values):
        if not values or any(not 0 < v < 1 for v in values):
            raise ValueError("p values must lie in (0, 1)")
        return values


def _run_cell(job: Tuple) -> dict:
    (i, nu, j, p, k, n), spec, cfg, oracle_points = job
    params = NBParams(nu=nu, p=p)
    ratios, times, means = [], [], []
    failures = ext_failures = boundary = 0

    for rep in range(spec.reps):
        sample = summarize(sample_nb(params, n, child_rng(spec.seed, i, j, k, rep)))
        means.append(sample.mean)

        start = time.perf_counter()
        try:
            fit = fit_nb(sample, cfg)
            ok = math.isfinite(fit.loglik)
        except Exception as e:
            logger.error(f"fit_nb failed on NB({nu:g}, {p:g}) n={n} rep={rep}: {e}")
            fit, ok = None, False
        times.append(time.perf_counter() - start)

        try:
            ext_ok = math.isfinite(fit_ext_nb(sample, cfg).loglik)
        except Exception as e:
            logger.error(f"fit_ext_nb failed on NB({nu:g}, {p:g}) n={n} rep={rep}: {e}")
            ext_ok = False
        ext_failures += not ext_ok

        if not ok:
            failures += 1
            continue
        boundary += fit.at_boundary
        _, h_oracle = grid_oracle(sample, cfg, grid_points=oracle_points)
        ratios.append(math.exp(min(h_oracle - fit.loglik, 700.0)))

    mean, variance = law_moments(params)
    return {
        "nu": nu,
        "p": p,
        "n": n,
        "true_mean": mean,
        "true_variance": variance,
        "sample_mean": float(np.mean(means)),
        "failure_rate": failures / spec.reps,
        "ext_failure_rate": ext_failures / spec.reps,
        "mean_likelihood_ratio": float(np.mean(ratios)) if ratios else float("nan"),
        "max_likelihood_ratio": float(np.max(ratios)) if ratios else float("nan"),
        "mean_time_sec": float(np.mean(times)),
        "boundary_rate": boundary / spec.reps,
    }


def run_grid(
    spec: GridSpec,
    cfg: Optional[FitConfig] = None,
    oracle_points: int = 1000,
    workers: int = 1,
) -> pd.DataFrame:
    """Failure rates, oracle likelihood ratios exp(h_oracle - h_fit) and timings per cell."""
    cfg = cfg or FitConfig()
    cells = itertools.product(enumerate(spec.nu_values), enumerate(spec.p_values), enumerate(spec.n_values))
    jobs = [((i, nu, j, p, k, n), spec, cfg, oracle_points) for (i, nu), (j, p), (k, n) in cells]

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell, jobs))
    else:
        rows = [_run_cell(job) for job in jobs]

    frame = pd.DataFrame(rows)
    logger.info(
        f"grid of {len(rows)} cells x {spec.reps} reps: "
        f"max failure rate {frame['failure_rate'].max():.3f}, "
        f"max likelihood ratio {frame['max_likelihood_ratio'].max():.9g}"
    )
    return frame


def write_table_csv(frame: pd.DataFrame, path: Optional[str] = None) -> str:
    """CSV with a header row and 6 significant digits."""
    text = frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def dispersion_probability(
    lambda_values: Sequence[float],
    n_values: Sequence[int],
    reps: int,
    seed: int = 2024,
) -> pd.DataFrame:
    """Fraction of Poisson(lambda) samples of size n with S_n^2 > mean."""
    if reps < 100:
        raise ValueError("reps must be at least 100")

    rows = []
    for i, lam in enumerate(lambda_values):
        params = PoissonParams(lam=lam)
        for j, n in enumerate(n_values):
            hits = sum(
                summarize(sample_pois(params, n, child_rng(seed, i, j, r))).overdispersed
                for r in range(reps)
            )
            rows.append({"lambda": lam, "n": n, "reps": reps, "probability": hits / reps})
    return pd.DataFrame(rows)


def moment_table(
    nu_values: Sequence[float] = DEFAULT_NU,
    p_values: Sequence[float] = DEFAULT_P,
) -> pd.DataFrame:
    """Mean and variance of NB(nu, p) over a grid."""
    rows = []
    for nu, p in itertools.product(nu_values, p_values):
        mean, variance = law_moments(NBParams(nu=nu, p=p))
        rows.append({"nu": nu, "p": p, "mean": mean, "variance": variance})
    return pd.DataFrame(rows)
