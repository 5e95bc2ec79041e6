import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.api.schemas.fit import FitConfig, FitResult
from src.api.schemas.gof import GofConfig, GofResult, PowerReplicate, PowerSummary
from src.api.schemas.params import CountLaw, PoissonParams
from src.api.schemas.sample import CountSample
from src.services.apma import fit_ext_nb, fit_nb
from src.services.distributions import law_cdf, law_moments, law_sample, upper_quantile
from src.services.rng import child_rng
from src.services.sufficient_stats import summarize

logger = logging.getLogger(__name__)


CDF_TAIL = 1e-9
SUMMARY_FIELDS = ("nu_hat", "p_hat", "D_n", "d_n", "p_value", "fit_error")


def fitted_cdf(params: CountLaw, sample: CountSample, tail: float = CDF_TAIL) -> np.ndarray:
    """Fitted CDF on 0..y_cut with y_cut = max(sample max, upper 1 - tail quantile)."""
    y_cut = max(sample.max, upper_quantile(params, tail))
    return np.asarray(law_cdf(params, np.arange(y_cut + 1)), dtype=float)


def ks_statistic(sample: CountSample, cdf: Sequence[float]) -> float:
    """max_y |F_n(y) - F(y)| over y = 0..len(cdf)-1."""
    cdf = np.asarray(cdf, dtype=float)
    if cdf.size <= sample.max:
        raise ValueError(f"CDF covers 0..{cdf.size - 1} but the sample reaches {sample.max}")
    hist = np.zeros(cdf.size)
    hist[sample.values] = sample.counts
    empirical = np.cumsum(hist) / sample.n
    return float(np.max(np.abs(empirical - cdf)))


def _fit(sample: CountSample, fit_cfg: FitConfig, model: str) -> FitResult:
    if model == "enb":
        return fit_ext_nb(sample, fit_cfg)
    return fit_nb(sample, fit_cfg)


def _replicate_statistic(job: Tuple) -> float:
    params, n, seed, key, fit_cfg, model = job
    draw = law_sample(params, n, child_rng(seed, *key))
    sample = summarize(draw)
    fit = _fit(sample, fit_cfg, model)
    return ks_statistic(sample, fitted_cdf(fit.params, sample))


def _ordered_map(func: Callable, jobs: List, workers: int) -> List:
    """Map preserving job order; serial when one worker is requested."""
    if workers <= 1 or len(jobs) <= 1:
        return [func(job) for job in jobs]
    chunksize = max(1, len(jobs) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, jobs, chunksize=chunksize))


def bootstrap_test(
    data: Union[CountSample, Iterable[int]],
    cfg: GofConfig,
    stream: Tuple[int, ...] = (),
) -> GofResult:
    """Parametric-bootstrap KS test of the fitted NB (or extended NB) law.

    Replicate b draws from the stream keyed (seed, *stream, b), so the result
    is the same for any worker count.
    """
    sample = data if isinstance(data, CountSample) else summarize(data)
    fitted = _fit(sample, cfg.fit_cfg, cfg.model)
    D_n = ks_statistic(sample, fitted_cdf(fitted.params, sample))

    jobs = [
        (fitted.params, sample.n, cfg.seed, (*stream, b), cfg.fit_cfg, cfg.model)
        for b in range(cfg.boot_reps)
    ]
    stats = np.asarray(_ordered_map(_replicate_statistic, jobs, cfg.workers), dtype=float)

    d_n = float(np.quantile(stats, 1.0 - cfg.level))
    exceed = int(np.count_nonzero(stats >= D_n))
    p_value = (1 + exceed) / (cfg.boot_reps + 1)
    reject = D_n >= d_n and D_n > 0

    logger.debug(f"bootstrap n={sample.n} B={cfg.boot_reps}: D_n={D_n:.6g} d_n={d_n:.6g} p={p_value:.4g}")
    return GofResult(
        D_n=D_n,
        d_n=d_n,
        p_value=p_value,
        reject=reject,
        fitted=fitted,
        boot_stats=stats.tolist(),
        boot_reps=cfg.boot_reps,
        level=cfg.level,
        seed=cfg.seed,
    )


def sup_cdf_distance(fitted: CountLaw, truth: CountLaw, tail: float = CDF_TAIL) -> float:
    """sup_y |F_fitted(y) - F_truth(y)|."""
    y_cut = max(upper_quantile(fitted, tail), upper_quantile(truth, tail))
    y = np.arange(y_cut + 1)
    return float(np.max(np.abs(np.asarray(law_cdf(fitted, y)) - np.asarray(law_cdf(truth, y)))))


def _power_replicate(job: Tuple) -> PowerReplicate:
    truth, n, r, cfg, stream = job
    sample = summarize(law_sample(truth, n, child_rng(cfg.seed, *stream, r)))
    result = bootstrap_test(sample, cfg, stream=(*stream, r))
    fit = result.fitted
    return PowerReplicate(
        replicate=r,
        nu_hat=fit.nu_hat,
        p_hat=fit.params.p,
        D_n=result.D_n,
        d_n=result.d_n,
        p_value=result.p_value,
        reject=result.reject,
        at_boundary=fit.at_boundary,
        branch=fit.branch.value,
        fit_error=sup_cdf_distance(fit.params, truth),
    )


def _aggregate(records: List[PowerReplicate], reducer: Callable) -> dict:
    out = {}
    for field in SUMMARY_FIELDS:
        values = [getattr(rec, field) for rec in records if getattr(rec, field) is not None]
        out[field] = float(reducer(values)) if values else None
    return out


def power_experiment(
    lam: float,
    n: int,
    reps: int,
    cfg: GofConfig,
    stream: Tuple[int, ...] = (),
) -> PowerSummary:
    """Repeat the bootstrap KS test on Poisson(lambda) samples of size n.

    Replicate r draws its data from the stream keyed (seed, *stream, r) and
    bootstraps under (seed, *stream, r, b).
    """
    return rejection_study(PoissonParams(lam=lam), n, reps, cfg, stream)


def rejection_study(
    truth: CountLaw,
    n: int,
    reps: int,
    cfg: GofConfig,
    stream: Tuple[int, ...] = (),
) -> PowerSummary:
    """Rejection rate of the bootstrap KS test on samples drawn from ``truth``.

    With an NB truth this is the size of the test; with Poisson it is the power.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    inner = cfg.model_copy(update={"workers": 1})
    jobs = [(truth, n, r, inner, stream) for r in range(reps)]
    records = _ordered_map(_power_replicate, jobs, cfg.workers)

    mean, _ = law_moments(truth)
    power = sum(rec.reject for rec in records) / reps
    boundary = sum(rec.at_boundary for rec in records) / reps
    logger.info(f"rejection study {truth!r} n={n} reps={reps}: rate={power:.3f} boundary={boundary:.3f}")
    return PowerSummary(
        lam=mean,
        n=n,
        reps=reps,
        boot_reps=cfg.boot_reps,
        seed=cfg.seed,
        model=cfg.model,
        power=power,
        boundary_rate=boundary,
        medians=_aggregate(records, np.median),
        means=_aggregate(records, np.mean),
        replicates=records,
    )


def asymptotic_check(lam: float, n_grid: Sequence[int], reps: int, cfg: GofConfig) -> pd.DataFrame:
    """Median D_n, d_n and fitted-vs-true CDF distance along an increasing n grid."""
    n_grid = [int(n) for n in n_grid]
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("n_grid must be strictly increasing")

    rows = []
    for i, n in enumerate(n_grid):
        summary = power_experiment(lam, n, reps, cfg, stream=(i,))
        rows.append({
            "n": n,
            "median_D_n": summary.medians["D_n"],
            "median_d_n": summary.medians["d_n"],
            "median_fit_error": summary.medians["fit_error"],
            "median_nu_hat": summary.medians["nu_hat"],
            "power": summary.power,
            "boundary_rate": summary.boundary_rate,
        })
    return pd.DataFrame(rows)


def is_nonincreasing(values: Sequence[float], slack: float = 0.05) -> bool:
    """Each step may rise by at most ``slack`` relative to the previous value."""
    values = list(values)
    return all(b <= a * (1.0 + slack) for a, b in zip(values, values[1:]))


def replicate_frame(summary: PowerSummary) -> pd.DataFrame:
    """One row per replicate; the raw data behind D_n / d_n / nu_hat histograms."""
    frame = pd.DataFrame([rec.model_dump() for rec in summary.replicates])
    frame.insert(0, "n", summary.n)
    frame.insert(0, "lambda", summary.lam)
    return frame


def write_replicates_csv(summary: PowerSummary, path: Optional[str] = None) -> str:
    text = replicate_frame(summary).to_csv(index=False, float_format="%.6g", lineterminator="\n")
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
