import logging
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar

from src.api.schemas.fit import FitBranch, FitConfig, FitResult
from src.api.schemas.params import AltNBKind, AltNBParams, ExtNBParams, NBParams
from src.api.schemas.sample import CountSample
from src.services.distributions import convert_params
from src.services.score import ScoreContext, ScoreDomainError, ScoreForm, p_hat
from src.services.special import log_gamma

logger = logging.getLogger(__name__)


STATIONARY_TOL = 1e-6
MIN_ORACLE_POINTS = 1000


def lower_bound(cfg: FitConfig) -> float:
    """Closed stand-in for the open lower end of (epsilon, nu_max]."""
    return cfg.epsilon * (1.0 + 1e-9)


def moment_init(sample: CountSample, cfg: FitConfig) -> float:
    """min(nu_max, mean^2 / max(epsilon, S^2 - mean)) with the unbiased S^2."""
    s2 = sample.var_unbiased if sample.var_unbiased is not None else 0.0
    return min(cfg.nu_max, sample.mean ** 2 / max(cfg.epsilon, s2 - sample.mean))


def _bracket_root(ctx: ScoreContext, nu: float, lo: float, hi: float) -> float:
    """Walk geometrically from nu toward the sign change of g and solve there."""
    g = ctx.score_g(nu)
    if g == 0.0:
        return nu

    if g > 0:
        a, b = nu, min(hi, 2.0 * nu)
        while b < hi and ctx.score_g(b) > 0:
            a, b = b, min(hi, 2.0 * b)
        if ctx.score_g(b) > 0:
            return hi
    else:
        a, b = max(lo, 0.5 * nu), nu
        while a > lo and ctx.score_g(a) < 0:
            a, b = max(lo, 0.5 * a), a
        if ctx.score_g(a) < 0:
            return lo

    return brentq(ctx.score_g, a, b, xtol=1e-14, rtol=1e-13, maxiter=200)


def _maximize(ctx: ScoreContext, cfg: FitConfig, init: float) -> Tuple[float, float, int, bool]:
    lo, hi = lower_bound(cfg), cfg.nu_max
    x0 = min(max(init, lo), hi)
    best_nu = x0
    best_h = ctx.profile_loglik(x0)

    def objective(x):
        h, dh = ctx.value_and_grad(float(x[0]))
        return -h, np.array([-dh])

    iterations = 0
    converged = False
    try:
        result = minimize(
            objective,
            x0=np.array([x0]),
            jac=True,
            method="L-BFGS-B",
            bounds=[(lo, hi)],
            options={"maxiter": cfg.max_iter, "ftol": 1e-15, "gtol": cfg.grad_tol * (1.0 + abs(best_h))},
        )
        iterations = int(result.nit)
        converged = bool(result.success)
        candidate = float(np.clip(result.x[0], lo, hi))
        h = ctx.profile_loglik(candidate)
        if h >= best_h:
            best_nu, best_h = candidate, h
    except (ValueError, FloatingPointError, ScoreDomainError) as e:
        logger.warning(f"L-BFGS-B failed from nu={x0:.6g}: {e}; continuing with the root polish")

    try:
        polished = _bracket_root(ctx, best_nu, lo, hi)
        h = ctx.profile_loglik(polished)
        if h >= best_h:
            best_nu, best_h = polished, h
    except (ValueError, RuntimeError) as e:
        logger.warning(f"root polish failed near nu={best_nu:.6g}: {e}")

    at_edge = best_nu <= lo or best_nu >= hi
    converged = converged or at_edge or abs(ctx.score_g(best_nu)) <= STATIONARY_TOL
    return best_nu, best_h, iterations, converged


def fit_nb(sample: CountSample, cfg: Optional[FitConfig] = None, form: Optional[ScoreForm] = None) -> FitResult:
    """Adaptive profile maximization for NB(nu, p).

    Moment-initialized bounded quasi-Newton ascent of h(nu) over
    [epsilon, nu_max], followed by the comparison against h(nu_max). Never
    raises for a valid sample; trouble shows up as ``converged=False``.
    """
    cfg = cfg or FitConfig()

    if sample.total == 0:
        return FitResult(
            model="nb",
            params=NBParams(nu=1.0, p=1.0),
            loglik=0.0,
            branch=FitBranch.ALL_ZERO,
        )

    ctx = ScoreContext(sample, delta=cfg.delta, form=form)
    init = moment_init(sample, cfg)
    nu_star, h_star, iterations, converged = _maximize(ctx, cfg, init)

    h_max = ctx.profile_loglik(cfg.nu_max)
    if h_max > h_star:
        nu_hat, loglik = cfg.nu_max, h_max
    else:
        nu_hat, loglik = nu_star, h_star

    at_boundary = nu_hat == cfg.nu_max
    warning = None
    if at_boundary:
        warning = (
            f"nu_hat reached nu_max = {cfg.nu_max:g}: the sample is not overdispersed enough "
            f"for an interior NB fit (Poisson-like data)"
        )
        logger.debug(warning)

    return FitResult(
        model="nb",
        params=NBParams(nu=nu_hat, p=p_hat(nu_hat, sample.mean)),
        loglik=loglik,
        at_boundary=at_boundary,
        branch=FitBranch.OPTIMIZED,
        iterations=iterations,
        init_nu=init,
        converged=converged,
        form=ctx.form.value,
        warning=warning,
    )


def fit_poisson(sample: CountSample) -> Tuple[float, float]:
    """(lambda_hat, loglik) with lambda_hat = mean and 0 * ln 0 = 0."""
    lam = sample.mean
    y = sample.values.astype(float)
    f = sample.counts.astype(float)
    log_factorials = float(np.dot(f, log_gamma(y + 1.0)))
    if sample.total == 0:
        return 0.0, 0.0
    return lam, float(sample.total * np.log(lam) - sample.n * lam - log_factorials)


def fit_ext_nb(sample: CountSample, cfg: Optional[FitConfig] = None) -> FitResult:
    """Extended NB(mu, p) fit; mu_hat is the sample mean in every branch."""
    cfg = cfg or FitConfig()

    if sample.total == 0:
        return FitResult(
            model="enb",
            params=ExtNBParams(mu=0.0, p=1.0),
            loglik=0.0,
            branch=FitBranch.ALL_ZERO,
        )

    if not sample.overdispersed:
        _, loglik = fit_poisson(sample)
        return FitResult(
            model="enb",
            params=ExtNBParams(mu=sample.mean, p=1.0),
            loglik=loglik,
            branch=FitBranch.POISSON,
        )

    core = fit_nb(sample, cfg)
    return core.model_copy(update={
        "model": "enb",
        "params": ExtNBParams(mu=sample.mean, p=core.params.p),
    })


def fit_alt_nb(sample: CountSample, kind: AltNBKind, cfg: Optional[FitConfig] = None) -> AltNBParams:
    """MLE in an alternative parameterization, by invariance from fit_nb."""
    return convert_params(fit_nb(sample, cfg).params, kind)


def grid_oracle(
    sample: CountSample,
    cfg: Optional[FitConfig] = None,
    grid_points: int = 4000,
    form: Optional[ScoreForm] = None,
) -> Tuple[float, float]:
    """Brute-force maximizer of h: log grid, then golden section in log(nu)."""
    cfg = cfg or FitConfig()
    if grid_points < MIN_ORACLE_POINTS:
        raise ValueError(f"grid_points must be at least {MIN_ORACLE_POINTS}")
    if sample.total == 0:
        return 1.0, 0.0

    ctx = ScoreContext(sample, delta=cfg.delta, form=form)
    lo, hi = lower_bound(cfg), cfg.nu_max
    grid = np.geomspace(lo, hi, grid_points)
    values = ctx.profile_loglik(grid)
    i = int(np.argmax(values))
    best_nu, best_h = float(grid[i]), float(values[i])

    if 0 < i < grid_points - 1:
        bracket = tuple(np.log(grid[i - 1:i + 2]))
        try:
            result = minimize_scalar(
                lambda t: -ctx.profile_loglik(float(np.exp(t))),
                bracket=bracket,
                method="golden",
                options={"xtol": 1e-10},
            )
            candidate = float(np.clip(np.exp(result.x), lo, hi))
            h = ctx.profile_loglik(candidate)
            if h > best_h:
                best_nu, best_h = candidate, h
        except ValueError:
            pass

    return best_nu, best_h
