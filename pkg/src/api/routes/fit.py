import logging

from fastapi import APIRouter, HTTPException
from pydantic import ValidationError
from starlette.concurrency import run_in_threadpool

from src.api.schemas.fit import FitConfig, FitRequest
from src.api.schemas.gof import GofConfig, GofRequest
from src.api.schemas.sample import CountSample
from src.config import get_settings
from src.services.apma import fit_ext_nb, fit_nb, fit_poisson
from src.services.dataset_io import ResultDocument, fit_document, gof_document, poisson_document
from src.services.distributions import ConversionError
from src.services.gof import bootstrap_test
from src.services.sufficient_stats import SampleError, summarize, summarize_frequencies

logger = logging.getLogger(__name__)
router = APIRouter(prefix="/api/v1", tags=["Fitting"])


def _sample(request) -> CountSample:
    if request.data is not None:
        return summarize(request.data)
    return summarize_frequencies(request.frequencies)


def _run_fit(request: FitRequest) -> ResultDocument:
    sample = _sample(request)
    cfg = FitConfig.from_settings(nu_max=request.nu_max, epsilon=request.epsilon, delta=request.delta)

    if request.model == "poisson":
        lam, loglik = fit_poisson(sample)
        return poisson_document(sample, lam, loglik)

    fit = fit_ext_nb(sample, cfg) if request.model == "enb" else fit_nb(sample, cfg)
    if fit.warning:
        logger.warning(fit.warning)
    return fit_document(sample, fit, cfg)


def _run_gof(request: GofRequest) -> ResultDocument:
    sample = _sample(request)
    cfg = GofConfig.from_settings(
        request.seed,
        boot_reps=request.boot_reps,
        level=request.level,
        model=request.model,
    )
    result = bootstrap_test(sample, cfg)
    if result.fitted.warning:
        logger.warning(result.fitted.warning)
    return gof_document(sample, result, cfg.fit_cfg)


@router.post("/fit", response_model=ResultDocument)
async def fit(request: FitRequest):
    """
    Fit NB(nu, p), extended NB(mu, p) or Poisson to a count sample.

    **Models:**
    - nb: profile maximization over (epsilon, nu_max]
    - enb: extended family; Poisson branch when the sample is not overdispersed
    - poisson: closed form, lambda = mean
    """
    try:
        doc = await run_in_threadpool(_run_fit, request)
        logger.info(f"fit model={doc.model} n={doc.input.n} branch={doc.branch} boundary={doc.at_boundary}")
        return doc

    except (SampleError, ConversionError, ValidationError) as e:
        logger.warning(f"Rejected fit request: {e}")
        raise HTTPException(status_code=422, detail=str(e))

    except Exception as e:
        logger.error(f"Fit failed: {e}")
        raise HTTPException(status_code=500, detail=f"Internal error: {str(e)}")


@router.post("/gof", response_model=ResultDocument)
async def goodness_of_fit(request: GofRequest):
    """
    Parametric-bootstrap Kolmogorov-Smirnov test of the fitted NB law.

    The seed is required; the same request always returns the same document.
    """
    try:
        doc = await run_in_threadpool(_run_gof, request)
        logger.info(f"gof n={doc.input.n} D_n={doc.gof.D_n:.6g} d_n={doc.gof.d_n:.6g} reject={doc.gof.reject}")
        return doc

    except (SampleError, ConversionError, ValidationError) as e:
        logger.warning(f"Rejected gof request: {e}")
        raise HTTPException(status_code=422, detail=str(e))

    except Exception as e:
        logger.error(f"Goodness-of-fit failed: {e}")
        raise HTTPException(status_code=500, detail=f"Internal error: {str(e)}")


@router.get("/fit/health")
async def fit_health():
    """Health check with the active fit defaults."""
    settings = get_settings()
    return {
        "status": "healthy",
        "service": "fit",
        "defaults": {
            "nu_max": settings.nu_max,
            "epsilon": settings.epsilon,
            "delta": settings.delta,
            "boot_reps": settings.boot_reps,
        },
    }
