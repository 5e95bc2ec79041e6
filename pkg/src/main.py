import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI

from src.api.routes import fit
from src.config import get_settings
from src.logging_config import configure_logging

logger = logging.getLogger(__name__)


ENDPOINTS = {"fit": "/api/v1/fit", "gof": "/api/v1/gof"}


@asynccontextmanager
async def lifespan(app: FastAPI):
    settings = get_settings()
    logger.info(
        f"{settings.app_name} {settings.app_version} ready: "
        f"nu_max={settings.nu_max:g} epsilon={settings.epsilon:g} boot_reps={settings.boot_reps}"
    )
    yield


def create_app() -> FastAPI:
    """Build the fitting service with the NB and goodness-of-fit routes mounted."""
    settings = get_settings()
    configure_logging(settings)

    service = FastAPI(
        title=settings.app_name,
        version=settings.app_version,
        description="Maximum likelihood NB fits and bootstrap KS tests for count data.",
        lifespan=lifespan,
    )
    service.include_router(fit.router)

    @service.get("/")
    async def root():
        return {"service": settings.app_name, "version": settings.app_version, "endpoints": ENDPOINTS}

    @service.get("/health")
    async def health_check():
        return {"status": "healthy", "version": settings.app_version}

    return service


app = create_app()
