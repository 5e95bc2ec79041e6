from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.api.schemas.fit import FitConfig, FitResult


class GofConfig(BaseModel):
    """Parametric-bootstrap KS test settings."""

    model_config = ConfigDict(frozen=True)

    boot_reps: int = Field(1000, ge=100, description="Bootstrap replicates B")
    level: float = Field(0.05, gt=0, lt=1, description="Test level")
    seed: int = Field(..., description="Root seed; replicate b uses the stream keyed (seed, b)")
    fit_cfg: FitConfig = Field(default_factory=FitConfig)
    model: Literal["nb", "enb"] = Field("nb", description="Null family")
    workers: int = Field(1, ge=1, description="Worker processes; results do not depend on it")

    @classmethod
    def from_settings(cls, seed: int, settings=None, **overrides) -> "GofConfig":
        from src.config import get_settings

        settings = settings or get_settings()
        values = {
            "boot_reps": settings.boot_reps,
            "level": settings.level,
            "workers": settings.workers,
            "fit_cfg": FitConfig.from_settings(settings),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(seed=seed, **values)


class GofResult(BaseModel):
    """Outcome of one bootstrap KS test.

    ``reject`` requires D_n >= d_n and D_n > 0, so an exactly fitting
    degenerate law is never rejected.
    """

    D_n: float = Field(..., ge=0, le=1, description="KS distance between empirical and fitted CDF")
    d_n: float = Field(..., ge=0, le=1, description="Bootstrap (1 - level) quantile of D*")
    p_value: float = Field(..., gt=0, le=1, description="(1 + #{D* >= D_n}) / (B + 1)")
    reject: bool
    fitted: FitResult
    boot_stats: List[float] = Field(..., description="Bootstrap statistics in replicate order")
    boot_reps: int
    level: float
    seed: int


class PowerReplicate(BaseModel):
    """One replicate of a power study."""

    replicate: int
    nu_hat: Optional[float] = Field(None, description="None on the extended-NB Poisson branch")
    p_hat: float
    D_n: float
    d_n: float
    p_value: float
    reject: bool
    at_boundary: bool
    branch: str
    fit_error: float = Field(..., description="sup_y |F_fitted(y) - F_true(y)|")


class PowerSummary(BaseModel):
    """Aggregate of a rejection study; lam holds the mean of the generating law."""

    lam: float
    n: int
    reps: int
    boot_reps: int
    seed: int
    model: str
    power: float = Field(..., ge=0, le=1, description="Rejection fraction")
    boundary_rate: float = Field(..., ge=0, le=1)
    medians: Dict[str, Optional[float]]
    means: Dict[str, Optional[float]]
    replicates: List[PowerReplicate]


class GofRequest(BaseModel):
    """Request body for the goodness-of-fit endpoint."""

    data: Optional[List[int]] = Field(None, description="Raw observations")
    frequencies: Optional[Dict[int, int]] = Field(None, description="Value -> count table")
    model: Literal["nb", "enb"] = Field("nb")
    boot_reps: int = Field(200, ge=100, le=5000)
    level: float = Field(0.05, gt=0, lt=1)
    seed: int = Field(..., description="Seed, required so results can be replayed")

    @model_validator(mode="after")
    def check_payload(self) -> "GofRequest":
        if (self.data is None) == (self.frequencies is None):
            raise ValueError("provide exactly one of data or frequencies")
        return self
