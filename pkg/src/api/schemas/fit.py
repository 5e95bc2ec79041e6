from enum import Enum
from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.api.schemas.params import ExtNBParams, NBParams


class FitConfig(BaseModel):
    """Inputs of the profile maximization."""

    model_config = ConfigDict(frozen=True)

    nu_max: float = Field(1e4, gt=0, allow_inf_nan=False, description="Upper bound for nu")
    epsilon: float = Field(1e-3, gt=0, allow_inf_nan=False, description="Lower bound for nu and variance floor of the initializer")
    delta: float = Field(0.1, gt=0, lt=1, description="Distinct-value ratio below which the frequency form is used")
    max_iter: int = Field(500, ge=1, description="Quasi-Newton iteration cap")
    grad_tol: float = Field(1e-8, gt=0, description="Relative tolerance on |h'(nu)|")

    @model_validator(mode="after")
    def check_bounds(self) -> "FitConfig":
        if self.epsilon >= self.nu_max:
            raise ValueError(f"epsilon ({self.epsilon}) must be below nu_max ({self.nu_max})")
        return self

    @classmethod
    def from_settings(cls, settings=None, **overrides) -> "FitConfig":
        from src.config import get_settings

        settings = settings or get_settings()
        values = {
            "nu_max": settings.nu_max,
            "epsilon": settings.epsilon,
            "delta": settings.delta,
            "max_iter": settings.max_iter,
            "grad_tol": settings.grad_tol,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class FitBranch(str, Enum):
    ALL_ZERO = "AllZero"
    POISSON = "PoissonBranch"
    OPTIMIZED = "Optimized"


class FitResult(BaseModel):
    """Maximum likelihood fit of NB(nu, p) or extended NB(mu, p).

    For an all-zero sample every nu in (0, nu_max] is an MLE together with
    p = 1; the fit reports nu = 1 by convention.
    """

    model_config = ConfigDict(frozen=True)

    model: Literal["nb", "enb"] = Field(..., description="Fitted family")
    params: Union[NBParams, ExtNBParams] = Field(..., description="Estimates")
    loglik: float = Field(..., description="Maximized log-likelihood")
    at_boundary: bool = Field(False, description="nu_hat equals nu_max")
    branch: FitBranch
    iterations: int = Field(0, ge=0, description="Quasi-Newton iterations used")
    init_nu: Optional[float] = Field(None, description="Moment initializer, when the optimizer ran")
    converged: bool = Field(True, description="Stationarity or boundary reached within max_iter")
    form: Optional[str] = Field(None, description="Score form used by the optimizer")
    warning: Optional[str] = Field(None, description="Boundary warning text")

    @property
    def nu_hat(self) -> Optional[float]:
        """Size estimate; None on the Poisson branch where it is infinite."""
        if isinstance(self.params, NBParams):
            return self.params.nu
        if self.params.mu == 0.0:
            return 1.0
        if self.params.p == 1.0:
            return None
        return self.params.mu * self.params.p / (1.0 - self.params.p)


class FitRequest(BaseModel):
    """Request body for the fit endpoint."""

    data: Optional[List[int]] = Field(None, description="Raw observations")
    frequencies: Optional[Dict[int, int]] = Field(None, description="Value -> count table")
    model: Literal["nb", "enb", "poisson"] = Field("nb", description="Family to fit")
    nu_max: Optional[float] = Field(None, gt=0)
    epsilon: Optional[float] = Field(None, gt=0)
    delta: Optional[float] = Field(None, gt=0, lt=1)

    @model_validator(mode="after")
    def check_payload(self) -> "FitRequest":
        if (self.data is None) == (self.frequencies is None):
            raise ValueError("provide exactly one of data or frequencies")
        return self
