from enum import Enum
from typing import Union

from pydantic import BaseModel, ConfigDict, Field, model_validator


class PoissonParams(BaseModel):
    """Poisson(lambda): rate equals mean and variance."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lam: float = Field(..., gt=0, allow_inf_nan=False, alias="lambda", description="Rate")


class NBParams(BaseModel):
    """NB(nu, p): failures before the nu-th success.

    ``p = 1`` is the degenerate point mass at zero.
    """

    model_config = ConfigDict(frozen=True)

    nu: float = Field(..., gt=0, allow_inf_nan=False, description="Size")
    p: float = Field(..., gt=0, le=1, description="Success probability")


class AltNBKind(str, Enum):
    NU_MU = "nu_mu"
    NU_BIG_P = "nu_big_p"
    NU_ONE_MINUS_P = "nu_one_minus_p"


class AltNBParams(BaseModel):
    """NB in one of the alternative parameterizations.

    ``second`` is mu = nu(1-p)/p, P = (1-p)/p, or P = 1-p depending on ``kind``.
    """

    model_config = ConfigDict(frozen=True)

    kind: AltNBKind
    nu: float = Field(..., gt=0, allow_inf_nan=False)
    second: float = Field(..., ge=0, allow_inf_nan=False)

    @model_validator(mode="after")
    def check_range(self) -> "AltNBParams":
        if self.kind == AltNBKind.NU_ONE_MINUS_P and self.second >= 1:
            raise ValueError("P = 1 - p must lie in [0, 1)")
        return self


class ExtNBParams(BaseModel):
    """Extended NB(mu, p).

    mu = 0 is the point mass at zero; p = 1 is Poisson(mu); otherwise it is
    NB(nu = mu p / (1 - p), p).
    """

    model_config = ConfigDict(frozen=True)

    mu: float = Field(..., ge=0, allow_inf_nan=False, description="Mean")
    p: float = Field(..., gt=0, le=1, description="Success probability")


class ParamKind(str, Enum):
    NB = "nb"
    NU_MU = AltNBKind.NU_MU.value
    NU_BIG_P = AltNBKind.NU_BIG_P.value
    NU_ONE_MINUS_P = AltNBKind.NU_ONE_MINUS_P.value
    EXT_NB = "ext_nb"


CountLaw = Union[PoissonParams, NBParams, ExtNBParams]
