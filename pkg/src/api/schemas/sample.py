from typing import Dict, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class CountSample(BaseModel):
    """Immutable summary of a nonnegative-integer sample.

    Built by ``src.services.sufficient_stats``; every estimator consumes this
    instead of the raw data. ``freq`` maps each distinct value to its count
    and is sorted by value.
    """

    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=1, description="Sample size")
    freq: Dict[int, int] = Field(..., description="Distinct value -> frequency, sorted by value")
    mean: float = Field(..., ge=0, description="Sample mean")
    var_biased: float = Field(..., ge=0, description="Variance with divisor n")
    var_unbiased: Optional[float] = Field(None, ge=0, description="Variance with divisor n-1; None when n = 1")
    max: int = Field(..., ge=0, description="Largest observed value")
    distinct_ratio: float = Field(..., gt=0, le=1, description="Number of distinct values over n")
    total: int = Field(..., ge=0, description="Exact sum of the observations")
    scaled_ss: int = Field(..., ge=0, description="Exact n * sum(y^2) - (sum y)^2")

    @property
    def values(self) -> np.ndarray:
        return np.fromiter(self.freq.keys(), dtype=np.int64, count=len(self.freq))

    @property
    def counts(self) -> np.ndarray:
        return np.fromiter(self.freq.values(), dtype=np.int64, count=len(self.freq))

    @property
    def zero_count(self) -> int:
        return self.freq.get(0, 0)

    @property
    def overdispersed(self) -> bool:
        """Biased variance strictly above the mean, decided in exact integers."""
        return self.scaled_ss > self.total * self.n
