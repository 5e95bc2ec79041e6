import logging
import numbers
from collections import Counter
from enum import Enum
from typing import Iterable, Mapping, Optional

import numpy as np

from src.api.schemas.sample import CountSample

logger = logging.getLogger(__name__)


MAX_EXACT = 2 ** 53


class SampleError(ValueError):
    """Base class for invalid count samples."""
    pass


class EmptySampleError(SampleError):
    """The sample has no observations."""
    pass


class SampleDomainError(SampleError):
    """An observation is negative, non-integer, non-finite or too large."""

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


class SimonsenCase(str, Enum):
    """Existence class of the interior root of the score equation."""

    ALL_ZERO = "NoSolution_AllZero"
    MAX_ONE = "NoSolution_MaxOne"
    UNDERDISPERSED = "NoSolution_Underdispersed"
    INTERIOR_ROOT = "UniqueInteriorRoot"


def _coerce(value, index: int) -> int:
    if isinstance(value, bool):
        raise SampleDomainError(f"element {index} is a boolean, not a count", index)
    if isinstance(value, numbers.Integral):
        y = int(value)
    elif isinstance(value, numbers.Real):
        x = float(value)
        if not np.isfinite(x) or not x.is_integer():
            raise SampleDomainError(f"element {index} is not an integer: {value!r}", index)
        y = int(x)
    else:
        raise SampleDomainError(f"element {index} is not a number: {value!r}", index)
    if y < 0:
        raise SampleDomainError(f"element {index} is negative: {y}", index)
    if y > MAX_EXACT:
        raise SampleDomainError(f"element {index} exceeds 2^53: {y}", index)
    return y


def _from_integer_array(arr: np.ndarray) -> Counter:
    flat = arr.ravel()
    negative = np.flatnonzero(flat < 0)
    if negative.size:
        i = int(negative[0])
        raise SampleDomainError(f"element {i} is negative: {int(flat[i])}", i)
    too_big = np.flatnonzero(flat > MAX_EXACT)
    if too_big.size:
        i = int(too_big[0])
        raise SampleDomainError(f"element {i} exceeds 2^53: {int(flat[i])}", i)
    values, counts = np.unique(flat, return_counts=True)
    return Counter({int(v): int(c) for v, c in zip(values, counts)})


def summarize(data: Iterable) -> CountSample:
    """Summarize a sequence of nonnegative integers.

    Raises EmptySampleError for no data and SampleDomainError (with the
    offending index) for anything that is not a nonnegative integer.
    """
    if isinstance(data, np.ndarray) and np.issubdtype(data.dtype, np.integer):
        if data.size == 0:
            raise EmptySampleError("sample is empty")
        return summarize_frequencies(_from_integer_array(data))

    tally: Counter = Counter()
    for i, value in enumerate(data):
        tally[_coerce(value, i)] += 1
    if not tally:
        raise EmptySampleError("sample is empty")
    return summarize_frequencies(tally)


def summarize_frequencies(freq: Mapping[int, int]) -> CountSample:
    """Summarize a value -> count table without expanding it."""
    table = {}
    for i, (key, count) in enumerate(freq.items()):
        y = _coerce(key, i)
        if isinstance(count, bool) or not isinstance(count, numbers.Integral) or count < 0:
            raise SampleDomainError(f"count for value {y} must be a nonnegative integer, got {count!r}", y)
        if count:
            table[y] = table.get(y, 0) + int(count)
    if not table:
        raise EmptySampleError("sample is empty")

    table = dict(sorted(table.items()))
    n = sum(table.values())
    total = sum(y * f for y, f in table.items())
    total_sq = sum(y * y * f for y, f in table.items())
    scaled_ss = n * total_sq - total * total

    return CountSample(
        n=n,
        freq=table,
        mean=total / n,
        var_biased=scaled_ss / (n * n),
        var_unbiased=scaled_ss / (n * (n - 1)) if n > 1 else None,
        max=max(table),
        distinct_ratio=len(table) / n,
        total=total,
        scaled_ss=scaled_ss,
    )


def expand(sample: CountSample) -> np.ndarray:
    """Materialize the raw multiset in sorted order."""
    return np.repeat(sample.values, sample.counts)


def simonsen_case(sample: CountSample) -> SimonsenCase:
    if sample.max == 0:
        return SimonsenCase.ALL_ZERO
    if sample.max == 1:
        return SimonsenCase.MAX_ONE
    if not sample.overdispersed:
        return SimonsenCase.UNDERDISPERSED
    return SimonsenCase.INTERIOR_ROOT
