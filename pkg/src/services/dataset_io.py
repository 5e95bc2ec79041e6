import io
import json
import logging
import math
import re
from collections import Counter
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, TextIO, Union

import pandas as pd
from pydantic import BaseModel, Field, field_serializer, field_validator

from src.api.schemas.fit import FitConfig, FitResult
from src.api.schemas.gof import GofResult
from src.api.schemas.params import NBParams, PoissonParams
from src.api.schemas.sample import CountSample
from src.services.distributions import law_moments
from src.services.sufficient_stats import EmptySampleError, SampleError, summarize_frequencies

logger = logging.getLogger(__name__)


SCHEMA_VERSION = "1"
_COUNT_TOKEN = re.compile(r"^\d+$")

Source = Union[str, Path, TextIO]


class DatasetFormat(str, Enum):
    RAW = "raw"
    FREQ = "freq"


class DatasetError(SampleError):
    """Malformed dataset content, located by line and token."""

    def __init__(self, message: str, line: Optional[int] = None, token: Optional[str] = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")
        self.line = line
        self.token = token


def _read_text(source: Source) -> str:
    if hasattr(source, "read"):
        return source.read()
    return Path(source).read_text(encoding="utf-8")


def _parse_count(token: str, line: int, what: str) -> int:
    token = str(token).strip()
    if not _COUNT_TOKEN.match(token):
        raise DatasetError(f"invalid {what} {token!r}: expected a nonnegative integer", line, token)
    return int(token)


def _blank(token) -> bool:
    return pd.isna(token) or not str(token).strip()


def _read_raw(text: str) -> CountSample:
    tally: Counter = Counter()
    for line_no, line in enumerate(text.splitlines(), start=1):
        for token in line.split():
            tally[_parse_count(token, line_no, "count")] += 1
    if not tally:
        raise EmptySampleError("dataset contains no observations")
    return summarize_frequencies(tally)


def _read_freq(text: str) -> CountSample:
    if not text.strip():
        raise EmptySampleError("dataset is empty")
    try:
        frame = pd.read_csv(
            io.StringIO(text), dtype=str, keep_default_na=False, skipinitialspace=True, skip_blank_lines=False
        )
    except pd.errors.ParserError as e:
        raise DatasetError(f"malformed CSV: {e}") from e

    header = [str(c).strip() for c in frame.columns]
    if header != ["value", "count"]:
        raise DatasetError(f"header must be 'value,count', got {','.join(header)!r}", 1)

    freq: Dict[int, int] = {}
    previous = -1
    for offset, (value_token, count_token) in enumerate(frame.itertuples(index=False, name=None)):
        # blank rows are kept so offsets map to physical lines
        if _blank(value_token) and _blank(count_token):
            continue
        line = offset + 2
        value = _parse_count(value_token, line, "value")
        count = _parse_count(count_token, line, "count")
        if value <= previous:
            raise DatasetError(f"values must be strictly increasing ({value} after {previous})", line, value_token)
        if count < 1:
            raise DatasetError(f"count must be at least 1, got {count}", line, count_token)
        freq[value] = count
        previous = value
    if not freq:
        raise EmptySampleError("dataset contains no rows")
    return summarize_frequencies(freq)


def read_dataset(source: Source, fmt: Union[DatasetFormat, str] = DatasetFormat.RAW) -> CountSample:
    """Read raw whitespace-separated counts or a value,count frequency CSV."""
    fmt = DatasetFormat(fmt)
    text = _read_text(source)
    sample = _read_raw(text) if fmt == DatasetFormat.RAW else _read_freq(text)
    logger.debug(f"read {fmt.value} dataset: n={sample.n} distinct={len(sample.freq)}")
    return sample


def infer_format(path: Union[str, Path]) -> DatasetFormat:
    return DatasetFormat.FREQ if str(path).lower().endswith(".csv") else DatasetFormat.RAW


def write_frequency_csv(sample: CountSample, path: Optional[Union[str, Path]] = None) -> str:
    frame = pd.DataFrame({"value": sample.values, "count": sample.counts})
    text = frame.to_csv(index=False, lineterminator="\n")
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


# Result documents

class InputSummary(BaseModel):
    n: int
    mean: float
    var_biased: float
    var_unbiased: Optional[float]
    max: int


class GofBlock(BaseModel):
    D_n: float
    d_n: float
    p_value: float
    reject: bool
    B: int
    level: float
    seed: int


class ResultDocument(BaseModel):
    """Canonical fit (and optional goodness-of-fit) report."""

    schema_version: str = SCHEMA_VERSION
    input: InputSummary
    model: str
    estimates: Dict[str, float]
    loglik: float
    at_boundary: bool
    branch: str
    config: Dict[str, Any] = Field(default_factory=dict)
    warning: Optional[str] = None
    gof: Optional[GofBlock] = None

    @field_validator("loglik", mode="before")
    @classmethod
    def decode_loglik(cls, value):
        if value == "-inf":
            return -math.inf
        return value

    @field_serializer("loglik")
    def encode_loglik(self, value: float):
        if value == -math.inf:
            return "-inf"
        return value


def _estimates(params) -> Dict[str, float]:
    mean, variance = law_moments(params)
    if isinstance(params, PoissonParams):
        out = {"lambda": params.lam}
    elif isinstance(params, NBParams):
        out = {"nu": params.nu, "p": params.p}
    else:
        out = {"mu": params.mu, "p": params.p}
        if 0 < params.p < 1 and params.mu > 0:
            out["nu"] = params.mu * params.p / (1.0 - params.p)
    out.update({"mean": mean, "variance": variance})
    return out


def _input_summary(sample: CountSample) -> InputSummary:
    return InputSummary(
        n=sample.n,
        mean=sample.mean,
        var_biased=sample.var_biased,
        var_unbiased=sample.var_unbiased,
        max=sample.max,
    )


def fit_document(sample: CountSample, fit: FitResult, cfg: FitConfig) -> ResultDocument:
    return ResultDocument(
        input=_input_summary(sample),
        model=fit.model,
        estimates=_estimates(fit.params),
        loglik=fit.loglik,
        at_boundary=fit.at_boundary,
        branch=fit.branch.value,
        config=cfg.model_dump(),
        warning=fit.warning,
    )


def poisson_document(sample: CountSample, lam: float, loglik: float) -> ResultDocument:
    if lam > 0:
        estimates = _estimates(PoissonParams(lam=lam))
    else:
        estimates = {"lambda": 0.0, "mean": 0.0, "variance": 0.0}
    return ResultDocument(
        input=_input_summary(sample),
        model="poisson",
        estimates=estimates,
        loglik=loglik,
        at_boundary=False,
        branch="Closed",
    )


def gof_document(sample: CountSample, result: GofResult, cfg: FitConfig) -> ResultDocument:
    doc = fit_document(sample, result.fitted, cfg)
    return doc.model_copy(update={"gof": GofBlock(
        D_n=result.D_n,
        d_n=result.d_n,
        p_value=result.p_value,
        reject=result.reject,
        B=result.boot_reps,
        level=result.level,
        seed=result.seed,
    )})


def write_result(doc: ResultDocument) -> str:
    """Deterministic JSON: sorted keys, shortest round-trip floats, no NaN/inf."""
    payload = doc.model_dump(mode="python")
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"


def parse_result(text: str) -> ResultDocument:
    return ResultDocument.model_validate(json.loads(text))
