from enum import StrEnum
from pathlib import Path
from typing import Any

from pydantic import AliasChoices, BaseModel, ConfigDict, Field, field_validator

MAX_SEED = 2**64


class Measure(StrEnum):
    RDC = "rdc"
    PEARSON = "pearson"


class ScaleConvention(StrEnum):
    # w ~ N(0, I/s): s is the Gaussian kernel width picked by the median heuristic
    BANDWIDTH = "bandwidth"
    # w ~ N(0, s I)
    VARIANCE = "variance"


class RdcParams(BaseModel):
    """Parameters of the Randomized Dependence Coefficient estimator.

    ``s=None`` selects the median heuristic independently for each sample; a positive
    value fixes the projection scale for both.
    """

    model_config = ConfigDict(frozen=True)

    k: int = Field(default=10, ge=1)
    s: float | None = Field(default=None, gt=0)
    repetitions: int = Field(default=5, ge=1)
    seed: int = Field(default=0, ge=0, lt=MAX_SEED)
    ridge: float = Field(default=1e-6, ge=0)
    scale: ScaleConvention = ScaleConvention.BANDWIDTH


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="ignore", populate_by_name=True)

    input: Path | None = Field(default=None, validation_alias=AliasChoices("input", "input_path"))
    input_base: str = "XAG"
    base: str = "XAG"
    delimiter: str = "auto"
    measure: Measure = Measure.RDC
    window: int = Field(default=100, ge=2)
    smoothing: int = Field(default=30, ge=1)
    k: int = Field(default=10, ge=1)
    repetitions: int = Field(default=5, ge=1, validation_alias=AliasChoices("repetitions", "reps"))
    ridge: float = Field(default=1e-6, ge=0)
    seed: int = Field(default=0, ge=0, lt=MAX_SEED)
    scale: ScaleConvention = ScaleConvention.BANDWIDTH
    continents: Path | None = None
    out: Path = Path("fxnet_out")
    year: int | None = None
    jobs: int = Field(default=1, ge=1)

    @field_validator("year", "input", "continents", mode="before")
    @classmethod
    def _blank_is_unset(cls, value: Any) -> Any:
        if isinstance(value, str) and not value.strip():
            return None
        return value

    @field_validator("measure", "scale", mode="before")
    @classmethod
    def _lowercase(cls, value: Any) -> Any:
        return value.strip().lower() if isinstance(value, str) else value

    @field_validator("base", "input_base")
    @classmethod
    def _currency_code(cls, value: str) -> str:
        code = value.strip().upper()
        if not code:
            raise ValueError("currency code must not be empty")
        return code

    @field_validator("delimiter")
    @classmethod
    def _known_delimiter(cls, value: str) -> str:
        aliases = {"auto": "auto", ",": ",", "comma": ",", "\t": "\t", "\\t": "\t", "tab": "\t"}
        key = value if value == "\t" else value.strip().lower()
        if key not in aliases:
            raise ValueError("delimiter must be one of auto, comma, tab")
        return aliases[key]

    @property
    def rdc_params(self) -> RdcParams:
        return RdcParams(
            k=self.k,
            repetitions=self.repetitions,
            ridge=self.ridge,
            seed=self.seed,
            scale=self.scale,
        )


class TailFit(BaseModel):
    """Power-law and log-normal fits of a degree distribution tail."""

    available: bool
    alpha: float | None = None
    xmin: int | None = None
    mu: float | None = None
    sigma: float | None = None
    ks_pl: float | None = None
    ks_ln: float | None = None
    n_tail: int = 0


class HealthResponse(BaseModel):
    ok: bool


class RdcRequest(BaseModel):
    x: list[float] = Field(..., min_length=2)
    y: list[float] = Field(..., min_length=2)
    k: int = Field(default=10, ge=1, le=200)
    repetitions: int = Field(default=5, ge=1, le=100)
    ridge: float = Field(default=1e-6, ge=0)
    seed: int = Field(default=0, ge=0, lt=MAX_SEED)


class RdcResponse(BaseModel):
    value: float
    repetitions: list[float]
    degenerate: bool


class EvolveResponse(BaseModel):
    job_id: str
    status: str
    networks: int


class RankingRow(BaseModel):
    rank: int
    currency: str
    avg_degree: float
