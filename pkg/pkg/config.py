"""
Configuration settings for the hybrid ASR toolkit.

Values come from (highest first) command-line flags, a TOML config file whose
sections mirror the module names, ``HYBRIDASR_*`` environment variables, and
the defaults below.
"""

import logging
from typing import Any, Dict, List, Optional, Tuple, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from pkg.decoder.core import DecodeConfig
from pkg.ngram.core import DEFAULT_DISCOUNT, MAX_ORDER
from pkg.pipeline.augment import DEFAULT_COPIES, DEFAULT_SNRS
from pkg.pipeline.segments import (
    DEFAULT_CHUNK_SECONDS,
    DEFAULT_MAX_DURATION,
    DEFAULT_MAX_MERGE_GAP,
    DEFAULT_MIN_DURATION,
    DEFAULT_SILENCE_GAP,
)
from pkg.rescore.nbest import DEFAULT_N
from pkg.utils.errors import BadConfig
from pkg.utils.io import require_path
from pkg.utils.logging import setup_secure_logging, log_file_operation

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

logger = setup_secure_logging(__name__, logging.WARNING)

ENV_PREFIX = "HYBRIDASR_"

M = TypeVar("M", bound=BaseModel)


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class PathsConfig(_Section):
    """Default artifact locations used when a command is given no explicit path."""

    work_dir: str = "exp"
    graph_dir: Optional[str] = None
    bpe_model: Optional[str] = None
    lm: Optional[str] = None
    rnnlm: Optional[str] = None
    references: Optional[str] = None


class TextnormConfig(_Section):
    rules: Optional[str] = None


class SubwordConfig(_Section):
    vocab_size: int = Field(default=500, ge=1)
    mark_boundaries: bool = True


class NGramConfig(_Section):
    order: int = Field(default=3, ge=1, le=MAX_ORDER)
    discount: float = Field(default=DEFAULT_DISCOUNT, gt=0, lt=1)


class GraphConfig(_Section):
    tying_threshold: float = Field(default=float("inf"), ge=0)
    determinize: bool = True
    silence: bool = True
    max_multiplier: int = Field(default=100, ge=1)


class RescoreConfig(_Section):
    # required from the command line or the config file
    lm_scale: Optional[float] = Field(default=None, ge=0, allow_inf_nan=False)
    interp_lambda: Optional[float] = Field(default=None, ge=0, le=1)
    n: int = Field(default=DEFAULT_N, ge=1)
    rnn_preset: Optional[str] = None
    embed_dim: Optional[int] = Field(default=None, ge=1)
    hidden_dim: Optional[int] = Field(default=None, ge=1)
    epochs: int = Field(default=10, ge=0)
    learning_rate: float = Field(default=0.01, gt=0)
    bptt: int = Field(default=16, ge=1)
    seed: int = 0


class PipelineSection(_Section):
    chunk: float = Field(default=DEFAULT_CHUNK_SECONDS, gt=0)
    min_duration: float = Field(default=DEFAULT_MIN_DURATION, gt=0)
    max_duration: float = Field(default=DEFAULT_MAX_DURATION, gt=0)
    silence_gap: float = Field(default=DEFAULT_SILENCE_GAP, ge=0)
    max_merge_gap: float = Field(default=DEFAULT_MAX_MERGE_GAP, ge=0)
    snrs: Tuple[float, ...] = DEFAULT_SNRS
    copies: int = Field(default=DEFAULT_COPIES, ge=0)
    seed: int = 0

    @model_validator(mode="after")
    def _check_durations(self):
        if self.min_duration > self.max_duration:
            raise ValueError("min_duration must not exceed max_duration")
        if not self.snrs:
            raise ValueError("snrs must not be empty")
        return self


class EvalConfig(_Section):
    lenient_apostrophe: bool = False


class PipelineConfig(BaseSettings):
    """Whole-toolkit settings; one section per module."""

    model_config = SettingsConfigDict(env_prefix=ENV_PREFIX, env_nested_delimiter="__",
                                      extra="forbid", frozen=True)

    workers: int = Field(default=1, ge=1)
    paths: PathsConfig = PathsConfig()
    textnorm: TextnormConfig = TextnormConfig()
    subword: SubwordConfig = SubwordConfig()
    ngram: NGramConfig = NGramConfig()
    graph: GraphConfig = GraphConfig()
    decode: DecodeConfig = DecodeConfig()
    rescore: RescoreConfig = RescoreConfig()
    pipeline: PipelineSection = PipelineSection()
    eval: EvalConfig = EvalConfig()


def _first_error(e: ValidationError) -> str:
    error = e.errors()[0]
    where = ".".join(str(part) for part in error.get("loc", ()))
    return f"{where}: {error['msg']}" if where else error["msg"]


def load_config(path: Optional[str] = None) -> PipelineConfig:
    """
    Build the configuration from an optional TOML file plus the environment.

    Raises:
        MissingPath: when ``path`` is given but absent
        BadConfig: for unparsable TOML, unknown keys or out-of-range values
    """
    data: Dict[str, Any] = {}
    if path:
        require_path(path)
        log_file_operation("reading config", path, logger)
        try:
            with open(path, "rb") as f:
                data = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise BadConfig(f"config file {path}: {e}")
    try:
        return PipelineConfig(**data)
    except ValidationError as e:
        raise BadConfig(f"invalid configuration: {_first_error(e)}")


def override(section: M, **values: Any) -> M:
    """Revalidated copy of ``section`` with the non-None ``values`` applied (flag precedence)."""
    updates = {k: v for k, v in values.items() if v is not None}
    if not updates:
        return section
    try:
        return type(section).model_validate({**section.model_dump(), **updates})
    except ValidationError as e:
        raise BadConfig(f"invalid option: {_first_error(e)}")


def config_lines(cfg: PipelineConfig) -> List[str]:
    """Flattened "section.key = value" lines for logging an experiment record."""
    lines = []
    for name, value in cfg.model_dump().items():
        if isinstance(value, dict):
            for key, inner in value.items():
                lines.append(f"{name}.{key} = {inner!r}")
        else:
            lines.append(f"{name} = {value!r}")
    return lines
