"""Experiment configuration: TOML with sections geometry / disorder / box / run / params.

Unknown keys are rejected at every level.  See ``configs/schema.md``.
"""
from __future__ import annotations

import copy
import hashlib
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "COMMANDS",
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "apply_override",
    "config_hash",
]

COMMANDS = (
    "delone-gen",
    "delone-analyze",
    "spectrum",
    "certify-lemma",
    "certify-lifting",
    "wegner",
    "ilse",
    "ids",
    "dynamics",
    "edges",
)


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GeometryConfig(_Strict):
    kind: Literal["periodic", "sturmian", "random-cell", "full", "file"] = "full"
    d: int = Field(1, ge=1, le=3)
    window: Optional[str] = None
    k: int = Field(2, ge=1)
    alpha: str | float = "golden"
    beta: float = Field(0.5, ge=0.0, lt=1.0)
    R: int = Field(1, ge=1)
    seed: int = Field(0, ge=0)
    file: Optional[str] = None

    @model_validator(mode="after")
    def _file(self):
        if self.kind == "file":
            if self.file is None:
                raise ValueError("geometry.kind = 'file' needs geometry.file")
            if not Path(self.file).is_file():
                raise ValueError(f"geometry.file {self.file!r} does not exist")
        return self


class DisorderConfig(_Strict):
    law: Literal["uniform", "power", "beta"] = "uniform"
    M: float = Field(1.0, gt=0.0)
    tau: Optional[float] = Field(None, ge=1.0)
    a: Optional[float] = Field(None, ge=1.0)
    b: Optional[float] = Field(None, ge=1.0)
    reflected: bool = False
    enabled: bool = True


class BoxConfig(_Strict):
    centers: list[list[int]] = [[0]]
    Ls: list[int] = [10]

    @field_validator("Ls")
    @classmethod
    def _ls(cls, v):
        if not v or any(L < 0 for L in v):
            raise ValueError("Ls must be a non-empty list of non-negative integers")
        return v

    @field_validator("centers")
    @classmethod
    def _centers(cls, v):
        if not v or len({len(c) for c in v}) != 1:
            raise ValueError("centers must be a non-empty list of points of equal dimension")
        return v


class RunConfig(_Strict):
    nsamples: int = Field(10, ge=1)
    master_seed: int = Field(0, ge=0, lt=2**64)
    tol: float = Field(1e-10, gt=0.0)
    threads: int = Field(1, ge=1)
    out: str = "out"


class ParamsConfig(_Strict):
    q: str = "1/2"
    K: int = Field(1, ge=1)
    nphi: int = Field(1000, ge=1)
    min_frequency: float = Field(0.99, ge=0.0, le=1.0)
    energy_cap: float = Field(1.0, gt=0.0)
    E: Optional[float] = None
    etas: list[float] = [1e-3, 2e-3, 5e-3, 1e-2]
    p: float = Field(1.0, gt=0.0)
    energies: Optional[list[float]] = None
    nenergies: int = Field(101, ge=2)
    k: int = Field(0, ge=0)
    side: Literal["low", "high"] = "low"
    pattern_K: int = Field(1, ge=0)
    moment_p: float = Field(2.0, ge=0.0)
    interval: Optional[list[float]] = None
    t_max: float = Field(1e3, gt=0.0)
    npoints: int = Field(60, ge=2)
    times: Optional[list[float]] = None

    @field_validator("q")
    @classmethod
    def _q(cls, v):
        try:
            f = Fraction(v)
        except (ValueError, ZeroDivisionError) as e:
            raise ValueError(f"q must be a rational like '1/2': {e}") from None
        if not 0 < f < 1:
            raise ValueError("q must lie in (0, 1)")
        return v

    @field_validator("interval")
    @classmethod
    def _interval(cls, v):
        if v is not None and (len(v) != 2 or v[0] > v[1]):
            raise ValueError("interval must be [lo, hi] with lo <= hi")
        return v


class ExperimentConfig(_Strict):
    command: Optional[Literal[COMMANDS]] = None  # type: ignore[valid-type]
    geometry: GeometryConfig = GeometryConfig()
    disorder: DisorderConfig = DisorderConfig()
    box: BoxConfig = BoxConfig()
    run: RunConfig = RunConfig()
    params: ParamsConfig = ParamsConfig()

    @model_validator(mode="after")
    def _dims(self):
        d = self.geometry.d
        if any(len(c) != d for c in self.box.centers):
            raise ValueError(f"box centers must have dimension geometry.d = {d}")
        return self


def _format_errors(e: ValidationError) -> str:
    parts = []
    for err in e.errors():
        loc = ".".join(str(x) for x in err["loc"])
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(raw: dict, item: str) -> dict:
    """``section.key=value`` with a TOML-literal value (bare words become strings)."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, value = item.split("=", 1)
    parts = key.strip().split(".")
    if not all(parts):
        raise ConfigError(f"bad override key {key!r}")
    out = copy.deepcopy(raw)
    node = out
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {key!r} descends into a non-table")
    node[parts[-1]] = _parse_value(value.strip())
    return out


def load_config(path=None, overrides=(), **top) -> ExperimentConfig:
    raw: dict = {}
    if path is not None:
        try:
            raw = tomllib.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"config file {path}: {e}") from None
    for item in overrides:
        raw = apply_override(raw, item)
    for section, values in top.items():
        raw.setdefault(section, {}).update(values)
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(_format_errors(e)) from None


def config_hash(cfg: ExperimentConfig) -> str:
    """sha256 of the canonical config, ignoring output location and thread count."""
    data = cfg.model_dump(mode="json")
    data["run"].pop("out", None)
    data["run"].pop("threads", None)
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
