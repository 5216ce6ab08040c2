"""
Pydantic schemas for run configurations and report files.

Every report the CLI writes is validated against ``ReportEnvelope`` before
it reaches disk, so the on-disk shape stays stable across versions.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from spinfactor.config import (
    DEFAULT_AUDIT_FUNCTIONS,
    DEFAULT_COUPLING_HORIZON,
    DEFAULT_COUPLING_TRIALS,
    DEFAULT_LEAF_SIZE,
    DEFAULT_PINNING_BUDGET,
    DEFAULT_SEPARATOR_BUDGET,
    DEFAULT_SSM_RADIUS_CAP,
    DEFAULT_STRATEGY_ORDER,
    ENUMERATION_CAP,
    EXACT_MIXING_CAP,
    KNOWN_STRATEGIES,
    LINIAL_SAKS_RETRY_CAP,
    SSM_GAMMA_MIN,
)
from spinfactor.exceptions import InputValidationError
from spinfactor.models.graph import Graph
from spinfactor.models.spin_system import SpinSystem, system_from_config

Number = Union[int, float, str]


class ModelSpec(BaseModel):
    """Model kind plus its parameters, as read from a JSON model config."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    model: Literal["hardcore", "coloring", "general"]
    graph: Optional[str] = None
    fugacity: Optional[float] = Field(default=None, alias="lambda", gt=0)
    q: Optional[int] = Field(default=None, ge=1)
    lists: Optional[List[List[int]]] = None
    domains: Optional[List[Any]] = None
    field_weights: Optional[List[Any]] = Field(default=None, alias="fields")
    interaction: Optional[List[List[float]]] = None
    edge_tables: Optional[Dict[str, List[List[float]]]] = None

    @model_validator(mode="after")
    def check_parameters(self) -> "ModelSpec":
        if self.model == "hardcore" and self.fugacity is None:
            raise ValueError("hardcore model needs 'lambda'")
        if self.model == "coloring" and self.q is None and self.lists is None:
            raise ValueError("coloring model needs 'q' or 'lists'")
        if self.model == "general" and self.domains is None:
            raise ValueError("general model needs 'domains'")
        return self

    def parameters(self) -> Dict[str, Any]:
        return {
            "lambda": self.fugacity,
            "q": self.q,
            "lists": self.lists,
            "domains": self.domains,
            "fields": self.field_weights,
            "interaction": self.interaction,
            "edge_tables": self.edge_tables,
        }

    def build(self, graph: Graph) -> SpinSystem:
        return system_from_config(graph, self.model, self.parameters())


class RunConfig(BaseModel):
    """Effective parameters of one CLI run; echoed into every report."""

    model_config = ConfigDict(extra="forbid")

    graph: Optional[str] = None
    model: Optional[ModelSpec] = None
    budget: int = Field(default=DEFAULT_SEPARATOR_BUDGET, ge=1)
    leaf_size: int = Field(default=DEFAULT_LEAF_SIZE, ge=1)
    radius: Optional[int] = Field(default=None, ge=0)
    kind: Literal["var", "ent"] = "var"
    strategy: List[str] = Field(default_factory=lambda: list(DEFAULT_STRATEGY_ORDER))
    gamma: float = Field(default=SSM_GAMMA_MIN, ge=SSM_GAMMA_MIN)
    seed: int = Field(default=0, ge=0)
    threads: Optional[int] = Field(default=None, ge=1)
    functions: int = Field(default=DEFAULT_AUDIT_FUNCTIONS, ge=0)
    enumeration_cap: int = Field(default=ENUMERATION_CAP, ge=1)
    exact_mixing_cap: int = Field(default=EXACT_MIXING_CAP, ge=1)
    trials: int = Field(default=DEFAULT_COUPLING_TRIALS, ge=1)
    horizon: int = Field(default=DEFAULT_COUPLING_HORIZON, ge=1)
    radius_cap: int = Field(default=DEFAULT_SSM_RADIUS_CAP, ge=1)
    pinning_budget: int = Field(default=DEFAULT_PINNING_BUDGET, ge=1)
    retry_cap: int = Field(default=LINIAL_SAKS_RETRY_CAP, ge=1)
    linial_saks: bool = False
    subtree: bool = False
    subtree_root: int = Field(default=0, ge=0)
    method: Literal["auto", "exact", "coupling"] = "auto"
    form: Literal["log-logt", "log2"] = "log-logt"
    t: float = Field(default=2.0, gt=0)
    d: float = Field(default=1.0, gt=0)
    log_k0: Optional[float] = Field(default=None, gt=0)
    phi0: float = Field(default=1.0, gt=0)
    output: Optional[str] = None
    curve: Optional[str] = None

    @field_validator("strategy")
    @classmethod
    def check_strategy(cls, value: List[str]) -> List[str]:
        unknown = [s for s in value if s not in KNOWN_STRATEGIES]
        if unknown:
            raise ValueError(f"unknown strategies {unknown}; known: {sorted(KNOWN_STRATEGIES)}")
        if not value:
            raise ValueError("strategy order must not be empty")
        return value

    @field_validator("graph", "output", "curve")
    @classmethod
    def check_path_text(cls, value: Optional[str]) -> Optional[str]:
        if value is not None and not value.strip():
            raise ValueError("paths must not be blank")
        return value


class ReportMetadata(BaseModel):
    version: str
    analysis_type: str


class ReportEnvelope(BaseModel):
    """Top-level shape shared by every report file."""

    model_config = ConfigDict(extra="forbid")

    results: Dict[str, Any]
    config: Dict[str, Any]
    metadata: ReportMetadata


class NodeEntry(BaseModel):
    index: int
    U: List[int]
    S: List[int]
    ball: List[int]
    T: List[int]
    C_US: Number
    C_S: Number
    split_tag: str
    block_tag: str
    sampled: bool = False
    skipped: Dict[str, str] = Field(default_factory=dict)


class FactorizationResults(BaseModel):
    """``results`` block of an analyze report."""

    composed_C: Number
    coverage_A: Number
    coverage_source: str
    measured_coverage: int
    radius_r: int
    kind: str
    strategy_order: List[str]
    per_node: List[NodeEntry]
    tree: Dict[str, Any]
    audit: Optional[Dict[str, Any]] = None


class MixingResults(BaseModel):
    """``results`` block of a simulate report."""

    method: str
    t_mix: Number
    note: str
    censored: bool
    rng_algorithm: str
    quantiles: Optional[Dict[str, Number]] = None


def _validation_message(exc: ValidationError) -> str:
    parts = []
    for error in exc.errors():
        location = ".".join(str(p) for p in error["loc"]) or "<root>"
        parts.append(f"{location}: {error['msg']}")
    return "; ".join(parts)


def load_model_spec(path: Union[str, Path]) -> ModelSpec:
    """Read and validate a JSON model config file."""
    file_path = Path(path)
    if not file_path.is_file():
        raise InputValidationError(f"missing model config file: {file_path}")
    try:
        raw = json.loads(file_path.read_text())
    except json.JSONDecodeError as exc:
        raise InputValidationError(f"{file_path}: invalid JSON ({exc.msg})") from exc
    return parse_model_spec(raw)


def parse_model_spec(raw: Dict[str, Any]) -> ModelSpec:
    try:
        return ModelSpec.model_validate(raw)
    except ValidationError as exc:
        raise InputValidationError(f"bad model config: {_validation_message(exc)}") from exc


def build_run_config(values: Dict[str, Any]) -> RunConfig:
    """Validate CLI/config values; unset (None) entries fall back to defaults."""
    try:
        return RunConfig.model_validate({k: v for k, v in values.items() if v is not None})
    except ValidationError as exc:
        raise InputValidationError(f"bad run config: {_validation_message(exc)}") from exc


def validate_report(report: Dict[str, Any], analysis_type: Optional[str] = None) -> ReportEnvelope:
    """Check a report envelope and, for known analyses, its results block."""
    try:
        envelope = ReportEnvelope.model_validate(report)
        kind = analysis_type or envelope.metadata.analysis_type
        if kind == "analyze":
            FactorizationResults.model_validate(envelope.results)
        elif kind == "simulate":
            MixingResults.model_validate(envelope.results)
    except ValidationError as exc:
        raise InputValidationError(f"report does not match schema: {_validation_message(exc)}") from exc
    return envelope
