"""Experiment configuration and report documents (JSON, validated against bundled schemas)."""

from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from importlib import resources

import jsonschema

from corrqpt.errors import FormatError

SCHEMA_VERSION = 1


class SchemaError(FormatError):
    """A config or report document does not match its schema."""

    def __init__(self, message, field_path=""):
        super().__init__(message)
        self.field = field_path


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("corrqpt").joinpath("schemas", f"{name}.schema.json").read_text("utf-8")
    return json.loads(text)


def _validate(doc, name: str) -> None:
    validator = jsonschema.Draft202012Validator(load_schema(name))
    err = jsonschema.exceptions.best_match(validator.iter_errors(doc))
    if err is None:
        return
    path = "/".join(str(p) for p in err.absolute_path)
    if err.validator == "required":
        # the error sits on the parent object; name the missing field itself
        m = re.match(r"'(.+?)' is a required property", err.message)
        if m:
            path = "/".join(filter(None, [path, m.group(1)]))
    raise SchemaError(f"invalid {name} at '{path}': {err.message}", path)


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    dS: int = 2
    dE: int = 2
    seed: int = 0
    scenario: str | dict | None = None
    w: float = 0.5
    noise_sigma: float = 0.0
    n_instances: int = 100
    inject_canonical: bool = False
    output_path: str | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        _validate(doc, "config")
        return cls(**doc)

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"config {path} is not valid JSON: {exc}") from exc
    return ExperimentConfig.from_dict(doc)


def empty_metrics() -> dict:
    return {
        "reconstruction_error": None,
        "norm_chi": None,
        "norm_K": None,
        "norm_Baff": None,
        "min_eig_M": None,
        "min_eig_B": None,
        "trace_checks": {},
        "p_list": [],
    }


@dataclass
class Report:
    config: dict
    tool_version: str
    metrics: dict = field(default_factory=empty_metrics)
    scan: list | None = None
    diagnostics: list | None = None
    errors: list = field(default_factory=list)
    ok: bool = True
    wall_time: float = 0.0
    schema_version: int = SCHEMA_VERSION

    def add_check(self, name: str, value: float, tolerance: float, passed: bool | None = None) -> None:
        if passed is None:
            passed = value <= tolerance
        self.metrics["trace_checks"][name] = {
            "value": float(value),
            "tolerance": float(tolerance),
            "passed": bool(passed),
        }

    def add_error(self, stage: str, exc: BaseException) -> None:
        self.errors.append({"stage": stage, "type": type(exc).__name__, "message": str(exc)})

    @property
    def checks_passed(self) -> bool:
        return all(c["passed"] for c in self.metrics["trace_checks"].values())

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, doc: dict) -> "Report":
        _validate(doc, "report")
        return cls(**doc)


def _check_finite(obj, path="") -> None:
    if isinstance(obj, float) and not math.isfinite(obj):
        raise ValueError(f"non-finite value at {path or '<root>'}")
    if isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(v, f"{path}/{k}")
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            _check_finite(v, f"{path}/{i}")


def dump_report(report: Report) -> str:
    doc = report.to_dict()
    _check_finite(doc)
    _validate(doc, "report")
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_report(report: Report, path) -> None:
    text = dump_report(report)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def load_report(path) -> Report:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"report {path} is not valid JSON: {exc}") from exc
    return Report.from_dict(doc)
