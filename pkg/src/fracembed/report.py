"""Diagnostics containers shared by the solvers and the CLI."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

__all__ = ["Check", "Report"]

_OPS = ("<=", ">=", "info")


@dataclass
class Check:
    """One measured quantity against a threshold (``op='info'`` never fails)."""

    name: str
    value: float
    threshold: float | None = None
    op: str = "<="

    def __post_init__(self) -> None:
        if self.op not in _OPS:
            raise ValueError(f"op must be one of {_OPS}")
        self.value = float(self.value)
        if self.op != "info" and self.threshold is None:
            raise ValueError("a threshold is required unless op='info'")

    @property
    def passed(self) -> bool:
        if self.op == "info":
            return True
        if not math.isfinite(self.value):
            return False
        if self.op == "<=":
            return self.value <= self.threshold
        return self.value >= self.threshold

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": _json_float(self.value),
            "threshold": None if self.threshold is None else _json_float(self.threshold),
            "op": self.op,
            "passed": self.passed,
        }


def _json_float(x: float):
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def _plain(obj: Any):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [_json_float(obj.real), _json_float(obj.imag)]
    if isinstance(obj, (np.floating, float)):
        return _json_float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


@dataclass
class Report:
    """Named checks plus free-form summary data and optional residual fields."""

    title: str
    checks: list[Check] = field(default_factory=list)
    data: dict = field(default_factory=dict)
    fields: dict = field(default_factory=dict)

    def add(self, name: str, value: float, threshold: float | None = None, op: str = "<=") -> Check:
        if any(c.name == name for c in self.checks):
            raise ValueError(f"duplicate check {name!r}")
        c = Check(name, value, threshold, op if threshold is not None or op == "info" else "info")
        self.checks.append(c)
        return c

    def info(self, name: str, value: float) -> Check:
        return self.add(name, value, None, "info")

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def merge(self, other: Report, prefix: str = "") -> None:
        for c in other.checks:
            self.add(prefix + c.name, c.value, c.threshold, c.op)
        for k, v in other.data.items():
            self.data[prefix + k] = v
        for k, v in other.fields.items():
            self.fields[prefix + k] = v

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "data": _plain(self.data),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def summary(self) -> str:
        lines = [self.title]
        for c in self.checks:
            mark = "PASS" if c.passed else "FAIL"
            if c.op == "info":
                mark = "INFO"
                lines.append(f"  [{mark}] {c.name} = {c.value:.6g}")
            else:
                lines.append(f"  [{mark}] {c.name} = {c.value:.6g} ({c.op} {c.threshold:.3g})")
        return "\n".join(lines)
