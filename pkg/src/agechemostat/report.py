"""Small pass/fail report containers shared by the validation helpers."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: Any = None
    detail: str = ""


@dataclass
class Report:
    """An ordered list of named checks plus free-form numeric entries."""

    title: str
    checks: list[Check] = field(default_factory=list)
    values: dict[str, Any] = field(default_factory=dict)

    def add(self, name, passed, value=None, detail=""):
        self.checks.append(Check(name, bool(passed), value, detail))
        return self

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_text(self) -> str:
        lines = [f"== {self.title}: {'PASS' if self.passed else 'FAIL'} =="]
        for c in self.checks:
            tag = "PASS" if c.passed else "FAIL"
            extra = f" value={_fmt(c.value)}" if c.value is not None else ""
            det = f" ({c.detail})" if c.detail else ""
            lines.append(f"[{tag}] {c.name}{extra}{det}")
        for k, v in self.values.items():
            lines.append(f"  {k} = {_fmt(v)}")
        return "\n".join(lines)

    def to_keyvalue(self, prefix: str = "") -> str:
        """``key = value`` lines; floats carry 17 significant digits."""
        lines = [f"{prefix}passed = {int(self.passed)}"]
        for c in self.checks:
            key = _key(c.name)
            lines.append(f"{prefix}{key}.passed = {int(c.passed)}")
            if c.value is not None:
                lines.append(f"{prefix}{key}.value = {_fmt(c.value)}")
        for k, v in self.values.items():
            lines.append(f"{prefix}{_key(k)} = {_fmt(v)}")
        return "\n".join(lines)

    def __str__(self):
        return self.to_text()


def _key(name: str) -> str:
    out = "".join(ch if ch.isalnum() or ch in "._-" else "_" for ch in name)
    return out.strip("_").lower()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)
