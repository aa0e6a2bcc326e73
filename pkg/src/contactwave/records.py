"""Small result containers shared by several modules."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class BoundReport:
    """Named measured quantities plus the checks derived from them."""

    name: str
    values: dict[str, float] = field(default_factory=dict)
    checks: dict[str, bool] = field(default_factory=dict)

    def __getitem__(self, key: str) -> float:
        return self.values[key]

    def to_dict(self) -> dict:
        return {"name": self.name, "values": dict(self.values), "checks": dict(self.checks)}


@dataclass
class Flag:
    """One pass/fail outcome tied to a claim and its measured constant.

    ``asserted`` flags decide the CLI exit code; informational flags are
    reported only.
    """

    key: str
    anchor: str
    passed: bool
    measured: float | None
    threshold: str
    asserted: bool = True
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "key": self.key,
            "anchor": self.anchor,
            "passed": bool(self.passed),
            "measured": self.measured,
            "threshold": self.threshold,
            "asserted": self.asserted,
            "detail": self.detail,
        }

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        kind = "" if self.asserted else " (informational)"
        return f"[{status}] {self.key}{kind}: measured={self.measured!r} required {self.threshold} -- {self.anchor}"
