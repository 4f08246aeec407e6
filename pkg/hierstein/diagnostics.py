# hierstein/diagnostics.py
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str = ""
    warn: bool = False


@dataclass
class DiagnosticsReport:
    checks: List[CheckResult] = field(default_factory=list)
    summary: str = ""

    @classmethod
    def from_checks(cls, title: str, checks: Iterable[CheckResult]) -> "DiagnosticsReport":
        checks = list(checks)
        failed = [c for c in checks if not c.ok and not c.warn]
        warned = [c for c in checks if c.warn]
        summary = f"{title}: {len(checks) - len(failed)}/{len(checks)} passed"
        if warned:
            summary += f", {len(warned)} warning(s)"
        return cls(checks, summary)

    @property
    def ok(self) -> bool:
        return all(c.ok or c.warn for c in self.checks)

    def as_text(self) -> str:
        lines = ["Hypothesis checks", "=================", ""]
        for c in self.checks:
            mark = "ok  " if c.ok else ("warn" if c.warn else "FAIL")
            lines.append(f"[{mark}] {c.name}")
            if c.detail:
                lines.append(f"       {c.detail}")
        lines.append("")
        lines.append(f"Summary: {self.summary}")
        return "\n".join(lines)
