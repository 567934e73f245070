"""
Defines the report produced by one experiment run.

A report holds a main table (one row per replicate and parameter cell),
optional auxiliary tables, named summaries and the tolerance checks. Every
check records the tolerance it was judged against.
"""

from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any

from src.domain.models.statistics import Summary


class ToleranceKind(str, Enum):
    """How a check compares its value with its target."""
    SE_MULTIPLE = "se_multiple"
    ABSOLUTE = "absolute"
    RELATIVE = "relative"
    AT_MOST = "at_most"
    AT_LEAST = "at_least"


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    target: float
    tolerance: float
    tolerance_kind: ToleranceKind
    detail: str = ""

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.passed))
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "target", float(self.target))

    @classmethod
    def within_se(
        cls,
        name: str,
        summary: Summary,
        target: float,
        n_se: float = 4.0,
        floor: float = 0.0,
        detail: str = "",
    ) -> "CheckResult":
        """|mean − target| ≤ n_se·SE, or ≤ floor for samples without spread."""
        passed = summary.within(target, n_se) or abs(summary.mean - target) <= floor
        return cls(name, passed, summary.mean, target, n_se, ToleranceKind.SE_MULTIPLE, detail or f"se={summary.se!r}")

    @classmethod
    def estimate_within_se(cls, name: str, value: float, se: float, target: float, n_se: float = 4.0) -> "CheckResult":
        """An estimate with a known standard error against its target."""
        passed = abs(value - target) <= n_se * se
        return cls(name, passed, value, target, n_se, ToleranceKind.SE_MULTIPLE, f"se={se!r}")

    @classmethod
    def absolute(cls, name: str, value: float, target: float, tolerance: float, detail: str = "") -> "CheckResult":
        return cls(name, abs(value - target) <= tolerance, value, target, tolerance, ToleranceKind.ABSOLUTE, detail)

    @classmethod
    def relative(cls, name: str, value: float, target: float, tolerance: float, detail: str = "") -> "CheckResult":
        passed = abs(value - target) <= tolerance * abs(target)
        return cls(name, passed, value, target, tolerance, ToleranceKind.RELATIVE, detail)

    @classmethod
    def at_most(cls, name: str, value: float, bound: float, detail: str = "") -> "CheckResult":
        return cls(name, value <= bound, value, bound, bound, ToleranceKind.AT_MOST, detail)

    @classmethod
    def at_least(cls, name: str, value: float, bound: float, detail: str = "") -> "CheckResult":
        return cls(name, value >= bound, value, bound, bound, ToleranceKind.AT_LEAST, detail)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["tolerance_kind"] = self.tolerance_kind.value
        return data


@dataclass
class Table:
    """A named table with a fixed column order."""
    name: str
    columns: tuple[str, ...]
    rows: list[dict] = field(default_factory=list)

    def extend(self, rows: list[dict]) -> None:
        for row in rows:
            missing = set(self.columns) - set(row)
            if missing:
                raise ValueError(f"Row for table {self.name!r} lacks columns {sorted(missing)}.")
            self.rows.append(row)


@dataclass
class RunReport:
    """
    The outcome of one experiment run.

    Attributes:
        run_id: Identifier shared with the persisted record.
        kind: The experiment kind.
        master_seed: The seed every replicate stream derives from.
        config: Echo of the validated configuration.
        tables: The main table first, then auxiliary tables.
        summaries: Named Monte Carlo summaries.
        checks: Tolerance checks.
        diagnostics: Fragment counts, dropped mass and similar numbers.
        timing: Wall-clock seconds (JSON only, never in CSV).
        error: A resource abort carried into the report, if any.
    """
    run_id: str
    kind: str
    master_seed: int
    config: dict[str, Any]
    tables: list[Table] = field(default_factory=list)
    summaries: dict[str, Summary] = field(default_factory=dict)
    checks: list[CheckResult] = field(default_factory=list)
    diagnostics: dict[str, Any] = field(default_factory=dict)
    timing: dict[str, float] = field(default_factory=dict)
    error: dict[str, Any] | None = None

    @property
    def main_table(self) -> Table:
        return self.tables[0]

    @property
    def passed(self) -> bool:
        return self.error is None and all(check.passed for check in self.checks)

    def add_table(self, table: Table) -> Table:
        self.tables.append(table)
        return table

    def add_check(self, check: CheckResult) -> CheckResult:
        self.checks.append(check)
        return check

    def summaries_dict(self) -> dict[str, dict]:
        return {name: summary.to_dict() for name, summary in self.summaries.items()}

    def to_dict(self) -> dict:
        """Everything except the tables, for the JSON document and persistence."""
        return {
            "run_id": self.run_id,
            "kind": self.kind,
            "master_seed": self.master_seed,
            "passed": self.passed,
            "config": self.config,
            "summaries": self.summaries_dict(),
            "checks": [check.to_dict() for check in self.checks],
            "diagnostics": self.diagnostics,
            "timing": self.timing,
            "error": self.error,
        }

