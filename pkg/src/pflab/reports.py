"""Small result containers shared by the verification routines."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np


@dataclass
class BoundReport:
    """Worst observed ratio of an inequality over a batch of trials.

    ``worst_ratio`` is lhs/rhs of the inequality (so values <= 1 mean the
    inequality held).  ``expected_fail`` marks negative fixtures whose
    violation is the desired outcome.
    """

    name: str
    constant: float
    worst_ratio: float
    trials: int
    tolerance: float = 1e-12
    witness: Any = None
    expected_fail: bool = False
    detail: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return bool(np.isfinite(self.worst_ratio) and self.worst_ratio <= 1.0 + self.tolerance)

    @property
    def passed(self) -> bool:
        # a negative fixture passes when the inequality is violated
        return (not self.holds) if self.expected_fail else self.holds

    def row(self) -> tuple[str, float, float, bool]:
        return (self.name, float(self.constant), float(self.worst_ratio), self.passed)


@dataclass
class EquivalenceReport:
    """Graph or form norm equivalence constants along a truncation ladder."""

    name: str
    ladder: list
    c_lower: list
    c_upper: list
    max_step: float = 2.0
    expected_fail: bool = False
    detail: dict = field(default_factory=dict)

    @property
    def stability_ratio(self) -> float:
        worst = 1.0
        for seq in (self.c_lower, self.c_upper):
            for a, b in zip(seq[:-1], seq[1:]):
                worst = max(worst, a / b, b / a)
        return worst

    @property
    def holds(self) -> bool:
        ok = all(0 < lo <= up * (1 + 1e-9) for lo, up in zip(self.c_lower, self.c_upper))
        return ok and self.stability_ratio <= self.max_step

    @property
    def passed(self) -> bool:
        return (not self.holds) if self.expected_fail else self.holds
