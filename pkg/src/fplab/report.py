"""Record type produced by every inequality verification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict

__all__ = ["InequalityReport"]


@dataclass(frozen=True)
class InequalityReport:
    """Outcome of checking lhs <= rhs for one inequality on one function.

    ``holds`` allows a relative slack on the right side (quadrature noise);
    ``regime`` tags the validity region, e.g. whether a radius optimization
    stayed interior.  ``constants_used`` carries the constants entering the
    right side plus any companion quantities (constrained variants, alternate
    left sides).
    """

    name: str
    lhs: float
    rhs: float
    regime: str = ""
    constants_used: Dict[str, float] = field(default_factory=dict)
    slack: float = 1e-10

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1.0 + self.slack) + 1e-300

    @property
    def ratio(self) -> float:
        if self.rhs > 0.0:
            return self.lhs / self.rhs
        if self.lhs > 0.0:
            return math.inf
        return 0.0
