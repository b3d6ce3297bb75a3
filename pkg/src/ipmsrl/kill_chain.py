"""Per-node attack ladder: twelve ordered stages plus severity banding.

Stage 0 is clean; stages 1..12 follow the MITRE ATT&CK ICS tactic order.
Severity bands drive action delays and action-score penalties.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

MAX_STAGE = 12

STAGE_NAMES = (
    "Clean",
    "Initial Access",
    "Execution",
    "Persistence",
    "Privilege Escalation",
    "Evasion",
    "Discovery",
    "Lateral Movement",
    "Collection",
    "Command and Control",
    "Inhibit Response Function",
    "Impair Process Control",
    "Impact",
)

DEFAULT_LATERAL_GATE_STAGE = 7


class SeverityBand(str, Enum):
    NONE = "none"
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


_BAND_ORDER = {
    SeverityBand.NONE: 0,
    SeverityBand.LOW: 1,
    SeverityBand.MEDIUM: 2,
    SeverityBand.HIGH: 3,
}


def band_rank(band: SeverityBand) -> int:
    return _BAND_ORDER[band]


@dataclass(frozen=True)
class SeverityBands:
    """Contiguous partition of stages 1..MAX_STAGE into low/medium/high."""

    low: tuple[int, int] = (1, 4)
    medium: tuple[int, int] = (5, 8)
    high: tuple[int, int] = (9, 12)

    def validate(self) -> None:
        lo, med, hi = self.low, self.medium, self.high
        if not (lo[0] == 1 and lo[1] + 1 == med[0] and med[1] + 1 == hi[0] and hi[1] == MAX_STAGE):
            raise ValueError(
                "severity_bands must partition stages 1..%d contiguously, got %s/%s/%s"
                % (MAX_STAGE, lo, med, hi)
            )
        for a, b in (lo, med, hi):
            if a > b:
                raise ValueError("severity band bounds out of order: (%d, %d)" % (a, b))

    def band(self, stage: int) -> SeverityBand:
        if stage == 0:
            return SeverityBand.NONE
        if self.low[0] <= stage <= self.low[1]:
            return SeverityBand.LOW
        if self.medium[0] <= stage <= self.medium[1]:
            return SeverityBand.MEDIUM
        if self.high[0] <= stage <= self.high[1]:
            return SeverityBand.HIGH
        raise ValueError("stage out of range: %d" % stage)


DEFAULT_BANDS = SeverityBands()


def advance(stage: int) -> int:
    """Move an infected node one stage up the ladder.

    Callers gate on eligibility; advancing a clean node or one already
    at the ceiling is a contract violation.
    """
    if not 1 <= stage <= MAX_STAGE - 1:
        raise ValueError("cannot advance stage %d" % stage)
    return stage + 1


def can_move_laterally(stage: int, gate: int = DEFAULT_LATERAL_GATE_STAGE) -> bool:
    """True once the node's infection has reached the lateral-movement tactic."""
    return stage >= gate


def severity(stage: int, bands: SeverityBands = DEFAULT_BANDS) -> SeverityBand:
    return bands.band(stage)
