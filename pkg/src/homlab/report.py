"""Check results shared by the sampling routines and the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field

OK = "ok"
VIOLATION = "violation"
INCONCLUSIVE = "inconclusive"


@dataclass
class Check:
    name: str
    params: dict
    status: str = OK
    witness: object = None
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == OK

    def to_json(self) -> dict:
        out = {"name": self.name, "params": self.params, "status": self.status,
               "stats": self.stats}
        if self.witness is not None:
            out["witness"] = self.witness
        return out


def worst(statuses) -> str:
    statuses = list(statuses)
    if VIOLATION in statuses:
        return VIOLATION
    if INCONCLUSIVE in statuses:
        return INCONCLUSIVE
    return OK


def tally(violations: int, inconclusive: int) -> str:
    if violations:
        return VIOLATION
    return INCONCLUSIVE if inconclusive else OK
