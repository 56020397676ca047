"""Superstep cost accounting for the MPC simulation.

Work is executed locally; what is simulated is the bill. Every bulk step
charges one named primitive with a fixed round cost, sequential steps add
and parallel stages contribute the maximum of their sub-ledgers.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import InvalidArgument

DEFAULT_COSTS = {
    "sort": 1,
    "pram": 1,
    "broadcast": 1,
    "duplicate": 1,
    "dim_reduce": 1,
    "twohop_spanner": 1,
    "predecessor": 1,
    "index_in_sets": 1,
    "prefix_sum": 1,
    "sequence_insert": 1,
    "euler_tour_low_diameter": 1,
    "leader_compression_round": 3,
}


@dataclass(frozen=True)
class CostTable:
    costs: dict = field(default_factory=lambda: dict(DEFAULT_COSTS))

    def __post_init__(self):
        bad = [k for k, v in self.costs.items() if int(v) < 1]
        if bad:
            raise InvalidArgument(f"primitive costs must be >= 1: {bad}")

    def cost(self, name: str) -> int:
        try:
            return int(self.costs[name])
        except KeyError:
            raise InvalidArgument(f"unknown primitive {name!r}") from None

    def with_overrides(self, **overrides) -> "CostTable":
        merged = dict(self.costs)
        merged.update(overrides)
        return CostTable(merged)


@dataclass(frozen=True)
class StrictReport:
    ok: bool
    machines: int
    stage: str
    message: str = ""


def strict_partition_check(data_size_words: int, machine_memory_s: int,
                           record_words: int = 1, stage: str = "") -> StrictReport:
    """Check that an operand fits on ``ceil(total/s)`` machines of ``s`` words."""
    if machine_memory_s is None or machine_memory_s < 1:
        raise InvalidArgument("machine memory must be a positive word count")
    s = int(machine_memory_s)
    machines = max(1, math.ceil(data_size_words / s))
    if record_words > s:
        return StrictReport(False, machines, stage,
                            f"{stage}: record of {record_words} words exceeds s={s}")
    return StrictReport(True, machines, stage)


@dataclass
class RoundLedger:
    """Accumulated rounds and space of a simulated run.

    ``per_primitive`` counts the charges on the critical path, so that
    ``rounds == sum(count * cost)`` always holds; ``invocations`` counts all
    charges including those hidden under a parallel maximum.
    """

    table: CostTable = field(default_factory=CostTable)
    machine_memory_s: Optional[int] = None
    rounds: int = 0
    total_space_words: int = 0
    peak_machine_words: int = 0
    per_primitive: Counter = field(default_factory=Counter)
    invocations: Counter = field(default_factory=Counter)
    violations: list = field(default_factory=list)

    def child(self) -> "RoundLedger":
        return RoundLedger(table=self.table, machine_memory_s=self.machine_memory_s)

    def charge(self, name: str, data_size_words: int = 0, stage: str = "",
               record_words: int = 1, times: int = 1) -> "RoundLedger":
        cost = self.table.cost(name)
        words = int(data_size_words)
        for _ in range(times):
            self.rounds += cost
            self.per_primitive[name] += 1
            self.invocations[name] += 1
        self.total_space_words = max(self.total_space_words, words)
        if self.machine_memory_s:
            rep = strict_partition_check(words, self.machine_memory_s, record_words,
                                         stage or name)
            if not rep.ok:
                self.violations.append(rep.message)
            per_machine = min(words, self.machine_memory_s)
        else:
            per_machine = words
        self.peak_machine_words = max(self.peak_machine_words, per_machine)
        return self

    def parallel_group(self, subs: Iterable["RoundLedger"]) -> "RoundLedger":
        subs = list(subs)
        if not subs:
            return self
        crit = max(subs, key=lambda s: s.rounds)  # first maximal one wins ties
        self.rounds += crit.rounds
        self.per_primitive.update(crit.per_primitive)
        for s in subs:
            self.invocations.update(s.invocations)
            self.violations.extend(s.violations)
        self.total_space_words = max(self.total_space_words,
                                     sum(s.total_space_words for s in subs))
        self.peak_machine_words = max([self.peak_machine_words]
                                      + [s.peak_machine_words for s in subs])
        return self

    def extend(self, other: "RoundLedger") -> "RoundLedger":
        """Sequential composition."""
        return self.parallel_group([other])

    def to_json(self) -> dict:
        return {
            "rounds": self.rounds,
            "total_space_words": self.total_space_words,
            "peak_machine_words": self.peak_machine_words,
            "per_primitive": dict(sorted(self.per_primitive.items())),
        }
