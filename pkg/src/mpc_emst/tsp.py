"""Hamiltonian cycles by shortcutting an Euler tour."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidArgument
from .euler import EulerTour
from .geometry import PointSet
from .runtime import RoundLedger


@dataclass(frozen=True)
class HamiltonianCycle:
    order: tuple
    cost: float

    def dump(self, fh) -> None:
        for v in self.order:
            fh.write(f"{v}\n")


def cycle_cost(order, points: np.ndarray) -> float:
    if len(order) < 2:
        return 0.0
    idx = np.asarray(order)
    nxt = np.roll(idx, -1)
    return float(np.linalg.norm(points[idx] - points[nxt], axis=1).sum())


def shortcut(tour: EulerTour, points: PointSet, ledger: Optional[RoundLedger] = None) -> HamiltonianCycle:
    """Keep first appearances in tour order; cost is measured on ``points``."""
    n = points.n
    if ledger is not None:
        ledger.charge("sort", 2 * len(tour), "tsp first appearances")
        ledger.charge("index_in_sets", n, "tsp order")
    if n == 1:
        return HamiltonianCycle((0,), 0.0)
    order = tuple(tour.nodes())
    if sorted(order) != list(range(n)):
        raise InvalidArgument(f"tour covers {len(order)} of {n} ids")
    return HamiltonianCycle(order, cycle_cost(order, points.points))
