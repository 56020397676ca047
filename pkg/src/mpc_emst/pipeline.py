"""End-to-end run: preprocessing, hierarchy, tree, Euler tour and cycle."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

from .errors import ConsistencyError
from .euler import (EulerTour, HierarchyTourReport, join_rounds, low_diameter_rounds,
                    euler_tour_via_hierarchy, validate_tour)
from .geometry import (AlgorithmConfig, PointSet, ScaleRecord, delta_for, hierarchy_height,
                       jl_project, normalize_aspect)
from .oracle import exact_mst
from .partitions import PartitionHierarchy, SpanningTree, run_pipeline
from .runtime import CostTable, RoundLedger
from .tsp import HamiltonianCycle, shortcut

log = logging.getLogger(__name__)


@dataclass
class RunResult:
    config: AlgorithmConfig
    points: PointSet
    normalized: PointSet
    scale: ScaleRecord
    hierarchy: PartitionHierarchy
    tree: SpanningTree
    tour: EulerTour
    tour_report: HierarchyTourReport
    cycle: HamiltonianCycle
    ledger: RoundLedger
    exact_mst_cost: Optional[float] = None

    @property
    def ratio(self) -> Optional[float]:
        if self.exact_mst_cost is None:
            return None
        if self.exact_mst_cost == 0.0:
            return 1.0
        return self.tree.cost / self.exact_mst_cost

    def report(self) -> dict:
        out = {
            "n": self.points.n,
            "d": self.points.d,
            "config": self.config.as_dict(),
            "tree_cost": self.tree.cost,
            "exact_mst_cost": self.exact_mst_cost,
            "ratio": self.ratio,
            "cycle_cost": self.cycle.cost,
            "ledger": self.ledger.to_json(),
            "per_level_component_counts": {str(t): c for t, c in
                                           self.hierarchy.component_counts().items()},
        }
        if self.config.strict_memory:
            out["strict_memory_violations"] = list(self.ledger.violations)
        return out


def solve(points: PointSet, config: AlgorithmConfig, oracle: bool = True,
          table: Optional[CostTable] = None) -> RunResult:
    """Run the whole pipeline on raw points."""
    s = config.machine_memory_s if config.strict_memory else None
    ledger = RoundLedger(table=table or CostTable(), machine_memory_s=s)
    work = points
    if config.jl_dim:
        ledger.charge("dim_reduce", points.n * points.d, "jl", record_words=points.d)
        work = jl_project(points, config.jl_dim, config.seed)
    cfg = config.resolve(work.d)
    ledger.charge("sort", work.n * work.d, "normalize", record_words=work.d)
    ledger.charge("broadcast", work.d, "normalize scale")
    normalized, rec = normalize_aspect(work, cfg)
    ledger.charge("broadcast", work.d, "shift vector")

    hierarchy, tree, _ = run_pipeline(normalized, cfg, ledger=ledger, weight_points=points)
    tour, rep = euler_tour_via_hierarchy(hierarchy.leader_maps(), hierarchy.edge_sets(),
                                         ledger=ledger, h=cfg.h)
    check = validate_tour(tour, tree.edges, range(points.n))
    if not check.ok:
        raise ConsistencyError(f"Euler tour invalid: {check.problems[0]}", "euler")
    cycle = shortcut(tour, points, ledger)

    exact = None
    if oracle:
        if points.n <= cfg.oracle_cap:
            exact = exact_mst(points, cap=cfg.oracle_cap)[1]
        else:
            log.warning("oracle skipped: n=%d above cap %d", points.n, cfg.oracle_cap)
    return RunResult(cfg, points, normalized, rec, hierarchy, tree, tour, rep, cycle,
                     ledger, exact)


def rounds_formula(config: AlgorithmConfig, n: int, d: int,
                   table: Optional[CostTable] = None) -> dict:
    """Closed-form round count of :func:`solve`, split by stage.

    ``d`` is the dimension the pipeline works in (after any projection).
    Only the Euler join term depends on ``n``, through the number of levels.
    """
    c = (table or CostTable()).cost
    cfg = config.resolve(d)
    h, A = cfg.h, cfg.alpha_exp
    lc = h * c("leader_compression_round")
    H = hierarchy_height(d, delta_for(n), A)
    L = H * A + 1
    R = max(L - 1, 0).bit_length()
    terms = {
        "preprocessing": (c("dim_reduce") if cfg.jl_dim else 0) + c("sort") + 2 * c("broadcast"),
        "spanner": 2 * c("duplicate") + c("sort") + c("predecessor") + c("twohop_spanner") + c("sort"),
        "part1": c("sort") + lc + 2 * c("pram") + c("sort") + c("pram"),
        "part2": cfg.g * (lc + 4 * c("pram") + c("sort")),
        "part3": lc + c("sort") + c("index_in_sets"),
        "euler_base": low_diameter_rounds(h) * c("euler_tour_low_diameter"),
        "euler_join": R * (c("pram") + join_rounds(table)),
        "tsp": c("sort") + c("index_in_sets"),
    }
    terms["total"] = sum(terms.values())
    terms["levels"] = L
    terms["join_iterations"] = R
    return terms
