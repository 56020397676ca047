"""Desk-scale MPC simulator for approximate Euclidean MST and TSP."""
from .errors import ConsistencyError, InvalidArgument
from .euler import (ClusterTree, EulerTour, dfs_euler_tour, euler_tour_join,
                    euler_tour_via_hierarchy, validate_tour)
from .geometry import (AlgorithmConfig, PointSet, Quadtree, ShiftVector, jl_project,
                       normalize_aspect, read_points, theory_check, write_points)
from .oracle import component_sum, exact_mst, graph_mst, threshold_components
from .partitions import (Partition, PartitionHierarchy, SpanningTree, leader_compression_round,
                         run_pipeline)
from .pipeline import RunResult, rounds_formula, solve
from .runtime import CostTable, RoundLedger
from .spanner import LeveledSpanner, build_leveled_spanner, build_spanner_level
from .tsp import HamiltonianCycle, shortcut

__version__ = "0.1.0"
