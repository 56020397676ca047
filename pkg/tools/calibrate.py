"""Freeze ratio and spanner-MST baselines into tests/data/calibration.json.

Run once; the regression tests compare later builds against these numbers.
"""
import json
import statistics
import sys
from pathlib import Path

from mpc_emst.generators import uniform
from mpc_emst.geometry import AlgorithmConfig, Quadtree, ShiftVector, normalize_aspect
from mpc_emst.oracle import exact_mst, graph_mst
from mpc_emst.pipeline import solve
from mpc_emst.spanner import build_leveled_spanner, spanner_weight_graph

N, D, SEEDS = 300, 8, range(50)
STRATEGIES = ("exact-threshold", "cell-leader", "sampled-leader")


def spanner_ratio(pts, cfg):
    norm, _ = normalize_aspect(pts, cfg)
    qt = Quadtree(norm, ShiftVector.draw(norm.d, norm.delta, cfg.seed), cfg)
    sp = build_leveled_spanner(qt)
    return graph_mst(spanner_weight_graph(sp), norm.n) / exact_mst(norm)[1]


def main(out):
    data = {"n": N, "d": D, "seeds": len(SEEDS), "strategies": {}}
    for strategy in STRATEGIES:
        ratios, sratios = [], []
        for seed in SEEDS:
            pts = uniform(N, D, seed)
            cfg = AlgorithmConfig(seed=seed, strategy=strategy).resolve(D)
            ratios.append(solve(pts, cfg).ratio)
            sratios.append(spanner_ratio(pts, cfg))
        data["strategies"][strategy] = {
            "median_ratio": statistics.median(ratios),
            "max_ratio": max(ratios),
            "max_spanner_mst_ratio": max(sratios),
        }
        print(strategy, data["strategies"][strategy], flush=True)
    Path(out).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/data/calibration.json")
