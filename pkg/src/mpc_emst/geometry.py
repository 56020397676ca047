"""Point sets, preprocessing and the randomly shifted quadtree.

Grid levels are real side lengths. Checkpoint levels ``t`` are powers of two
and are mostly handled through their base-2 exponent so that level
arithmetic stays exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from .errors import InvalidArgument

STRATEGIES = ("exact-threshold", "cell-leader", "sampled-leader")


@dataclass(frozen=True)
class PointSet:
    """``n`` points in ``d`` dimensions; point ``i`` has id ``i``."""

    points: np.ndarray
    delta: Optional[float] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2:
            raise InvalidArgument("points must be a 2-d array")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def ids(self) -> np.ndarray:
        return np.arange(self.n)

    def dist(self, u: int, v: int) -> float:
        return float(np.linalg.norm(self.points[u] - self.points[v]))

    def edge_lengths(self, edges) -> np.ndarray:
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if len(e) == 0:
            return np.zeros(0)
        return np.linalg.norm(self.points[e[:, 0]] - self.points[e[:, 1]], axis=1)


@dataclass(frozen=True)
class ShiftVector:
    a: np.ndarray
    seed: int = 0

    @classmethod
    def draw(cls, d: int, delta: float, seed: int) -> "ShiftVector":
        rng = np.random.default_rng([seed, 0x5817])
        return cls(a=rng.uniform(0.0, delta, size=d), seed=seed)

    @classmethod
    def zero(cls, d: int) -> "ShiftVector":
        return cls(a=np.zeros(d), seed=0)


class GridCellId(NamedTuple):
    level: float
    coords: tuple


@dataclass(frozen=True)
class AlgorithmConfig:
    """Tunable parameters of the pipeline.

    ``beta=None`` resolves to ``max(2*sqrt(d), 8)`` once the dimension is
    known (see :meth:`resolve`).
    """

    alpha: int = 16
    beta: Optional[float] = None
    h: int = 6
    epsilon: float = 0.5
    seed: int = 0
    strategy: str = "cell-leader"
    strict_memory: bool = False
    machine_memory_s: Optional[int] = None
    jl_dim: Optional[int] = None
    oracle_cap: int = 5000

    def __post_init__(self):
        a = int(self.alpha)
        if a < 2 or a & (a - 1):
            raise InvalidArgument(f"alpha must be 2^(2^g), got {self.alpha}")
        e = a.bit_length() - 1
        if e & (e - 1):
            raise InvalidArgument(f"alpha must be 2^(2^g), got {self.alpha}")
        if self.h < 1:
            raise InvalidArgument("h must be >= 1")
        if not 0.0 < self.epsilon < 1.0:
            raise InvalidArgument("epsilon must lie in (0, 1)")
        if self.strategy not in STRATEGIES:
            raise InvalidArgument(f"unknown spanner strategy {self.strategy!r}")
        if self.strict_memory and not self.machine_memory_s:
            raise InvalidArgument("strict_memory requires machine_memory_s")

    @property
    def alpha_exp(self) -> int:
        """log2(alpha)."""
        return int(self.alpha).bit_length() - 1

    @property
    def g(self) -> int:
        return self.alpha_exp.bit_length() - 1

    def resolve(self, d: int) -> "AlgorithmConfig":
        beta = self.beta if self.beta is not None else max(2.0 * math.sqrt(d), 8.0)
        if beta <= math.sqrt(d):
            raise InvalidArgument(f"beta={beta} must exceed sqrt(d)={math.sqrt(d):.3f}")
        return replace(self, beta=float(beta))

    def stretch_bound(self) -> float:
        return stretch_bound(self.strategy, self.epsilon)

    def snap_level(self) -> float:
        """Snapping grid side: the smallest power of 2 above the stretch bound.

        Distinct snapped points are then farther apart than any level-1
        spanner edge can reach, so the finest partition is all singletons.
        """
        return float(2 ** (math.floor(math.log2(self.stretch_bound())) + 1))

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha, "beta": self.beta, "h": self.h,
            "epsilon": self.epsilon, "seed": self.seed, "strategy": self.strategy,
            "strict_memory": self.strict_memory,
            "machine_memory_s": self.machine_memory_s, "jl_dim": self.jl_dim,
        }


def stretch_bound(strategy: str, epsilon: float) -> float:
    if strategy == "exact-threshold":
        return 1.0
    if strategy == "cell-leader":
        return 2.0
    if strategy == "sampled-leader":
        return 1.0 + 1.0 / epsilon
    raise InvalidArgument(f"unknown spanner strategy {strategy!r}")


def theory_check(config: AlgorithmConfig, n: int, d: int) -> dict:
    """Which of the asymptotic parameter inequalities hold at this size.

    Reported, never enforced. ``log n`` is taken base 2 with constant C=1.
    """
    cfg = config.resolve(d)
    logn = math.log2(max(n, 2))
    a, b = float(cfg.alpha), float(cfg.beta)
    return {
        "beta_gt_sqrt_d": b > math.sqrt(d),
        "beta_ge_log_n": b >= logn,
        "alpha_over_beta_ge_log_n": a / b >= logn,
        "alpha_ge_sqrt_d_beta_log_n": a >= math.sqrt(d) * b * logn,
    }


# --- preprocessing ----------------------------------------------------------

def jl_project(points: PointSet, target_dim: int, seed: int) -> PointSet:
    """Seeded Gaussian random projection scaled by 1/sqrt(target_dim)."""
    if target_dim <= 0:
        raise InvalidArgument("target_dim must be positive")
    if points.n == 0:
        raise InvalidArgument("empty point set")
    rng = np.random.default_rng([seed, 0x4A4C])
    g = rng.standard_normal((points.d, target_dim)) / math.sqrt(target_dim)
    return PointSet(points.points @ g)


def delta_for(n: int) -> float:
    """Smallest power of two >= 4 n^2 / log2 n."""
    if n < 2:
        return 1.0
    target = 4.0 * n * n / math.log2(n)
    return float(2 ** math.ceil(math.log2(target)))


@dataclass(frozen=True)
class ScaleRecord:
    offset: np.ndarray
    scale: float
    snap_level: float
    delta: float
    degenerate: bool = False

    def to_original(self, length):
        if self.degenerate:
            return 0.0 * np.asarray(length)
        return np.asarray(length) / self.scale


def snap(x: np.ndarray, level: float) -> np.ndarray:
    """Round to the nearest multiple of ``level``; ties go toward -inf."""
    return level * np.ceil(x / level - 0.5)


def normalize_aspect(points: PointSet, config: AlgorithmConfig):
    """Shift to the origin, scale the max coordinate to Delta, snap.

    Returns ``(PointSet, ScaleRecord)``. When all points coincide the record
    is flagged degenerate and the points are returned at the origin.
    """
    if points.n == 0:
        raise InvalidArgument("empty point set")
    x = points.points
    lo = x.min(axis=0)
    shifted = x - lo
    top = float(shifted.max())
    s = config.snap_level()
    delta = delta_for(points.n)
    if top == 0.0:
        rec = ScaleRecord(offset=lo, scale=1.0, snap_level=s, delta=delta, degenerate=True)
        return PointSet(np.zeros_like(x), delta=delta), rec
    scale = delta / top
    snapped = snap(shifted * scale, s)
    return PointSet(snapped, delta=delta), ScaleRecord(lo, scale, s, delta)


# --- quadtree ---------------------------------------------------------------

def hierarchy_height(d: int, delta: float, alpha_exp: int) -> int:
    """Smallest H >= 1 with alpha^H >= sqrt(d) * delta."""
    bound = math.sqrt(d) * delta
    return max(1, math.ceil(math.log2(bound) / alpha_exp - 1e-12))


def cell_of(point, level: float, shift: ShiftVector) -> GridCellId:
    if level <= 0:
        raise InvalidArgument("level must be positive")
    x = np.asarray(point, dtype=np.float64)
    coords = np.floor((x + shift.a) / level).astype(np.int64)
    return GridCellId(level, tuple(int(c) for c in coords))


def cell_labels(points: np.ndarray, level: float, shift: ShiftVector) -> np.ndarray:
    """Dense integer label per point; equal labels iff same grid cell."""
    coords = np.floor((points + shift.a) / level).astype(np.int64)
    _, inv = np.unique(coords, axis=0, return_inverse=True)
    return inv.reshape(-1)


@dataclass
class Quadtree:
    """Randomly shifted grids over a normalized point set.

    Levels in the hierarchy are ``t = 2**e`` for ``e = 0 .. top_exp`` where
    ``alpha**H`` is the first power of alpha covering the diameter bound
    ``sqrt(d) * Delta``.
    """

    points: PointSet
    shift: ShiftVector
    config: AlgorithmConfig
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def H(self) -> int:
        return hierarchy_height(self.points.d, float(self.points.delta), self.config.alpha_exp)

    @property
    def top_exp(self) -> int:
        return self.H * self.config.alpha_exp

    def level_exps(self) -> list:
        return list(range(self.top_exp + 1))

    def k_for(self, e: int) -> int:
        """The k with alpha^(k-1) < 2^e <= alpha^k."""
        return -(-e // self.config.alpha_exp)

    def labels_exp(self, e: int) -> np.ndarray:
        """Cell labels at level ``2**e / beta``.

        Coordinates come from one pre-scaled array divided by powers of two,
        so levels nest exactly in floating point.
        """
        if e not in self._cache:
            if "u" not in self._cache:
                self._cache["u"] = (self.points.points + self.shift.a) * self.config.beta
            coords = np.floor(np.ldexp(self._cache["u"], -e)).astype(np.int64)
            _, inv = np.unique(coords, axis=0, return_inverse=True)
            self._cache[e] = inv.reshape(-1)
        return self._cache[e]

    def big_level(self, k: int) -> float:
        return float(self.config.alpha) ** (k + 1) / self.config.beta

    def big_cell_labels(self, e: int) -> np.ndarray:
        """Cells at level alpha^(k+1)/beta that confine the level-2^e spanner.

        For k >= H the single cell holding all of X is used.
        """
        k = self.k_for(e)
        if k >= self.H:
            return np.zeros(self.points.n, dtype=np.int64)
        return self.labels_exp((k + 1) * self.config.alpha_exp)

    def checkpoint_cell_labels(self, k: int) -> np.ndarray:
        """Cells at level alpha^k / beta used to seed the checkpoint partition."""
        return self.labels_exp(k * self.config.alpha_exp)


# --- point files ------------------------------------------------------------

def read_points(path) -> PointSet:
    rows = []
    dim = None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("dim="):
                    dim = int(body[4:])
                continue
            rows.append([float(v) for v in line.split()])
    if not rows:
        raise InvalidArgument(f"no points in {path}")
    widths = {len(r) for r in rows}
    if len(widths) != 1 or (dim is not None and widths != {dim}):
        raise InvalidArgument(f"inconsistent point dimension in {path}")
    return PointSet(np.array(rows, dtype=np.float64))


def write_points(points: PointSet, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# dim={points.d}\n")
        for row in points.points:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")
