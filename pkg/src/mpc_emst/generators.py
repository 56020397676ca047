"""Synthetic point sets."""
from __future__ import annotations

import math

import numpy as np

from .errors import InvalidArgument
from .geometry import PointSet

KINDS = ("uniform", "gaussian-clusters", "parallel-paths")


def uniform(n: int, d: int, seed: int) -> PointSet:
    """``n`` points uniform in the unit cube."""
    return PointSet(np.random.default_rng([seed, 101]).random((n, d)))


def gaussian_clusters(n: int, d: int, seed: int, clusters: int = 5,
                      sigma: float = 0.02) -> PointSet:
    """``n`` points around ``clusters`` uniform centres."""
    rng = np.random.default_rng([seed, 102])
    centres = rng.random((clusters, d))
    pick = rng.integers(0, clusters, size=n)
    return PointSet(centres[pick] + sigma * rng.standard_normal((n, d)))


def parallel_paths(k: int, length: int, d: int, alpha: float = 16.0) -> PointSet:
    """``k+1`` unit-spaced paths along the first axis.

    Copy ``j`` is the base path shifted by ``alpha/sqrt(2)`` along axis ``j``
    so every shift is orthogonal to the paths. Needs ``d >= k+1``.
    """
    if k < 0 or length < 1:
        raise InvalidArgument("parallel-paths needs k >= 0 and length >= 1")
    if d < k + 1:
        raise InvalidArgument(f"parallel-paths with k={k} needs d >= {k + 1}")
    base = np.zeros((length, d))
    base[:, 0] = np.arange(length, dtype=np.float64)
    out = [base]
    for j in range(1, k + 1):
        c = base.copy()
        c[:, j] += alpha / math.sqrt(2.0)
        out.append(c)
    return PointSet(np.vstack(out))


def generate(kind: str, n: int, d: int, seed: int, k: int = 3, length: int = None,
             alpha: float = 16.0) -> PointSet:
    if n < 1 or d < 1:
        raise InvalidArgument("n and d must be >= 1")
    if kind == "uniform":
        return uniform(n, d, seed)
    if kind == "gaussian-clusters":
        return gaussian_clusters(n, d, seed)
    if kind == "parallel-paths":
        if length is None:
            length = max(1, n // (k + 1))
        return parallel_paths(k, length, d, alpha)
    raise InvalidArgument(f"unknown generator kind {kind!r}")
