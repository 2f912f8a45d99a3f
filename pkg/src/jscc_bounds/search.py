"""Derivative-free compass (pattern) search with step halving."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class SearchResult:
    x: np.ndarray
    value: float
    evaluations: int
    final_step: float


def pattern_search(f: Callable[[np.ndarray], float], x0, step: float | np.ndarray,
                   lower=None, upper=None, max_evals: int = 1000,
                   min_step: float = 1e-7, active=None) -> SearchResult:
    """Minimise ``f`` by polling ``x +- step * e_i`` along each active coordinate.

    Moves are accepted greedily; when a full sweep yields no improvement all
    steps are halved. Points are clipped to ``[lower, upper]``. Coordinates
    whose value is infinite (or masked out by ``active``) are never moved.
    """
    x = np.array(x0, dtype=float)
    n = x.size
    steps = np.broadcast_to(np.asarray(step, dtype=float), (n,)).copy()
    lo = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    hi = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
    mask = np.ones(n, bool) if active is None else np.asarray(active, bool).copy()
    mask &= np.isfinite(x)
    x = np.where(np.isfinite(x), np.clip(x, lo, hi), x)

    fx = f(x)
    evals = 1
    coords = np.flatnonzero(mask)
    if coords.size == 0:
        return SearchResult(x, fx, evals, 0.0)
    while evals < max_evals and np.max(steps[coords]) >= min_step:
        improved = False
        for i in coords:
            for sign in (1.0, -1.0):
                if evals >= max_evals:
                    break
                trial = x.copy()
                trial[i] = min(hi[i], max(lo[i], x[i] + sign * steps[i]))
                if trial[i] == x[i]:
                    continue
                ft = f(trial)
                evals += 1
                if ft < fx:
                    x, fx = trial, ft
                    improved = True
                    break
        if not improved:
            steps[coords] *= 0.5
    return SearchResult(x, fx, evals, float(np.max(steps[coords])))


@dataclass(frozen=True)
class Objective:
    """Scalarisation of a distortion pair.

    ``kind="max"`` minimises ``max(d1, d2)`` (the symmetric figure of merit),
    ``"weighted"`` minimises ``d1 + weight * d2`` and ``"target"`` minimises
    ``max(d1 - targets[0], d2 - targets[1])`` so that a non-positive value
    means both targets are met.
    """

    kind: str = "max"
    weight: float = 1.0
    targets: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("max", "weighted", "target"):
            raise ValueError(f"unknown objective kind {self.kind!r}")

    def __call__(self, d1: float, d2: float) -> float:
        if self.kind == "max":
            return max(d1, d2)
        if self.kind == "weighted":
            return d1 + self.weight * d2
        return max(d1 - self.targets[0], d2 - self.targets[1])
