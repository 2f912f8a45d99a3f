"""Finite joint distributions over named coordinates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError

SUM_TOL = 1e-12


@dataclass(frozen=True)
class JointPmf:
    """Probability table with one named axis per coordinate.

    ``alphabets[i]`` lists the symbols of axis ``i`` as strings; numeric
    symbols (``"0"``, ``"-1.5"``) double as real values when a measure
    needs them.
    """

    names: tuple[str, ...]
    alphabets: tuple[tuple[str, ...], ...]
    table: np.ndarray

    def __post_init__(self):
        names = tuple(self.names)
        alphabets = tuple(tuple(str(s) for s in a) for a in self.alphabets)
        table = np.array(self.table, dtype=float)
        if len(set(names)) != len(names):
            raise ValidationError("coordinate names must be unique")
        if len(alphabets) != len(names) or table.ndim != len(names):
            raise ValidationError("one alphabet and one table axis per name")
        if table.shape != tuple(len(a) for a in alphabets):
            raise ValidationError(f"table shape {table.shape} does not match alphabets")
        if not np.all(np.isfinite(table)) or np.any(table < 0):
            raise ValidationError("masses must be finite and non-negative")
        if abs(table.sum() - 1.0) > SUM_TOL:
            raise ValidationError(f"masses sum to {table.sum()!r}, not 1")
        table.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "alphabets", alphabets)
        object.__setattr__(self, "table", table)

    @classmethod
    def from_array(cls, table, names: Sequence[str], alphabets=None) -> JointPmf:
        table = np.asarray(table, dtype=float)
        if alphabets is None:
            alphabets = [[str(i) for i in range(n)] for n in table.shape]
        return cls(tuple(names), tuple(tuple(a) for a in alphabets), table)

    def axes(self, labels: Sequence[str]) -> tuple[int, ...]:
        try:
            return tuple(self.names.index(lab) for lab in labels)
        except ValueError:
            raise KeyError(f"unknown coordinate among {list(labels)!r}") from None

    def marginal(self, labels: Sequence[str]) -> JointPmf:
        keep = self.axes(labels)
        drop = tuple(i for i in range(len(self.names)) if i not in keep)
        arr = self.table.sum(axis=drop)
        # summed axes come out in original order; reorder to ``labels``
        order = sorted(keep)
        arr = np.transpose(arr, [order.index(k) for k in keep])
        return JointPmf(tuple(labels), tuple(self.alphabets[k] for k in keep), arr)

    def values(self, label: str) -> np.ndarray:
        """Real values of a coordinate's symbols (falls back to indices)."""
        alph = self.alphabets[self.axes([label])[0]]
        try:
            return np.array([float(s) for s in alph])
        except ValueError:
            return np.arange(len(alph), dtype=float)

    def entropy(self, labels: Sequence[str]) -> float:
        return entropy_of(self.table, self.axes(labels))

    def mutual_information(self, a: Sequence[str], b: Sequence[str],
                           given: Sequence[str] = ()) -> float:
        """``I(A; B | C)`` in nats; ``A`` and ``B`` may overlap (``I(A; A) = H(A)``)."""
        if (set(a) | set(b)) & set(given):
            raise ValueError("conditioning labels must be disjoint from both sides")
        return mutual_information_of(self.table, self.axes(a), self.axes(b), self.axes(given))

    def to_dict(self) -> dict:
        return {"names": list(self.names), "alphabets": [list(a) for a in self.alphabets],
                "table": self.table.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> JointPmf:
        try:
            table = np.array(data["table"], dtype=float)
            alphabets = data.get("alphabets") or [[str(i) for i in range(k)] for k in table.shape]
            names = data.get("names") or [f"W{i + 1}" for i in range(len(alphabets))]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed pmf: {exc}") from None
        return cls(tuple(names), tuple(tuple(a) for a in alphabets), table)


def entropy_of(table: np.ndarray, axes: Sequence[int]) -> float:
    """Entropy (nats) of the marginal of ``table`` on ``axes``; batch axes not supported."""
    axes = tuple(axes)
    drop = tuple(i for i in range(table.ndim) if i not in axes)
    p = table.sum(axis=drop).ravel() if drop else table.ravel()
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def mutual_information_of(table: np.ndarray, a: Sequence[int], b: Sequence[int],
                          c: Sequence[int] = ()) -> float:
    """``I(A; B | C)`` in nats from entropies of marginals."""
    a, b, c = tuple(a), tuple(b), tuple(c)
    value = (entropy_of(table, a + c) + entropy_of(table, b + c)
             - entropy_of(table, tuple(dict.fromkeys(a + b + c))) - entropy_of(table, c))
    return max(value, 0.0) if value > -1e-12 else value


def batch_entropy(table: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Entropies of marginals for a stack of tables; axis 0 is the batch axis."""
    keep = {0, *axes}
    drop = tuple(i for i in range(1, table.ndim) if i not in keep)
    p = table.sum(axis=drop) if drop else table
    p = p.reshape(p.shape[0], -1)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=1)


def batch_mi(table: np.ndarray, a, b, c=()) -> np.ndarray:
    """Batched ``I(A; B | C)``; axis 0 indexes independent tables."""
    a, b, c = tuple(a), tuple(b), tuple(c)
    return (batch_entropy(table, a + c) + batch_entropy(table, b + c)
            - batch_entropy(table, a + b + c) - batch_entropy(table, c))


def binary_entropy(p: float) -> float:
    if p <= 0 or p >= 1:
        return 0.0
    return -p * math.log(p) - (1 - p) * math.log(1 - p)
