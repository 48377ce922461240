"""Bivariate count samples."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


class SampleError(ValueError):
    """Raised for malformed or degenerate samples."""


@dataclass(frozen=True, eq=False)
class BivariateSample:
    """A sequence of nonnegative integer pairs ``(x_i, y_i)``.

    The pairs are stored as two int64 arrays in the order they were given.
    Most consumers only need the distinct pairs and their multiplicities,
    which are computed once and cached (see :attr:`distinct`).
    """

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x)
        y = np.asarray(self.y)
        if x.ndim != 1 or x.shape != y.shape:
            raise SampleError("x and y must be 1-d arrays of equal length")
        if x.size == 0:
            raise SampleError("empty sample")
        for name, arr in (("x", x), ("y", y)):
            if arr.dtype.kind == "f":
                if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
                    raise SampleError(f"{name} contains non-integer values")
            elif arr.dtype.kind not in "iu":
                raise SampleError(f"{name} must be numeric")
        x = x.astype(np.int64)
        y = y.astype(np.int64)
        if np.any(x < 0) or np.any(y < 0):
            raise SampleError("counts must be nonnegative")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_pairs(cls, pairs) -> "BivariateSample":
        arr = np.asarray(list(pairs))
        if arr.size == 0:
            raise SampleError("empty sample")
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise SampleError("pairs must have shape (n, 2)")
        return cls(arr[:, 0], arr[:, 1])

    @classmethod
    def from_contingency(cls, table) -> "BivariateSample":
        """Expand a count matrix (rows = y values, columns = x values).

        Pairs come out in row-major order: all copies of (0, 0), then (1, 0),
        and so on along the first row.
        """
        table = np.asarray(table)
        if table.ndim != 2:
            raise SampleError("contingency table must be 2-d")
        if np.any(table < 0):
            raise SampleError("negative count in contingency table")
        ys, xs = np.indices(table.shape)
        reps = table.ravel().astype(np.int64)
        return cls(np.repeat(xs.ravel(), reps), np.repeat(ys.ravel(), reps))

    @property
    def n(self) -> int:
        return int(self.x.size)

    def __len__(self) -> int:
        return self.n

    def pairs(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    @cached_property
    def distinct(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Distinct pairs and multiplicities as ``(xs, ys, counts)``."""
        uniq, counts = np.unique(self.pairs(), axis=0, return_counts=True)
        return uniq[:, 0], uniq[:, 1], counts.astype(np.int64)

    def contingency(self) -> np.ndarray:
        """Count matrix in the :meth:`from_contingency` layout (rows = y, columns = x)."""
        table = np.zeros((self.y.max() + 1, self.x.max() + 1), dtype=np.int64)
        np.add.at(table, (self.y, self.x), 1)
        return table

    def repeat(self, k: int) -> "BivariateSample":
        """The sample concatenated with itself ``k`` times."""
        return BivariateSample(np.tile(self.x, k), np.tile(self.y, k))

    def is_degenerate(self) -> bool:
        return bool(np.all(self.x == self.x[0]) and np.all(self.y == self.y[0]))

    def __eq__(self, other):
        if not isinstance(other, BivariateSample):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.y, other.y)

    def __hash__(self):
        return hash((self.x.tobytes(), self.y.tobytes()))
