"""Sparse real vectors over a fixed item vocabulary.

Vectors are value objects: every arithmetic operation returns a new vector
and exact zeros are never stored.
"""

import numbers
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import DimensionMismatch


class SparseVector:
    """Immutable sparse vector with an explicit dimension."""

    __slots__ = ("dim", "_entries")

    def __init__(self, dim: int, entries: Mapping[int, float] | None = None):
        if dim < 0:
            raise ValueError("dimension must be non-negative")
        clean: dict[int, float] = {}
        if entries:
            for idx, val in entries.items():
                v = float(val)
                if v == 0.0:
                    continue
                i = int(idx)
                if not 0 <= i < dim:
                    raise IndexError(f"index {i} out of range for dimension {dim}")
                clean[i] = v
        self.dim = dim
        self._entries = clean

    @classmethod
    def _from_clean(cls, dim: int, entries: dict[int, float]) -> "SparseVector":
        # internal fast path: entries already validated and zero-free
        v = cls.__new__(cls)
        v.dim = dim
        v._entries = entries
        return v

    @classmethod
    def zero(cls, dim: int) -> "SparseVector":
        return cls._from_clean(dim, {})

    @classmethod
    def from_indices(cls, dim: int, indices: Iterable[int], value: float = 1.0) -> "SparseVector":
        """Vector with `value` at every index in `indices` (a multi-hot when 1.0)."""
        if value == 0.0:
            return cls.zero(dim)
        entries = dict.fromkeys(indices, float(value))
        for i in entries:
            if not 0 <= i < dim:
                raise IndexError(f"index {i} out of range for dimension {dim}")
        return cls._from_clean(dim, entries)

    @classmethod
    def from_dense(cls, array) -> "SparseVector":
        arr = np.asarray(array, dtype=float).ravel()
        return cls._from_clean(len(arr), {i: float(v) for i, v in enumerate(arr) if v != 0.0})

    def get(self, index: int, default: float = 0.0) -> float:
        return self._entries.get(index, default)

    def items(self):
        return self._entries.items()

    def indices(self):
        return self._entries.keys()

    @property
    def nnz(self) -> int:
        return len(self._entries)

    def _check_dim(self, other: "SparseVector") -> None:
        if self.dim != other.dim:
            raise DimensionMismatch(f"dimensions differ: {self.dim} vs {other.dim}")

    def __add__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        self._check_dim(other)
        out = dict(self._entries)
        for i, v in other._entries.items():
            s = out.get(i, 0.0) + v
            if s == 0.0:
                out.pop(i, None)
            else:
                out[i] = s
        return SparseVector._from_clean(self.dim, out)

    def __sub__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        self._check_dim(other)
        out = dict(self._entries)
        for i, v in other._entries.items():
            s = out.get(i, 0.0) - v
            if s == 0.0:
                out.pop(i, None)
            else:
                out[i] = s
        return SparseVector._from_clean(self.dim, out)

    def __mul__(self, scalar):
        if not isinstance(scalar, numbers.Real):
            return NotImplemented
        c = float(scalar)
        if c == 0.0:
            return SparseVector.zero(self.dim)
        return SparseVector._from_clean(self.dim, {i: c * v for i, v in self._entries.items()})

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if not isinstance(scalar, numbers.Real):
            return NotImplemented
        c = float(scalar)
        return SparseVector._from_clean(self.dim, {i: v / c for i, v in self._entries.items()})

    def __neg__(self):
        return SparseVector._from_clean(self.dim, {i: -v for i, v in self._entries.items()})

    @staticmethod
    def linear_combination(dim: int, terms) -> "SparseVector":
        """Sum of coef * vector over (coef, vector) pairs, in one accumulation pass."""
        acc: dict[int, float] = {}
        get = acc.get
        for coef, vec in terms:
            if coef == 0.0:
                continue
            for i, v in vec._entries.items():
                acc[i] = get(i, 0.0) + coef * v
        return SparseVector._from_clean(dim, {i: v for i, v in acc.items() if v != 0.0})

    def dot(self, other: "SparseVector") -> float:
        self._check_dim(other)
        a, b = self._entries, other._entries
        if len(b) < len(a):
            a, b = b, a
        return sum(v * b[i] for i, v in a.items() if i in b)

    def distance_sq(self, other: "SparseVector") -> float:
        """Squared Euclidean distance."""
        self._check_dim(other)
        total = 0.0
        b = other._entries
        for i, v in self._entries.items():
            d = v - b.get(i, 0.0)
            total += d * d
        for i, v in b.items():
            if i not in self._entries:
                total += v * v
        return total

    def norm(self) -> float:
        return sum(v * v for v in self._entries.values()) ** 0.5

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim, dtype=np.float64)
        for i, v in self._entries.items():
            out[i] = v
        return out

    def __eq__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        return self.dim == other.dim and self._entries == other._entries

    __hash__ = None

    def __iter__(self) -> Iterator[tuple[int, float]]:
        return iter(self._entries.items())

    def __repr__(self):
        shown = dict(sorted(self._entries.items())[:8])
        more = "" if self.nnz <= 8 else f", +{self.nnz - 8} more"
        return f"SparseVector(dim={self.dim}, {shown}{more})"
