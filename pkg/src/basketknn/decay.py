"""Maintenance rules for the time-decayed average of a series.

A series x_1..x_n with decay rate r in (0, 1] has the decayed average

    avg_n = (1/n) * sum_i r^(n-i) * x_i

so the most recent element carries weight 1 and each step back multiplies the
weight by r. `decayed_average` evaluates this definition directly and serves
as the brute-force oracle. The three update rules revise an existing average
without replaying the series:

  * `incr_update`   appends x_{n+1}:     (r*n*avg + x) / (n+1)
  * `decr_update`   deletes x_i given the slice [x_i..x_n]:
                    (n*avg + dot(D, R)) / ((n-1)*r), where D holds the first
                    order differences of the slice (ending in -x_n) and R the
                    decay weights [r^(n-i), ..., r, 1]
  * `inplace_update` replaces x_i:       avg + r^(n-i) * (x' - x) / n

Elements may be floats, numpy arrays, or `SparseVector`s; one implementation
serves scalar series, group vectors, and user vectors alike.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, EmptySeries, IndexOutOfRange, SoleElement
from .sparse import SparseVector


@dataclass
class TouchCounter:
    """Counts stored elements read by update operations (the work metric)."""

    count: int = 0

    def add(self, n: int = 1) -> None:
        self.count += n


def _shape(x):
    if isinstance(x, SparseVector):
        return ("sparse", x.dim)
    if isinstance(x, np.ndarray):
        return ("dense", x.shape)
    return None  # scalar


def _check_compatible(a, b) -> None:
    sa, sb = _shape(a), _shape(b)
    if sa != sb:
        raise DimensionMismatch(f"incompatible operands: {sa or 'scalar'} vs {sb or 'scalar'}")


def _check_rate(rate: float) -> None:
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"decay rate must lie in (0, 1], got {rate}")


@dataclass(frozen=True, eq=False)
class DecayedAverage:
    """A decayed average together with the series length it summarizes.

    `count == 0` is the empty average; its value must be the zero element.
    """

    value: object
    count: int
    rate: float

    def __post_init__(self):
        _check_rate(self.rate)
        if self.count < 0:
            raise ValueError("count must be non-negative")


def decayed_average(series: Sequence, rate: float, counter: TouchCounter | None = None):
    """Brute-force decayed average of a whole series (the oracle)."""
    _check_rate(rate)
    n = len(series)
    if n == 0:
        raise EmptySeries("cannot average an empty series")
    if counter is not None:
        counter.add(n)
    total = None
    for pos, x in enumerate(series):
        term = (rate ** (n - 1 - pos)) * x
        total = term if total is None else total + term
    return total / n


def incr_update(avg: DecayedAverage, x_new, counter: TouchCounter | None = None) -> DecayedAverage:
    """Absorb one new element in O(1), independent of the series length."""
    n = avg.count
    if counter is not None:
        counter.add(1)
    if n == 0:
        return DecayedAverage(x_new / 1, 1, avg.rate)
    _check_compatible(avg.value, x_new)
    value = (avg.rate * n * avg.value + x_new) / (n + 1)
    return DecayedAverage(value, n + 1, avg.rate)


def decr_update(avg: DecayedAverage, tail_slice: Sequence, counter: TouchCounter | None = None) -> DecayedAverage:
    """Delete the element at the head of `tail_slice`.

    `tail_slice` is [x_i, ..., x_n]: the element being deleted followed by
    everything after it. Cost is proportional to the slice length only.
    """
    n = avg.count
    if n == 0:
        raise EmptySeries("cannot delete from an empty series")
    if n == 1:
        raise SoleElement("deleting the only element; caller must remove the state")
    length = len(tail_slice)
    if length == 0:
        raise EmptySeries("tail slice is empty")
    if length > n:
        raise IndexOutOfRange(f"tail slice of {length} exceeds series length {n}")
    _check_compatible(avg.value, tail_slice[0])
    if counter is not None:
        counter.add(length)

    r = avg.rate
    # dot(D, R) expanded per element: the deleted head contributes -r^(L-1),
    # each survivor at slice offset t contributes r^(L-1-t) * (r - 1).
    last = length - 1
    head_coef = -(r ** last)
    step = r - 1.0
    x0 = tail_slice[0]
    if isinstance(x0, SparseVector):
        acc: dict[int, float] = {}
        get = acc.get
        if step != 0.0:
            w = step  # walk the slice backward so each weight is one multiply
            for t in range(last, 0, -1):
                for i, v in tail_slice[t]._entries.items():
                    acc[i] = get(i, 0.0) + w * v
                w *= r
        for i, v in x0._entries.items():
            acc[i] = get(i, 0.0) + head_coef * v
        dot = SparseVector._from_clean(x0.dim, {i: v for i, v in acc.items() if v != 0.0})
    else:
        dot = head_coef * x0
        if step != 0.0:
            w = step
            for t in range(last, 0, -1):
                dot = dot + w * tail_slice[t]
                w *= r
    value = (n * avg.value + dot) / ((n - 1) * r)
    return DecayedAverage(value, n - 1, avg.rate)


def decr_update_indices(
    avg: DecayedAverage,
    tail_items: Sequence,
    dim: int,
    counter: TouchCounter | None = None,
) -> DecayedAverage:
    """`decr_update` for a slice of multi-hot elements given by their indices.

    `tail_items[t]` is an iterable of vector indices where element t is 1.
    Equivalent to building the multi-hot vectors and calling `decr_update`,
    but skips the per-element vector construction; this is the deletion hot
    path for basket slices.
    """
    n = avg.count
    if n == 0:
        raise EmptySeries("cannot delete from an empty series")
    if n == 1:
        raise SoleElement("deleting the only element; caller must remove the state")
    length = len(tail_items)
    if length == 0:
        raise EmptySeries("tail slice is empty")
    if length > n:
        raise IndexOutOfRange(f"tail slice of {length} exceeds series length {n}")
    if counter is not None:
        counter.add(length)

    r = avg.rate
    last = length - 1
    step = r - 1.0
    acc: dict[int, float] = {}
    get = acc.get
    if step != 0.0:
        w = step
        for t in range(last, 0, -1):
            for i in tail_items[t]:
                acc[i] = get(i, 0.0) + w
            w *= r
    head_coef = -(r ** last)
    for i in tail_items[0]:
        acc[i] = get(i, 0.0) + head_coef
    dot = SparseVector._from_clean(dim, {i: v for i, v in acc.items() if v != 0.0})
    value = (n * avg.value + dot) / ((n - 1) * r)
    return DecayedAverage(value, n - 1, avg.rate)


def inplace_update(
    avg: DecayedAverage,
    position_from_end: int,
    x_old,
    x_new,
    counter: TouchCounter | None = None,
) -> DecayedAverage:
    """Replace one element in place; the count is unchanged."""
    n = avg.count
    if not 0 <= position_from_end < n:
        raise IndexOutOfRange(f"position_from_end {position_from_end} outside series of length {n}")
    _check_compatible(x_old, x_new)
    _check_compatible(avg.value, x_new)
    if counter is not None:
        counter.add(1)
    value = avg.value + (avg.rate ** position_from_end) * (x_new - x_old) / n
    return DecayedAverage(value, n, avg.rate)
