"""Latency and numerical-stability benchmarks for the online update rules.

All benches use one user over a one-item vocabulary, so timings isolate the
update rules from vector width. Additions are timed along a single growing
history; deletions are timed while draining a prebuilt history per policy
(from_end, from_start, random). The error-growth bench rebuilds the exact
state after every deletion and tracks the relative drift of the online
vector, which grows exponentially with repeated deletions.
"""

import gc
import random
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from ..decay import TouchCounter
from ..model import Basket, HyperParams, ItemVocabulary, recompute_from_groups
from ..online import REMOVED, add_basket, delete_basket

DELETION_ORDERS = ("from_end", "from_start", "random")

_VOCAB = ItemVocabulary((1,))


def _single_item_basket(seq: int) -> Basket:
    return Basket("bench-user", seq, frozenset((1,)), ts=seq)


@dataclass
class LatencyReport:
    kind: str
    nanos: list  # one run: list[int]; repeated runs: list[list[int]]
    touch_counts: list
    meta: dict = field(default_factory=dict)

    def runs(self) -> list:
        if self.nanos and isinstance(self.nanos[0], list):
            return self.nanos
        return [self.nanos]

    def touch_runs(self) -> list:
        if self.touch_counts and isinstance(self.touch_counts[0], list):
            return self.touch_counts
        return [self.touch_counts]

    def median_nanos_at(self, size: int, window: int = 100) -> float:
        """Median time of the `window` updates leading up to history size `size`."""
        lo = max(0, size - window)
        pooled = [t for run in self.runs() for t in run[lo:size]]
        return statistics.median(pooled)

    def median_nanos(self) -> float:
        return statistics.median(t for run in self.runs() for t in run)

    def to_json_lines(self):
        for rep, (times, touches) in enumerate(zip(self.runs(), self.touch_runs())):
            for step, (t, c) in enumerate(zip(times, touches), start=1):
                yield {"kind": self.kind, "rep": rep, "step": step, "nanos": t, "touch": c,
                       **{k: v for k, v in self.meta.items() if k in ("order", "n")}}


@dataclass
class ErrorGrowthReport:
    rel_errors: list
    slope: float
    r_squared: float
    steps_to_one_percent: int | None
    meta: dict = field(default_factory=dict)

    def to_json_lines(self):
        for step, err in enumerate(self.rel_errors):
            yield {"step": step, "rel_error": err}


def bench_incremental(grid=(100, 1000, 10000), repetitions: int = 3,
                      group_size: int = 7) -> LatencyReport:
    """Time every addition while growing a history to max(grid)."""
    grid = tuple(sorted(set(int(g) for g in grid)))
    total = grid[-1]
    params = HyperParams(group_size=group_size, basket_decay=0.9, group_decay=0.7)
    all_nanos, all_touch = [], []
    for _ in range(max(1, repetitions)):
        nanos, touch = [], []
        state = None
        gc.collect()
        gc_was_enabled = gc.isenabled()
        gc.disable()
        try:
            for seq in range(1, total + 1):
                basket = _single_item_basket(seq)
                counter = TouchCounter()
                t0 = time.perf_counter_ns()
                state = add_basket(state, basket, params, _VOCAB, counter=counter)
                nanos.append(time.perf_counter_ns() - t0)
                touch.append(counter.count)
        finally:
            if gc_was_enabled:
                gc.enable()
        all_nanos.append(nanos)
        all_touch.append(touch)
    return LatencyReport("incremental", all_nanos, all_touch,
                         meta={"grid": grid, "n": total, "group_size": group_size,
                               "repetitions": max(1, repetitions)})


def bench_decremental(order: str = "random", n: int = 5000, seed: int = 0,
                      group_size: int | None = None) -> LatencyReport:
    """Build n baskets, then time deleting all of them per the order policy.

    By default the whole history forms one group, so a deletion's cost is set
    purely by the basket's distance from the end.
    """
    if order not in DELETION_ORDERS:
        raise ValueError(f"unknown order {order!r}; choose from {DELETION_ORDERS}")
    if n < 2:
        raise ValueError("need at least two baskets")
    m = group_size if group_size is not None else n
    params = HyperParams(group_size=m, basket_decay=0.9, group_decay=0.7)
    state = None
    history: dict = {}
    for seq in range(1, n + 1):
        basket = _single_item_basket(seq)
        state = add_basket(state, basket, params, _VOCAB)
        history[seq] = basket

    if order == "from_end":
        doomed = list(range(n, 0, -1))
    elif order == "from_start":
        doomed = list(range(1, n + 1))
    else:
        doomed = list(range(1, n + 1))
        random.Random(seed).shuffle(doomed)

    nanos, touch = [], []
    gc.collect()
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for seq in doomed:
            counter = TouchCounter()
            t0 = time.perf_counter_ns()
            result = delete_basket(state, history, seq, params, _VOCAB, counter=counter)
            nanos.append(time.perf_counter_ns() - t0)
            touch.append(counter.count)
            del history[seq]
            state = None if result is REMOVED else result
    finally:
        if gc_was_enabled:
            gc.enable()
    return LatencyReport("decremental", nanos, touch,
                         meta={"order": order, "n": n, "seed": seed, "group_size": m})


def fit_log_linear(errors, floor: float = 1e-14) -> tuple[float, float]:
    """Least-squares slope and R^2 of log10(error) vs step, above the floor."""
    steps = [i for i, e in enumerate(errors) if e > floor]
    if len(steps) < 3:
        return 0.0, 0.0
    xs = np.array(steps, dtype=float)
    ys = np.log10(np.array([errors[i] for i in steps], dtype=float))
    slope, intercept = np.polyfit(xs, ys, 1)
    fitted = slope * xs + intercept
    ss_res = float(np.sum((ys - fitted) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


def error_growth(n_build: int = 400, n_deletions: int = 380) -> ErrorGrowthReport:
    """Relative drift of the online vector under repeated tail deletions.

    Uses the fixed small-group setup (m=2, r_g=0.7, r_b=0.9) whose
    vanished-group rule amplifies floating-point error each time it fires;
    the exact vector is recomputed from the surviving composition after
    every deletion.
    """
    if n_deletions >= n_build:
        raise ValueError("n_deletions must be smaller than n_build")
    params = HyperParams(group_size=2, basket_decay=0.9, group_decay=0.7)
    state = None
    history: dict = {}
    for seq in range(1, n_build + 1):
        basket = _single_item_basket(seq)
        state = add_basket(state, basket, params, _VOCAB)
        history[seq] = basket

    rel_errors = [_relative_drift(state, history, params)]
    for _ in range(n_deletions):
        seq = state.max_seq
        state = delete_basket(state, history, seq, params, _VOCAB)
        del history[seq]
        rel_errors.append(_relative_drift(state, history, params))

    slope, r2 = fit_log_linear(rel_errors)
    steps_to_percent = next((i for i, e in enumerate(rel_errors) if e >= 0.01), None)
    return ErrorGrowthReport(
        rel_errors=rel_errors,
        slope=slope,
        r_squared=r2,
        steps_to_one_percent=steps_to_percent,
        meta={"n_build": n_build, "n_deletions": n_deletions,
              "group_size": 2, "basket_decay": 0.9, "group_decay": 0.7},
    )


def _relative_drift(state, history, params) -> float:
    exact = recompute_from_groups(state.composition(), history, params, _VOCAB)
    diff = state.user_vector - exact.user_vector
    denom = exact.user_vector.norm()
    return diff.norm() / denom if denom else 0.0
