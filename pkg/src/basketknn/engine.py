"""Event-driven update loop: additions and deletion requests over the store.

Events for the same user are applied in ingest order; events for different
users are independent and may run on parallel workers. Workers partition
users by a stable hash, so the final store state does not depend on the
worker count. Bad events are reported as rejected, never fatal.

Event file format: one JSON object per line,
  {"type": "add",           "user": u, "seq": n, "items": [...], "ts": t?}
  {"type": "delete_basket", "user": u, "seq": n}
  {"type": "delete_item",   "user": u, "seq": n, "item": i}

Report format: one JSON object per line,
  {"user": u, "kind": k, "status": "ok"|"removed"|"rejected",
   "touch_count": c, "nanos": t, "error": msg?}
"""

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import online
from .decay import TouchCounter
from .errors import BasketKnnError, MissingBasket
from .model import Basket, HyperParams, ItemVocabulary
from .online import DeletionRequest
from .store import AddBasket, RemoveBasket, RemoveItem, StateStore, stable_user_hash

EVENT_KINDS = ("add", "delete_basket", "delete_item")


@dataclass(frozen=True)
class Event:
    kind: str
    user: object
    seq: int | None
    items: tuple = ()
    item: object = None
    ts: int = 0
    ingest_index: int = -1
    note: str | None = None  # parse failure carried into the report

    @classmethod
    def parse(cls, obj, ingest_index: int) -> "Event":
        try:
            if not isinstance(obj, dict):
                raise ValueError("event must be an object")
            kind = obj.get("type")
            if kind not in EVENT_KINDS:
                raise ValueError(f"unknown event type {kind!r}")
            user = obj["user"]
            seq = int(obj["seq"])
            items = tuple(obj["items"]) if kind == "add" else ()
            item = obj.get("item") if kind == "delete_item" else None
            if kind == "delete_item" and "item" not in obj:
                raise ValueError("delete_item needs an item")
            ts = int(obj.get("ts", 0))
            return cls(kind, user, seq, items, item, ts, ingest_index)
        except (KeyError, TypeError, ValueError) as exc:
            return cls("invalid", obj.get("user") if isinstance(obj, dict) else None,
                       None, ingest_index=ingest_index, note=str(exc))


@dataclass(frozen=True)
class UpdateReport:
    user: object
    kind: str
    status: str
    touch_count: int
    nanos: int
    error: str | None = None
    ingest_index: int = -1

    def to_json(self) -> str:
        rec = {
            "user": self.user,
            "kind": self.kind,
            "status": self.status,
            "touch_count": self.touch_count,
            "nanos": self.nanos,
        }
        if self.error is not None:
            rec["error"] = self.error
        return json.dumps(rec)


def read_events(path) -> list[Event]:
    events = []
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                events.append(Event("invalid", None, None, ingest_index=i, note=f"bad json: {exc}"))
                continue
            events.append(Event.parse(obj, i))
    return events


def write_reports(fh, reports: Iterable[UpdateReport]) -> None:
    for report in reports:
        fh.write(report.to_json())
        fh.write("\n")


class Engine:
    """Routes additions and deletions to the online rules and persists results."""

    def __init__(self, store: StateStore, vocab: ItemVocabulary, params: HyperParams):
        self.store = store
        self.vocab = vocab
        self.params = params

    def process_event(self, event: Event) -> UpdateReport:
        counter = TouchCounter()
        try:
            if event.kind == "add":
                basket = Basket(event.user, event.seq, frozenset(event.items), event.ts)
                state = self.store.get_state(event.user)
                t0 = time.perf_counter_ns()
                new_state = online.add_basket(state, basket, self.params, self.vocab, counter=counter)
                nanos = time.perf_counter_ns() - t0
                self.store.put_state(event.user, new_state, AddBasket(basket))
                return UpdateReport(event.user, event.kind, "ok", counter.count, nanos,
                                    ingest_index=event.ingest_index)

            if event.kind in ("delete_basket", "delete_item"):
                state = self.store.get_state(event.user)
                if state is None:
                    raise MissingBasket(f"user {event.user!r} has no state")
                history = self.store.get_history(event.user)
                basket = history.get(event.seq)
                request = DeletionRequest(event.user, event.seq, event.item)
                t0 = time.perf_counter_ns()
                result = online.apply_deletion(state, history, request, self.params, self.vocab,
                                               counter=counter)
                nanos = time.perf_counter_ns() - t0
                if isinstance(result, online.Removed):
                    self.store.remove_user(event.user)
                    return UpdateReport(event.user, event.kind, "removed", counter.count, nanos,
                                        ingest_index=event.ingest_index)
                if request.item is not None and len(basket.items) > 1:
                    delta = RemoveItem(event.seq, event.item)
                else:
                    delta = RemoveBasket(event.seq)  # whole basket, or its sole item, vanished
                self.store.put_state(event.user, result, delta)
                return UpdateReport(event.user, event.kind, "ok", counter.count, nanos,
                                    ingest_index=event.ingest_index)

            raise ValueError(event.note or f"unknown event kind {event.kind!r}")
        except (BasketKnnError, ValueError, KeyError) as exc:
            return UpdateReport(event.user, event.kind, "rejected", counter.count, 0,
                                error=str(exc), ingest_index=event.ingest_index)

    def run(self, events: Iterable[Event], workers: int = 1) -> list[UpdateReport]:
        """Apply all events; the final store state is independent of `workers`."""
        ordered = list(events)
        if workers <= 1:
            return [self.process_event(e) for e in ordered]
        buckets: list[list[Event]] = [[] for _ in range(workers)]
        for event in ordered:
            buckets[stable_user_hash(event.user) % workers].append(event)

        def drain(bucket: Sequence[Event]) -> list[UpdateReport]:
            return [self.process_event(e) for e in bucket]

        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(drain, buckets))
        reports = [r for chunk in chunks for r in chunk]
        reports.sort(key=lambda r: r.ingest_index)
        return reports
