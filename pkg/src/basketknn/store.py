"""Per-user state store plus basket-history store, with binary snapshots.

States and histories live in memory keyed by user id. Access is sharded by a
stable user-id hash: operations on different shards may run concurrently,
operations within a shard are serialized by the shard lock. `get_state` hands
out immutable snapshots that are safe to share across workers.
"""

import io
import json
import struct
import threading
import zlib
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

from .errors import ConsistencyViolation, SnapshotCorrupt
from .model import Basket, Group, ItemVocabulary, UserState, _chain_push
from .sparse import SparseVector

SNAPSHOT_HEADER = b"basketknn-snapshot 1\n"


def stable_user_hash(user) -> int:
    """Process-independent hash (Python's builtin hash is salted per run)."""
    return zlib.crc32(json.dumps(user, sort_keys=True, default=str).encode("utf-8"))


def user_sort_key(user):
    """Canonical ordering for possibly mixed int/str user ids."""
    if isinstance(user, bool):
        return (2, 0, str(user))
    if isinstance(user, (int, float)):
        return (0, user, "")
    return (1, 0, str(user))


@dataclass(frozen=True)
class AddBasket:
    basket: Basket


@dataclass(frozen=True)
class RemoveBasket:
    seq: int


@dataclass(frozen=True)
class RemoveItem:
    seq: int
    item: object


HistoryDelta = AddBasket | RemoveBasket | RemoveItem


class StateStore:
    def __init__(self, shards: int = 16):
        if shards < 1:
            raise ValueError("need at least one shard")
        self._locks = [threading.Lock() for _ in range(shards)]
        self._states: dict = {}
        self._histories: dict = {}

    def _lock_for(self, user) -> threading.Lock:
        return self._locks[stable_user_hash(user) % len(self._locks)]

    def get_state(self, user) -> UserState | None:
        return self._states.get(user)

    def get_history(self, user) -> Mapping[int, Basket]:
        hist = self._histories.get(user)
        return MappingProxyType(hist) if hist is not None else MappingProxyType({})

    def put_state(self, user, state: UserState, delta: HistoryDelta | None = None) -> None:
        """Atomically apply a history delta and install the new state.

        Validation happens before anything mutates: a bad delta raises
        ConsistencyViolation and leaves the store untouched. O(1) per call;
        the history dict is mutated in place under the shard lock.
        """
        with self._lock_for(user):
            hist = self._histories.get(user)
            base = hist if hist is not None else {}
            change = 0 if delta is None else self._validate_delta(user, base, delta)
            if state.basket_count != len(base) + change:
                raise ConsistencyViolation(
                    f"state tracks {state.basket_count} baskets, history would hold "
                    f"{len(base) + change}"
                )
            if hist is None:
                hist = {}
                self._histories[user] = hist
            if delta is not None:
                self._commit_delta(hist, delta)
            self._states[user] = state

    @staticmethod
    def _validate_delta(user, hist: Mapping, delta: HistoryDelta) -> int:
        """Check a delta against the current history; returns its length change."""
        if isinstance(delta, AddBasket):
            basket = delta.basket
            if basket.user != user:
                raise ConsistencyViolation(f"basket belongs to {basket.user!r}, not {user!r}")
            if basket.seq in hist:
                raise ConsistencyViolation(f"seq {basket.seq} already in history")
            return 1
        if isinstance(delta, RemoveBasket):
            if delta.seq not in hist:
                raise ConsistencyViolation(f"seq {delta.seq} not in history")
            return -1
        if isinstance(delta, RemoveItem):
            basket = hist.get(delta.seq)
            if basket is None:
                raise ConsistencyViolation(f"seq {delta.seq} not in history")
            if delta.item not in basket.items:
                raise ConsistencyViolation(f"item {delta.item!r} not in basket {delta.seq}")
            if len(basket.items) == 1:
                raise ConsistencyViolation("item removal would empty the basket; remove it instead")
            return 0
        raise ConsistencyViolation(f"unknown delta {delta!r}")

    @staticmethod
    def _commit_delta(hist: dict, delta: HistoryDelta) -> None:
        if isinstance(delta, AddBasket):
            hist[delta.basket.seq] = delta.basket
        elif isinstance(delta, RemoveBasket):
            del hist[delta.seq]
        else:
            basket = hist[delta.seq]
            hist[delta.seq] = Basket(basket.user, basket.seq, basket.items - {delta.item},
                                     basket.ts)

    def install(self, user, state: UserState, history: Mapping[int, Basket]) -> None:
        """Bulk-install a trained user (evaluation and snapshot loading)."""
        ordered = dict(sorted(history.items()))
        if state.basket_count != len(ordered):
            raise ConsistencyViolation(
                f"state tracks {state.basket_count} baskets, history holds {len(ordered)}"
            )
        with self._lock_for(user):
            self._states[user] = state
            self._histories[user] = ordered

    def remove_user(self, user) -> None:
        with self._lock_for(user):
            self._states.pop(user, None)
            self._histories.pop(user, None)

    def users(self) -> list:
        return sorted(self._states, key=user_sort_key)

    def states(self) -> list:
        """Canonically ordered (user, state) snapshot list."""
        return [(u, self._states[u]) for u in self.users()]

    def __len__(self) -> int:
        return len(self._states)

    def __contains__(self, user) -> bool:
        return user in self._states

    def check_integrity(self) -> None:
        """Full referential audit (test helper; O(total baskets))."""
        if set(self._states) != set(self._histories):
            raise ConsistencyViolation("state/history user sets differ")
        for user, state in self._states.items():
            hist = self._histories[user]
            seqs = list(hist)
            if seqs != sorted(seqs):
                raise ConsistencyViolation(f"history of {user!r} not in seq order")
            refs = [s for g in state.groups_oldest() for s in g.refs]
            if sorted(refs) != seqs:
                raise ConsistencyViolation(f"group refs of {user!r} do not match history")
            if state.basket_count != len(seqs) or state.group_count != len(state.groups_oldest()):
                raise ConsistencyViolation(f"counts of {user!r} are stale")

    # --- snapshot format -------------------------------------------------
    #
    # Text header line, then little-endian binary:
    #   vocab:   u32 count, per item: u32 len + JSON-encoded id bytes
    #   users:   u32 count, per user record:
    #     u32 len + JSON-encoded user id bytes
    #     u32 group count, per group oldest-first:
    #       u32 ref count, refs as u64
    #       u32 nnz, entries as (u32 index, f64 value), index-sorted
    #     user vector: u32 nnz + entries
    #     u32 basket count, per basket in seq order:
    #       u64 seq, i64 ts, u32 item count, items as u32 vocab indices

    def snapshot(self, path, vocab: ItemVocabulary) -> None:
        buf = io.BytesIO()
        self.write_snapshot(buf, vocab)
        data = buf.getvalue()
        with open(path, "wb") as fh:
            fh.write(data)

    def write_snapshot(self, fh, vocab: ItemVocabulary) -> None:
        w = fh.write
        w(SNAPSHOT_HEADER)
        w(struct.pack("<I", len(vocab)))
        for item in vocab.ids:
            blob = json.dumps(item).encode("utf-8")
            w(struct.pack("<I", len(blob)))
            w(blob)
        users = self.users()
        w(struct.pack("<I", len(users)))
        for user in users:
            state = self._states[user]
            hist = self._histories[user]
            blob = json.dumps(user).encode("utf-8")
            w(struct.pack("<I", len(blob)))
            w(blob)
            groups = state.groups_oldest()
            w(struct.pack("<I", len(groups)))
            for group in groups:
                w(struct.pack("<I", len(group.refs)))
                w(struct.pack(f"<{len(group.refs)}Q", *group.refs))
                _write_vector(w, group.vector)
            _write_vector(w, state.user_vector)
            w(struct.pack("<I", len(hist)))
            for seq, basket in hist.items():
                idxs = sorted(vocab.index_of(it) for it in basket.items)
                w(struct.pack("<QqI", seq, basket.ts, len(idxs)))
                w(struct.pack(f"<{len(idxs)}I", *idxs))

    @classmethod
    def load(cls, path) -> tuple["StateStore", ItemVocabulary]:
        with open(path, "rb") as fh:
            data = fh.read()
        return cls.read_snapshot(data)

    @classmethod
    def read_snapshot(cls, data: bytes) -> tuple["StateStore", ItemVocabulary]:
        r = _Reader(data)
        header = r.take(len(SNAPSHOT_HEADER), "header")
        if header != SNAPSHOT_HEADER:
            raise SnapshotCorrupt("unrecognized snapshot header", 0)
        ids = [json.loads(r.take(r.u32("vocab id length"), "vocab id")) for _ in range(r.u32("vocab size"))]
        vocab = ItemVocabulary(ids)
        dim = len(vocab)
        store = cls()
        for _ in range(r.u32("user count")):
            user = json.loads(r.take(r.u32("user id length"), "user id"))
            head = None
            total = 0
            group_count = r.u32("group count")
            for _ in range(group_count):
                nrefs = r.u32("ref count")
                if nrefs == 0:
                    raise SnapshotCorrupt("empty group record", r.pos)
                refs = r.unpack(f"<{nrefs}Q", 8 * nrefs, "group refs")
                head = _chain_push(head, Group(refs, _read_vector(r, dim)))
                total += nrefs
            user_vector = _read_vector(r, dim)
            hist = {}
            for _ in range(r.u32("basket count")):
                seq, ts, nitems = r.unpack("<QqI", 20, "basket record")
                if nitems == 0:
                    raise SnapshotCorrupt("empty basket record", r.pos)
                idxs = r.unpack(f"<{nitems}I", 4 * nitems, "basket items")
                if any(i >= dim for i in idxs):
                    raise SnapshotCorrupt("basket item index outside vocabulary", r.pos)
                hist[seq] = Basket(user, seq, frozenset(vocab.id_of(i) for i in idxs), ts)
            state = UserState(
                user=user,
                head=head,
                group_count=group_count,
                basket_count=total,
                user_vector=user_vector,
            )
            try:
                store.install(user, state, hist)
            except ConsistencyViolation as exc:
                raise SnapshotCorrupt(str(exc), r.pos) from None
        if r.pos != len(data):
            raise SnapshotCorrupt("trailing bytes after final record", r.pos)
        return store, vocab


def _write_vector(w, vec: SparseVector) -> None:
    entries = sorted(vec.items())
    w(struct.pack("<I", len(entries)))
    for idx, val in entries:
        w(struct.pack("<Id", idx, val))


def _read_vector(r: "_Reader", dim: int) -> SparseVector:
    nnz = r.u32("vector nnz")
    entries = {}
    for _ in range(nnz):
        idx, val = r.unpack("<Id", 12, "vector entry")
        if not 0 <= idx < dim:
            raise SnapshotCorrupt(f"vector index {idx} outside dimension {dim}", r.pos)
        entries[idx] = val
    return SparseVector(dim, entries)


class _Reader:
    __slots__ = ("data", "pos")

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        end = self.pos + n
        if end > len(self.data):
            raise SnapshotCorrupt(f"truncated while reading {what}", self.pos)
        out = self.data[self.pos:end]
        self.pos = end
        return out

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def unpack(self, fmt: str, size: int, what: str) -> tuple:
        return struct.unpack(fmt, self.take(size, what))
