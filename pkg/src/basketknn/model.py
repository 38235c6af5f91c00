"""Static model construction: vocabulary, multi-hot encoding, batch training.

A user is represented hierarchically: consecutive baskets form groups, each
group is the decayed average (rate r_b) of its baskets' multi-hot vectors,
and the user vector is the decayed average (rate r_g) of the group vectors.
`train_from_scratch` builds this from a full history and doubles as the
oracle for the online update path.
"""

import math
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence, Union

from .decay import decayed_average
from .errors import EmptyHistory, MissingBasket, UnknownItem
from .sparse import SparseVector

ItemId = Union[int, str]
UserId = Union[int, str]


class ItemVocabulary:
    """Bijection between item ids and dense indices [0, |I|)."""

    __slots__ = ("_ids", "_index")

    def __init__(self, ids: Sequence[ItemId]):
        self._ids = tuple(ids)
        self._index = {item: i for i, item in enumerate(self._ids)}
        if len(self._index) != len(self._ids):
            raise ValueError("duplicate item ids in vocabulary")

    @classmethod
    def from_items(cls, items: Iterable[ItemId]) -> "ItemVocabulary":
        """Deterministic vocabulary: unique ids in ascending order."""
        return cls(sorted(set(items)))

    def index_of(self, item: ItemId) -> int:
        try:
            return self._index[item]
        except KeyError:
            raise UnknownItem(f"item {item!r} not in vocabulary") from None

    def id_of(self, index: int) -> ItemId:
        return self._ids[index]

    def index_map(self) -> dict:
        """The id-to-index dict itself (treat as read-only; hot paths index it)."""
        return self._index

    @property
    def ids(self) -> tuple:
        return self._ids

    def __contains__(self, item) -> bool:
        return item in self._index

    def __len__(self) -> int:
        return len(self._ids)

    def __eq__(self, other):
        return isinstance(other, ItemVocabulary) and self._ids == other._ids

    def __repr__(self):
        return f"ItemVocabulary({len(self._ids)} items)"


@dataclass(frozen=True)
class Basket:
    """One purchase event: a non-empty item set with a per-user sequence number.

    The sequence number is the stable deletion handle; the timestamp is
    metadata only.
    """

    user: UserId
    seq: int
    items: frozenset
    ts: int = 0

    def __post_init__(self):
        object.__setattr__(self, "items", frozenset(self.items))
        if not self.items:
            raise ValueError("basket needs at least one item")
        if self.seq < 0:
            raise ValueError("seq must be non-negative")


@dataclass(frozen=True)
class HyperParams:
    """Model configuration: group size m, decay rates, kNN size, blend weight."""

    group_size: int = 7
    basket_decay: float = 0.9
    group_decay: float = 0.7
    neighbors: int = 300
    blend: float = 0.7

    def __post_init__(self):
        if self.group_size < 1:
            raise ValueError("group_size must be positive")
        if not 0.0 < self.basket_decay <= 1.0:
            raise ValueError("basket_decay must lie in (0, 1]")
        if not 0.0 < self.group_decay <= 1.0:
            raise ValueError("group_decay must lie in (0, 1]")
        if self.neighbors < 1:
            raise ValueError("neighbors must be positive")
        if not 0.0 <= self.blend <= 1.0:
            raise ValueError("blend must lie in [0, 1]")

    PRESETS = {
        "tafeng": (7, 0.9, 0.7, 300, 0.7),
        "instacart": (3, 0.9, 0.7, 900, 0.9),
        "valuedshopper": (7, 1.0, 0.6, 300, 0.7),
    }

    @classmethod
    def preset(cls, name: str) -> "HyperParams":
        try:
            m, rb, rg, k, alpha = cls.PRESETS[name.lower()]
        except KeyError:
            raise ValueError(f"unknown preset {name!r}; choose from {sorted(cls.PRESETS)}") from None
        return cls(m, rb, rg, k, alpha)


@dataclass(frozen=True)
class Group:
    """A run of consecutive baskets and their decayed-average vector."""

    refs: tuple  # basket seqs, ascending
    vector: SparseVector

    @property
    def size(self) -> int:
        return len(self.refs)


# Groups live in an immutable newest-first chain of (group, rest) pairs so
# additions share structure in O(1) and deletions rebuild only the spine
# between the newest group and the touched one.


def _chain_push(head, group: Group):
    return (group, head)


def _chain_replace(head, pos: int, group: Group):
    prefix = []
    node = head
    for _ in range(pos):
        prefix.append(node[0])
        node = node[1]
    node = (group, node[1])
    for g in reversed(prefix):
        node = (g, node)
    return node


def _chain_drop(head, pos: int):
    prefix = []
    node = head
    for _ in range(pos):
        prefix.append(node[0])
        node = node[1]
    node = node[1]
    for g in reversed(prefix):
        node = (g, node)
    return node


@dataclass(frozen=True)
class UserState:
    """Immutable snapshot of one user's model state."""

    user: UserId
    head: tuple = field(repr=False)  # newest-first group chain
    group_count: int
    basket_count: int
    user_vector: SparseVector

    def groups_newest(self) -> Iterator[Group]:
        node = self.head
        while node is not None:
            group, node = node
            yield group

    def groups_oldest(self) -> list:
        groups = list(self.groups_newest())
        groups.reverse()
        return groups

    def composition(self) -> list:
        """Group composition as lists of basket seqs, oldest group first."""
        return [list(g.refs) for g in self.groups_oldest()]

    @property
    def last_group(self) -> Group:
        return self.head[0]

    @property
    def max_seq(self) -> int:
        return self.head[0].refs[-1]

    def find(self, seq: int):
        """Locate a retained basket: (distance from newest group, group, index in group).

        Walks newest to oldest so the cost is bounded by the distance to the
        enclosing group. Returns None when the seq is not retained.
        """
        node = self.head
        pos = 0
        while node is not None:
            group, node = node
            refs = group.refs
            if seq > refs[-1]:
                return None  # newer than this group and every older one
            if seq >= refs[0]:
                j = bisect_left(refs, seq)
                if j < len(refs) and refs[j] == seq:
                    return pos, group, j
                return None  # inside this group's range but not retained
            pos += 1
        return None


def multi_hot(basket: Basket, vocab: ItemVocabulary) -> SparseVector:
    """Binary vector with ones at the basket's item indices."""
    # hot path for deletion slices: vocabulary lookups stay in C
    try:
        entries = dict.fromkeys(map(vocab.index_map().__getitem__, basket.items), 1.0)
    except KeyError as exc:
        raise UnknownItem(f"item {exc.args[0]!r} not in vocabulary") from None
    return SparseVector._from_clean(len(vocab), entries)


def recompute_from_groups(
    composition: Sequence[Sequence[int]],
    history: Mapping[int, Basket],
    params: HyperParams,
    vocab: ItemVocabulary,
) -> UserState:
    """Rebuild group and user vectors exactly over a given group composition.

    Honors the composition as-is (groups may have any sizes, as they do after
    deletions); this is the oracle for the online deletion path.
    """
    if not composition:
        raise EmptyHistory("composition has no groups")
    user = None
    head = None
    group_vectors = []
    total = 0
    for refs in composition:
        if not refs:
            raise ValueError("composition contains an empty group")
        vectors = []
        for seq in refs:
            basket = history.get(seq)
            if basket is None:
                raise MissingBasket(f"basket seq {seq} not in history")
            if user is None:
                user = basket.user
            vectors.append(multi_hot(basket, vocab))
        gvec = decayed_average(vectors, params.basket_decay)
        group_vectors.append(gvec)
        head = _chain_push(head, Group(tuple(refs), gvec))
        total += len(refs)
    user_vector = decayed_average(group_vectors, params.group_decay)
    return UserState(
        user=user,
        head=head,
        group_count=len(composition),
        basket_count=total,
        user_vector=user_vector,
    )


def train_from_scratch(history: Sequence[Basket], params: HyperParams, vocab: ItemVocabulary) -> UserState:
    """Batch training over a chronological history.

    Baskets are chunked into ceil(n/m) consecutive groups of size m, the last
    group keeping the remainder. Each stage averages with the group's own
    size as the divisor, so a ragged last group of size t uses weights
    r_b^(t-i) / t.
    """
    if not history:
        raise EmptyHistory("history has no baskets")
    for prev, cur in zip(history, history[1:]):
        if cur.seq <= prev.seq:
            raise ValueError("history must be ordered by ascending seq")
    m = params.group_size
    k = math.ceil(len(history) / m)
    composition = [[b.seq for b in history[j * m:(j + 1) * m]] for j in range(k)]
    by_seq = {b.seq: b for b in history}
    return recompute_from_groups(composition, by_seq, params, vocab)
