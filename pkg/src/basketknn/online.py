"""Online user-state maintenance: constant-time additions, sliced deletions.

Additions never look at the history: a new basket either opens a fresh
single-basket group (when the newest group is full) or folds into the newest
group, and the user vector is revised by the matching O(1) rule.

Deletions keep the group composition fixed except for the enclosing group
(varying group size): deleting from a multi-basket group re-averages that
group from the slice starting at the deleted basket; deleting a single-basket
group removes it and revises the user vector from the group-vector slice
starting at the vanished group. Removing one item from a basket is an
in-place replacement at both levels. Deleting a user's final basket yields
the REMOVED sentinel; the caller erases state and history.

All functions are pure: they return new states and never mutate their inputs.
The caller owns history bookkeeping (see `store`).
"""

from dataclasses import dataclass
from typing import Mapping

from .decay import (
    DecayedAverage,
    TouchCounter,
    decr_update,
    decr_update_indices,
    incr_update,
    inplace_update,
)
from .errors import ItemNotInBasket, MissingBasket, OutOfOrderBasket, UnknownItem
from .model import (
    Basket,
    Group,
    HyperParams,
    ItemVocabulary,
    UserState,
    _chain_drop,
    _chain_push,
    _chain_replace,
    multi_hot,
)
from .sparse import SparseVector


@dataclass(frozen=True)
class Removed:
    """Sentinel result: the user's last basket was deleted; erase the state."""


REMOVED = Removed()


@dataclass(frozen=True)
class DeletionRequest:
    """A basket deletion (item is None) or a single-item deletion."""

    user: object
    seq: int
    item: object = None


def apply_deletion(
    state: UserState,
    history: Mapping[int, Basket],
    request: DeletionRequest,
    params: HyperParams,
    vocab: ItemVocabulary,
    counter: TouchCounter | None = None,
) -> UserState | Removed:
    """Route a deletion request: the whole basket when item is None, else one item."""
    if request.item is None:
        return delete_basket(state, history, request.seq, params, vocab, counter=counter)
    return delete_item(state, history, request.seq, request.item, params, vocab, counter=counter)


def add_basket(
    state: UserState | None,
    basket: Basket,
    params: HyperParams,
    vocab: ItemVocabulary,
    counter: TouchCounter | None = None,
) -> UserState:
    """Absorb one new basket in O(1), independent of the history length."""
    vec = multi_hot(basket, vocab)
    if state is None:
        if counter is not None:
            counter.add(2)
        group = Group((basket.seq,), vec)
        return UserState(
            user=basket.user,
            head=_chain_push(None, group),
            group_count=1,
            basket_count=1,
            user_vector=vec,
        )

    if basket.seq <= state.max_seq:
        raise OutOfOrderBasket(f"seq {basket.seq} does not advance past {state.max_seq}")
    last = state.last_group
    k = state.group_count

    if last.size >= params.group_size:
        # newest group is full: open a single-basket group, incr the user vector
        if counter is not None:
            counter.add(1)
        group = Group((basket.seq,), vec)
        user_avg = incr_update(
            DecayedAverage(state.user_vector, k, params.group_decay), vec, counter=counter
        )
        return UserState(
            user=state.user,
            head=_chain_push(state.head, group),
            group_count=k + 1,
            basket_count=state.basket_count + 1,
            user_vector=user_avg.value,
        )

    # newest group has room: incr the group vector, replace it in the user vector
    group_avg = incr_update(
        DecayedAverage(last.vector, last.size, params.basket_decay), vec, counter=counter
    )
    new_last = Group(last.refs + (basket.seq,), group_avg.value)
    user_avg = inplace_update(
        DecayedAverage(state.user_vector, k, params.group_decay),
        0,
        last.vector,
        group_avg.value,
        counter=counter,
    )
    return UserState(
        user=state.user,
        head=_chain_replace(state.head, 0, new_last),
        group_count=k,
        basket_count=state.basket_count + 1,
        user_vector=user_avg.value,
    )


def delete_basket(
    state: UserState,
    history: Mapping[int, Basket],
    seq: int,
    params: HyperParams,
    vocab: ItemVocabulary,
    counter: TouchCounter | None = None,
) -> UserState | Removed:
    """Delete one retained basket; cost is bounded by the slice after it."""
    if state is None:
        raise MissingBasket(f"seq {seq}: user has no state")
    loc = state.find(seq)
    if loc is None:
        raise MissingBasket(f"seq {seq} is not retained")
    if state.basket_count == 1:
        return REMOVED
    pos, group, idx = loc
    k = state.group_count

    if group.size > 1:
        # re-average the enclosing group from the deleted basket onward,
        # then replace its vector inside the user vector
        index_of = vocab.index_map().__getitem__
        slice_items = [map(index_of, history[s].items) for s in group.refs[idx:]]
        try:
            group_avg = decr_update_indices(
                DecayedAverage(group.vector, group.size, params.basket_decay),
                slice_items,
                len(vocab),
                counter=counter,
            )
        except KeyError as exc:
            raise UnknownItem(f"item {exc.args[0]!r} not in vocabulary") from None
        new_group = Group(group.refs[:idx] + group.refs[idx + 1:], group_avg.value)
        user_avg = inplace_update(
            DecayedAverage(state.user_vector, k, params.group_decay),
            pos,
            group.vector,
            group_avg.value,
            counter=counter,
        )
        return UserState(
            user=state.user,
            head=_chain_replace(state.head, pos, new_group),
            group_count=k,
            basket_count=state.basket_count - 1,
            user_vector=user_avg.value,
        )

    # single-basket group vanishes: revise the user vector from the
    # group-vector slice starting at the vanished group
    newer = []
    node = state.head
    for _ in range(pos + 1):
        g, node = node
        newer.append(g.vector)
    newer.reverse()  # oldest-first slice [g_j .. g_k]
    user_avg = decr_update(
        DecayedAverage(state.user_vector, k, params.group_decay), newer, counter=counter
    )
    return UserState(
        user=state.user,
        head=_chain_drop(state.head, pos),
        group_count=k - 1,
        basket_count=state.basket_count - 1,
        user_vector=user_avg.value,
    )


def delete_item(
    state: UserState,
    history: Mapping[int, Basket],
    seq: int,
    item,
    params: HyperParams,
    vocab: ItemVocabulary,
    counter: TouchCounter | None = None,
) -> UserState | Removed:
    """Remove one item from a retained basket.

    Falls back to `delete_basket` when the item was the basket's last; the
    caller must then drop the basket from the history rather than shrink it.
    """
    if state is None:
        raise MissingBasket(f"seq {seq}: user has no state")
    basket = history.get(seq)
    loc = state.find(seq)
    if basket is None or loc is None:
        raise MissingBasket(f"seq {seq} is not retained")
    if item not in basket.items:
        raise ItemNotInBasket(f"item {item!r} not in basket seq {seq}")
    if len(basket.items) == 1:
        return delete_basket(state, history, seq, params, vocab, counter=counter)

    pos, group, idx = loc
    k = state.group_count
    old_vec = multi_hot(basket, vocab)
    new_vec = old_vec - SparseVector.from_indices(len(vocab), (vocab.index_of(item),))
    group_avg = inplace_update(
        DecayedAverage(group.vector, group.size, params.basket_decay),
        group.size - 1 - idx,
        old_vec,
        new_vec,
        counter=counter,
    )
    new_group = Group(group.refs, group_avg.value)
    user_avg = inplace_update(
        DecayedAverage(state.user_vector, k, params.group_decay),
        pos,
        group.vector,
        group_avg.value,
        counter=counter,
    )
    return UserState(
        user=state.user,
        head=_chain_replace(state.head, pos, new_group),
        group_count=k,
        basket_count=state.basket_count,
        user_vector=user_avg.value,
    )
