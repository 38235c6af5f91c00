"""Shared test utilities: tolerant comparisons and the online-vs-oracle mirror."""

import random

import numpy as np

from basketknn import (
    Basket,
    HyperParams,
    ItemVocabulary,
    REMOVED,
    SparseVector,
    add_basket,
    delete_basket,
    delete_item,
    recompute_from_groups,
)

# Relative comparisons carry a small absolute term so entries whose true
# value is 0 (or far below float resolution) pass on ~1e-16 residue alone.
ATOL = 1e-12


def close(actual: float, expected: float, rtol: float, atol: float = ATOL) -> bool:
    return abs(actual - expected) <= atol + rtol * abs(expected)


def assert_scalar_close(actual, expected, rtol, atol=ATOL):
    assert close(actual, expected, rtol, atol), f"{actual} != {expected} (rtol {rtol})"


def assert_vec_close(actual, expected, rtol, atol=ATOL):
    """Per-entry comparison between two values of matching kind."""
    if isinstance(actual, SparseVector):
        assert isinstance(expected, SparseVector) and actual.dim == expected.dim
        for idx in set(actual.indices()) | set(expected.indices()):
            a, e = actual.get(idx), expected.get(idx)
            assert close(a, e, rtol, atol), f"entry {idx}: {a} != {e} (rtol {rtol})"
    elif isinstance(actual, np.ndarray):
        expected = np.asarray(expected)
        assert np.all(np.abs(actual - expected) <= atol + rtol * np.abs(expected))
    else:
        assert_scalar_close(actual, expected, rtol, atol)


def assert_state_matches(state, oracle, rtol, atol=ATOL):
    """Compare an online state against an oracle-built state, entry by entry."""
    assert state.user == oracle.user
    assert state.composition() == oracle.composition()
    assert state.group_count == oracle.group_count
    assert state.basket_count == oracle.basket_count
    assert_vec_close(state.user_vector, oracle.user_vector, rtol, atol)
    for got, want in zip(state.groups_oldest(), oracle.groups_oldest()):
        assert got.refs == want.refs
        assert_vec_close(got.vector, want.vector, rtol, atol)


class OracleMirror:
    """Drives the online rules while tracking composition + history independently.

    The mirror applies the documented composition rules directly (append to
    the last group iff it has room; drop a seq from its group; drop empty
    groups) so `expected_state()` is an independent recomputation, not a
    readback of the online structure.
    """

    def __init__(self, vocab: ItemVocabulary, params: HyperParams, user="u"):
        self.vocab = vocab
        self.params = params
        self.user = user
        self.state = None
        self.history: dict[int, Basket] = {}
        self.composition: list[list[int]] = []
        self.next_seq = 1

    def add(self, items, counter=None) -> Basket:
        basket = Basket(self.user, self.next_seq, frozenset(items), ts=self.next_seq)
        self.next_seq += 1
        self.state = add_basket(self.state, basket, self.params, self.vocab, counter=counter)
        self.history[basket.seq] = basket
        if self.composition and len(self.composition[-1]) < self.params.group_size:
            self.composition[-1].append(basket.seq)
        else:
            self.composition.append([basket.seq])
        return basket

    def delete_basket(self, seq, counter=None):
        result = delete_basket(self.state, self.history, seq, self.params, self.vocab,
                               counter=counter)
        del self.history[seq]
        for group in self.composition:
            if seq in group:
                group.remove(seq)
                break
        self.composition = [g for g in self.composition if g]
        self.state = None if result is REMOVED else result
        return result

    def delete_item(self, seq, item, counter=None):
        basket = self.history[seq]
        result = delete_item(self.state, self.history, seq, item, self.params, self.vocab,
                             counter=counter)
        if len(basket.items) == 1:
            del self.history[seq]
            for group in self.composition:
                if seq in group:
                    group.remove(seq)
                    break
            self.composition = [g for g in self.composition if g]
        else:
            self.history[seq] = Basket(basket.user, basket.seq, basket.items - {item}, basket.ts)
        self.state = None if result is REMOVED else result
        return result

    def retained_seqs(self) -> list:
        return sorted(self.history)

    def expected_state(self):
        if not self.composition:
            return None
        return recompute_from_groups(self.composition, self.history, self.params, self.vocab)

    def check(self, rtol=1e-6):
        expected = self.expected_state()
        if expected is None:
            assert self.state is None
        else:
            assert self.state is not None
            assert_state_matches(self.state, expected, rtol)


def random_mirror_walk(rng: random.Random, max_adds=50, max_items=20,
                       pure_adds=False, check_every=True, rtol=1e-6):
    """One randomized event sequence over a fresh mirror; returns the mirror."""
    n_items = rng.randint(1, max_items)
    vocab = ItemVocabulary.from_items(range(1, n_items + 1))
    params = HyperParams(
        group_size=rng.randint(1, 6),
        basket_decay=rng.choice([0.6, 0.7, 0.9, 1.0]),
        group_decay=rng.choice([0.6, 0.7, 0.9, 1.0]),
        neighbors=1,
        blend=1.0,
    )
    mirror = OracleMirror(vocab, params)
    adds_left = rng.randint(1, max_adds)
    steps = rng.randint(adds_left, adds_left * 2)
    for _ in range(steps):
        retained = mirror.retained_seqs()
        roll = rng.random()
        if pure_adds or not retained or roll < 0.55:
            if adds_left == 0:
                continue
            adds_left -= 1
            size = rng.randint(1, min(5, n_items))
            mirror.add(rng.sample(range(1, n_items + 1), size))
        elif roll < 0.8:
            mirror.delete_basket(rng.choice(retained))
        else:
            seq = rng.choice(retained)
            item = rng.choice(sorted(mirror.history[seq].items))
            mirror.delete_item(seq, item)
        if check_every:
            mirror.check(rtol=rtol)
    return mirror
