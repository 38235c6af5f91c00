"""Online additions and deletions against the recompute oracle."""

import random

import pytest

from basketknn import (
    Basket,
    HyperParams,
    ItemVocabulary,
    REMOVED,
    TouchCounter,
    add_basket,
    delete_basket,
    delete_item,
    train_from_scratch,
)
from basketknn.errors import ItemNotInBasket, MissingBasket, OutOfOrderBasket

from helpers import OracleMirror, assert_state_matches, assert_vec_close, random_mirror_walk

SEED = 61409


def single_item_setup():
    vocab = ItemVocabulary.from_items([1])
    params = HyperParams(group_size=2, basket_decay=0.9, group_decay=0.7)
    return vocab, params


def test_first_basket_becomes_the_user_vector():
    vocab = ItemVocabulary.from_items([1, 2])
    state = add_basket(None, Basket("u", 1, {1}), HyperParams(), vocab)
    assert state.user_vector.to_dense().tolist() == [1, 0]
    assert state.composition() == [[1]]


def test_add_worked_examples():
    vocab, params = single_item_setup()
    mirror = OracleMirror(vocab, params)
    mirror.add({1})
    assert mirror.state.user_vector.get(0) == pytest.approx(1.0)
    mirror.add({1})  # fills the group: (0.9 + 1) / 2 at both levels
    assert mirror.state.user_vector.get(0) == pytest.approx(0.95)
    assert mirror.state.last_group.vector.get(0) == pytest.approx(0.95)
    mirror.add({1})  # opens a group: (1 * 0.7 * 0.95 + 1) / 2
    assert mirror.state.user_vector.get(0) == pytest.approx(0.8325)
    assert mirror.state.composition() == [[1, 2], [3]]
    expected = train_from_scratch(sorted(mirror.history.values(), key=lambda b: b.seq),
                                  params, vocab)
    assert_state_matches(mirror.state, expected, 1e-12)


def test_delete_last_single_basket_group_restores_prior_vector():
    vocab, params = single_item_setup()
    mirror = OracleMirror(vocab, params)
    for _ in range(3):
        mirror.add({1})
    mirror.delete_basket(3)
    assert mirror.state.user_vector.get(0) == pytest.approx(0.95)
    assert mirror.state.composition() == [[1, 2]]
    mirror.check(rtol=1e-9)


def test_delete_from_multi_basket_group_worked_example():
    vocab, params = single_item_setup()
    mirror = OracleMirror(vocab, params)
    for _ in range(3):
        mirror.add({1})
    mirror.delete_basket(1)  # group 1 slice [b1, b2]: vector becomes 1.0
    assert mirror.state.composition() == [[2], [3]]
    assert mirror.state.groups_oldest()[0].vector.get(0) == pytest.approx(1.0)
    assert mirror.state.user_vector.get(0) == pytest.approx(0.85)
    mirror.check(rtol=1e-9)


def test_delete_only_basket_removes_user():
    vocab, params = single_item_setup()
    mirror = OracleMirror(vocab, params)
    mirror.add({1})
    assert mirror.delete_basket(1) is REMOVED
    assert mirror.state is None


def test_delete_item_worked_example():
    vocab = ItemVocabulary.from_items([1, 2])
    params = HyperParams(group_size=2, basket_decay=0.9, group_decay=0.7)
    mirror = OracleMirror(vocab, params)
    mirror.add({1, 2})
    mirror.delete_item(1, 2)
    assert mirror.state.user_vector.to_dense().tolist() == [1, 0]
    assert mirror.state.groups_oldest()[0].vector.to_dense().tolist() == [1, 0]
    mirror.check(rtol=1e-9)


def test_delete_sole_item_falls_back_to_basket_deletion():
    vocab = ItemVocabulary.from_items([1, 2])
    params = HyperParams(group_size=2)
    mirror = OracleMirror(vocab, params)
    mirror.add({1})
    mirror.add({2})
    mirror.delete_item(1, 1)
    assert mirror.state.composition() == [[2]]
    mirror.check(rtol=1e-9)
    # and removing the genuinely last item removes the user
    mirror2 = OracleMirror(vocab, params)
    mirror2.add({2})
    assert mirror2.delete_item(1, 2) is REMOVED


def test_error_cases():
    vocab = ItemVocabulary.from_items([1, 2])
    params = HyperParams(group_size=2)
    state = add_basket(None, Basket("u", 5, {1}), params, vocab)
    history = {5: Basket("u", 5, {1})}
    with pytest.raises(OutOfOrderBasket):
        add_basket(state, Basket("u", 5, {2}), params, vocab)
    with pytest.raises(OutOfOrderBasket):
        add_basket(state, Basket("u", 4, {2}), params, vocab)
    with pytest.raises(MissingBasket):
        delete_basket(state, history, 7, params, vocab)
    with pytest.raises(MissingBasket):
        delete_item(state, history, 7, 1, params, vocab)
    with pytest.raises(ItemNotInBasket):
        delete_item(state, history, 5, 2, params, vocab)


def test_seq_can_be_reused_after_deletion_only_if_newest():
    vocab = ItemVocabulary.from_items([1])
    params = HyperParams(group_size=2)
    mirror = OracleMirror(vocab, params)
    mirror.add({1})
    mirror.add({1})
    mirror.delete_basket(2)
    # max retained is 1, so seq 2 is addable again
    state = add_basket(mirror.state, Basket("u", 2, {1}), params, vocab)
    assert state.composition() == [[1, 2]]


def test_additions_after_deletions_fill_ragged_last_group():
    vocab = ItemVocabulary.from_items([1, 2])
    params = HyperParams(group_size=2, basket_decay=0.9, group_decay=0.7)
    mirror = OracleMirror(vocab, params)
    for items in ({1}, {2}, {1, 2}, {2}):
        mirror.add(items)
    mirror.delete_basket(4)  # last group now ragged: [[1, 2], [3]]
    assert mirror.state.composition() == [[1, 2], [3]]
    mirror.add({2})  # joins the ragged last group
    assert mirror.state.composition() == [[1, 2], [3, 5]]
    mirror.check(rtol=1e-9)
    mirror.add({1})  # last group full again: opens a new one
    assert mirror.state.composition() == [[1, 2], [3, 5], [6]]
    mirror.check(rtol=1e-9)


def test_emptying_a_middle_group_reindexes_later_groups():
    vocab = ItemVocabulary.from_items([1, 2])
    params = HyperParams(group_size=2, basket_decay=0.9, group_decay=0.7)
    mirror = OracleMirror(vocab, params)
    for items in ({1}, {2}, {1, 2}, {2}, {1}):
        mirror.add(items)
    assert mirror.state.composition() == [[1, 2], [3, 4], [5]]
    mirror.delete_basket(3)
    mirror.check(rtol=1e-9)
    mirror.delete_basket(4)  # middle group vanishes
    assert mirror.state.composition() == [[1, 2], [5]]
    mirror.check(rtol=1e-9)


def test_pure_add_sequences_match_batch_training():
    rng = random.Random(SEED)
    for _ in range(40):
        mirror = random_mirror_walk(rng, max_adds=50, max_items=20, pure_adds=True,
                                    check_every=False)
        if mirror.state is None:
            continue
        expected = train_from_scratch(sorted(mirror.history.values(), key=lambda b: b.seq),
                                      mirror.params, mirror.vocab)
        assert_state_matches(mirror.state, expected, 1e-12)


def test_mixed_sequences_match_recompute_oracle():
    rng = random.Random(SEED + 1)
    for _ in range(60):
        random_mirror_walk(rng, max_adds=40, max_items=15, check_every=True, rtol=1e-6)


def test_add_then_delete_inverts_user_vector():
    rng = random.Random(SEED + 2)
    for _ in range(40):
        mirror = random_mirror_walk(rng, max_adds=25, max_items=10, check_every=False)
        if mirror.state is None:
            continue
        before = mirror.state.user_vector
        basket = mirror.add({1})
        mirror.delete_basket(basket.seq)
        assert mirror.state is not None
        assert_vec_close(mirror.state.user_vector, before, 1e-9)


def test_addition_touch_count_is_constant():
    vocab, params = single_item_setup()
    mirror = OracleMirror(vocab, params)
    for _ in range(20):
        counter = TouchCounter()
        mirror.add({1}, counter=counter)
        assert counter.count == 2


def test_deletion_touch_count_respects_slice_bound():
    rng = random.Random(SEED + 3)
    for _ in range(30):
        mirror = random_mirror_walk(rng, max_adds=30, max_items=8, pure_adds=True,
                                    check_every=False)
        if mirror.state is None or mirror.state.basket_count < 2:
            continue
        seq = rng.choice(mirror.retained_seqs())
        k = mirror.state.group_count
        pos, group, idx = mirror.state.find(seq)
        tau, i = group.size, idx + 1
        j = k - pos
        counter = TouchCounter()
        mirror.delete_basket(seq, counter=counter)
        assert counter.count <= (tau - i + 1) + (k - j + 1)


def test_deleting_the_last_basket_touches_at_most_two():
    vocab = ItemVocabulary.from_items([1])
    for m in (1, 2, 7, 2000):
        params = HyperParams(group_size=m, basket_decay=0.9, group_decay=0.7)
        mirror = OracleMirror(vocab, params)
        for _ in range(300):
            mirror.add({1})
        for _ in range(100):
            counter = TouchCounter()
            mirror.delete_basket(mirror.state.max_seq, counter=counter)
            assert counter.count <= 2
