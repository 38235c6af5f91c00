"""Engine event routing, rejection handling, and worker-count determinism."""

import io
import json
import random

from basketknn import Engine, Event, HyperParams, ItemVocabulary, StateStore, write_reports
from basketknn.engine import read_events

SEED = 55802


def make_engine(items=(1, 2, 3), group_size=2):
    store = StateStore()
    vocab = ItemVocabulary.from_items(items)
    params = HyperParams(group_size=group_size, basket_decay=0.9, group_decay=0.7)
    return Engine(store, vocab, params)


def add(user, seq, items, idx=0):
    return Event("add", user, seq, tuple(items), ingest_index=idx)


def test_cold_start_creates_state():
    engine = make_engine()
    report = engine.process_event(add("alice", 1, [1, 2]))
    assert report.status == "ok" and report.kind == "add"
    assert engine.store.get_state("alice").basket_count == 1
    assert report.touch_count == 2
    assert report.nanos >= 0


def test_delete_last_basket_removes_user():
    engine = make_engine()
    engine.process_event(add("alice", 1, [1]))
    report = engine.process_event(Event("delete_basket", "alice", 1))
    assert report.status == "removed"
    assert engine.store.get_state("alice") is None
    assert "alice" not in engine.store


def test_rejections_leave_store_untouched():
    engine = make_engine()
    engine.process_event(add("alice", 1, [1]))
    before = engine.store.get_state("alice")

    cases = [
        Event("delete_basket", "alice", 42),          # unknown seq
        Event("delete_basket", "bob", 1),             # unknown user
        Event("delete_item", "alice", 1, item=2),     # item not in basket
        Event("add", "alice", 1, (2,)),               # out of order
        Event("add", "alice", 7, (99,)),              # unknown item
        Event("add", "alice", 8, ()),                 # empty basket
        Event("invalid", None, None, note="bad json"),
    ]
    for event in cases:
        report = engine.process_event(event)
        assert report.status == "rejected", event
        assert report.error
    assert engine.store.get_state("alice") is before
    engine.store.check_integrity()


def test_item_deletion_paths():
    engine = make_engine()
    engine.process_event(add("alice", 1, [1, 2]))
    engine.process_event(add("alice", 2, [3]))
    report = engine.process_event(Event("delete_item", "alice", 1, item=2))
    assert report.status == "ok"
    assert engine.store.get_history("alice")[1].items == frozenset({1})
    # sole-item basket: falls back to basket removal
    report = engine.process_event(Event("delete_item", "alice", 2, item=3))
    assert report.status == "ok"
    assert list(engine.store.get_history("alice")) == [1]
    # final item of the final basket: user removed
    report = engine.process_event(Event("delete_item", "alice", 1, item=1))
    assert report.status == "removed"
    assert engine.store.get_state("alice") is None


def test_per_user_histories_stay_in_seq_order():
    engine = make_engine()
    events = []
    idx = 0
    for seq in (1, 2, 3):
        for user in ("a", "b", "c"):
            events.append(add(user, seq, [1], idx))
            idx += 1
    reports = engine.run(events, workers=1)
    assert all(r.status == "ok" for r in reports)
    for user in ("a", "b", "c"):
        assert list(engine.store.get_history(user)) == [1, 2, 3]


def test_empty_source_produces_no_reports():
    engine = make_engine()
    assert engine.run([], workers=4) == []


def random_events(rng, n_users=4, n_events=40):
    events = []
    seqs = {u: 0 for u in range(n_users)}
    live = {u: [] for u in range(n_users)}
    for idx in range(n_events):
        user = rng.randrange(n_users)
        if not live[user] or rng.random() < 0.6:
            seqs[user] += 1
            items = rng.sample([1, 2, 3, 4, 5], rng.randint(1, 3))
            events.append(Event("add", user, seqs[user], tuple(items), ingest_index=idx))
            live[user].append(seqs[user])
        elif rng.random() < 0.7:
            seq = rng.choice(live[user])
            live[user].remove(seq)
            events.append(Event("delete_basket", user, seq, ingest_index=idx))
        else:
            seq = rng.choice(live[user])
            events.append(Event("delete_item", user, seq, item=rng.randint(1, 5),
                                ingest_index=idx))
    return events


def run_to_snapshot(events, workers):
    engine = make_engine(items=(1, 2, 3, 4, 5))
    engine.run(events, workers=workers)
    buf = io.BytesIO()
    engine.store.write_snapshot(buf, engine.vocab)
    return buf.getvalue()


def test_worker_count_does_not_change_the_snapshot():
    rng = random.Random(SEED)
    for _ in range(10):
        events = random_events(rng)
        snapshots = {w: run_to_snapshot(events, w) for w in (1, 2, 8)}
        assert snapshots[1] == snapshots[2] == snapshots[8]


def test_reports_cover_every_event_in_ingest_order():
    rng = random.Random(SEED + 1)
    events = random_events(rng, n_events=30)
    engine = make_engine(items=(1, 2, 3, 4, 5))
    reports = engine.run(events, workers=3)
    assert [r.ingest_index for r in reports] == [e.ingest_index for e in events]


def test_event_file_round_trip(tmp_path):
    lines = [
        {"type": "add", "user": "u", "seq": 1, "items": [1, 2], "ts": 5},
        {"type": "add", "user": "u", "seq": 2, "items": [3]},
        {"type": "delete_item", "user": "u", "seq": 1, "item": 2},
        {"type": "delete_basket", "user": "u", "seq": 2},
        {"type": "nonsense", "user": "u", "seq": 3},
    ]
    path = tmp_path / "events.jsonl"
    path.write_text("\n".join(json.dumps(obj) for obj in lines) + "\nnot json\n")
    events = read_events(path)
    assert [e.kind for e in events] == ["add", "add", "delete_item", "delete_basket",
                                        "invalid", "invalid"]
    assert events[0].ts == 5 and events[0].items == (1, 2)

    engine = make_engine()
    reports = engine.run(events, workers=1)
    assert [r.status for r in reports] == ["ok", "ok", "ok", "ok", "rejected", "rejected"]
    out = io.StringIO()
    write_reports(out, reports)
    recs = [json.loads(line) for line in out.getvalue().splitlines()]
    assert all(set(r) >= {"user", "kind", "status", "touch_count", "nanos"} for r in recs)
    assert recs[-1]["status"] == "rejected" and "error" in recs[-1]
