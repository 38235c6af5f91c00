"""Leave-last-out evaluation: Recall@K and NDCG@K over three training modes.

For every user with at least two baskets the last basket is held out as the
truth; the model trains on the rest. Modes:

  * baseline:     batch training per user
  * incremental:  the same history fed through the online addition rule
  * decremental:  incremental, then ceil(users/1000) sampled users get
                  ceil(10%) of their train baskets deleted online

Recall@K = |top-K  truth| / |truth|. NDCG@K uses binary relevance with a
1/log2(rank+1) discount, normalized by the ideal DCG of min(|truth|, K).
"""

import math
import random
from dataclasses import dataclass, field

import numpy as np

from ..errors import NeighborlessUser
from ..model import HyperParams, train_from_scratch
from ..online import REMOVED, add_basket, delete_basket
from ..store import StateStore
from .data import Dataset

MODES = ("baseline", "incremental", "decremental")


@dataclass
class MetricsReport:
    mode: str
    user_count: int
    excluded: int
    recall: dict  # K -> mean recall
    ndcg: dict  # K -> mean NDCG
    sampled_users: tuple = ()
    per_user: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        out = {"mode": self.mode, "users": self.user_count, "excluded": self.excluded}
        for k in sorted(self.recall):
            out[f"recall@{k}"] = round(self.recall[k], 6)
            out[f"ndcg@{k}"] = round(self.ndcg[k], 6)
        return out


def recall_at_k(top_items, truth: set, k: int) -> float:
    if not truth:
        return 0.0
    return len(set(top_items[:k]) & truth) / len(truth)


def ndcg_at_k(top_items, truth: set, k: int) -> float:
    if not truth:
        return 0.0
    dcg = sum(1.0 / math.log2(rank + 1)
              for rank, item in enumerate(top_items[:k], start=1) if item in truth)
    ideal = sum(1.0 / math.log2(rank + 1) for rank in range(1, min(len(truth), k) + 1))
    return dcg / ideal


def build_store(dataset: Dataset, params: HyperParams, mode: str, seed: int = 0):
    """Train a store per the mode; returns (store, sampled_users)."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; choose from {MODES}")
    vocab = dataset.vocab
    store = StateStore()
    eligible = [u for u in dataset.users() if len(dataset.baskets[u]) >= 2]
    histories: dict = {}
    for user in eligible:
        train = dataset.baskets[user][:-1]
        history = {b.seq: b for b in train}
        if mode == "baseline":
            state = train_from_scratch(train, params, vocab)
        else:
            state = None
            for basket in train:
                state = add_basket(state, basket, params, vocab)
        store.install(user, state, history)
        histories[user] = history

    sampled: tuple = ()
    if mode == "decremental":
        rng = random.Random(seed)
        n_sampled = math.ceil(len(eligible) / 1000)
        sampled = tuple(rng.sample(eligible, n_sampled))
        for user in sampled:
            history = dict(histories[user])
            n_del = math.ceil(0.1 * len(history))
            doomed = rng.sample(sorted(history), n_del)
            state = store.get_state(user)
            for seq in doomed:
                state = delete_basket(state, history, seq, params, vocab)
                del history[seq]
                if state is REMOVED:
                    store.remove_user(user)
                    break
            else:
                store.install(user, state, history)
    return store, sampled


def evaluate(dataset: Dataset, params: HyperParams, mode: str = "baseline",
             ks=(10, 20), seed: int = 0, keep_per_user: bool = False) -> MetricsReport:
    """Run one mode end to end and average the ranking metrics over users."""
    ks = tuple(sorted(set(int(k) for k in ks)))
    eligible = [u for u in dataset.users() if len(dataset.baskets[u]) >= 2]
    excluded = dataset.user_count - len(eligible)
    store, sampled = build_store(dataset, params, mode, seed)
    top_by_user = bulk_top_items(store, params, dataset.vocab, eligible, max(ks) if ks else 10)

    recall_sums = {k: 0.0 for k in ks}
    ndcg_sums = {k: 0.0 for k in ks}
    per_user: dict = {}
    for user in eligible:
        truth = set(dataset.baskets[user][-1].items)
        top = top_by_user.get(user, [])
        scores = {}
        for k in ks:
            r = recall_at_k(top, truth, k)
            n = ndcg_at_k(top, truth, k)
            recall_sums[k] += r
            ndcg_sums[k] += n
            scores[f"recall@{k}"] = r
            scores[f"ndcg@{k}"] = n
        if keep_per_user:
            per_user[user] = scores

    count = len(eligible)
    return MetricsReport(
        mode=mode,
        user_count=count,
        excluded=excluded,
        recall={k: (recall_sums[k] / count if count else 0.0) for k in ks},
        ndcg={k: (ndcg_sums[k] / count if count else 0.0) for k in ks},
        sampled_users=sampled,
        per_user=per_user,
    )


def bulk_top_items(store: StateStore, params: HyperParams, vocab, targets, n: int,
                   chunk: int = 512) -> dict:
    """Vectorized prediction for many targets; matches the per-user path.

    Users absent from the store (removed by deletions) map to an empty list.
    Dense scratch matrices are used for the distance and ranking work; the
    store's sparse vectors remain the source of truth.
    """
    entries = store.states()
    if not entries:
        return {u: [] for u in targets}
    users = [u for u, _ in entries]
    pos = {u: i for i, u in enumerate(users)}
    dim = len(vocab)
    mat = np.zeros((len(users), dim), dtype=np.float64)
    for i, (_, state) in enumerate(entries):
        for idx, val in state.user_vector.items():
            mat[i, idx] = val

    alpha = params.blend
    ids = np.array([vocab.id_of(i) for i in range(dim)], dtype=object)
    out: dict = {}
    present = [u for u in targets if u in pos]
    for u in targets:
        if u not in pos:
            out[u] = []

    if alpha == 1.0:
        for u in present:
            row = mat[pos[u]]
            order = np.argsort(-row, kind="stable")[:n]
            out[u] = list(ids[order])
        return out

    if len(users) < 2:
        raise NeighborlessUser("blending needs at least two users in the store")
    k_nn = min(params.neighbors, len(users) - 1)
    norms = np.einsum("ij,ij->i", mat, mat)
    rows_idx = np.array([pos[u] for u in present], dtype=np.int64)
    for start in range(0, len(rows_idx), chunk):
        sel = rows_idx[start:start + chunk]
        block = mat[sel]
        d2 = norms[None, :] - 2.0 * (block @ mat.T) + norms[sel][:, None]
        d2[np.arange(len(sel)), sel] = np.inf  # exclude self
        nbr = np.argsort(d2, axis=1, kind="stable")[:, :k_nn]
        for j, row_i in enumerate(sel):
            mean = mat[nbr[j]].mean(axis=0)
            scores = alpha * mat[row_i] + (1.0 - alpha) * mean
            order = np.argsort(-scores, kind="stable")[:n]
            out[present[start + j]] = list(ids[order])
    return out
