"""Prediction: exact nearest-neighbor search over user vectors, blend, rank.

The prediction vector is blend * target + (1 - blend) * mean(neighbors),
where neighbors are the k nearest users by Euclidean distance over the raw
current user vectors. Neighbor search is brute force; ties break by
ascending user id, item ranking ties by ascending item id.
"""

import heapq
from dataclasses import dataclass

from .errors import NeighborlessUser, UnknownUser
from .model import HyperParams, ItemVocabulary
from .sparse import SparseVector
from .store import StateStore, user_sort_key


@dataclass(frozen=True)
class Prediction:
    user: object
    scores: SparseVector
    top_items: tuple


def nearest_neighbors(target, k_nn: int, store: StateStore) -> list:
    """The k_nn users closest to the target, excluding it; fewer if the store is small."""
    if k_nn < 1:
        raise ValueError("k_nn must be positive")
    target_state = store.get_state(target)
    if target_state is None:
        raise UnknownUser(f"user {target!r} has no state")
    tvec = target_state.user_vector
    ranked = []
    for user, state in store.states():
        if user == target:
            continue
        ranked.append((tvec.distance_sq(state.user_vector), user_sort_key(user), user))
    ranked.sort(key=lambda t: (t[0], t[1]))
    return [user for _, _, user in ranked[:k_nn]]


def predict(target, params: HyperParams, store: StateStore, vocab: ItemVocabulary, n: int = 10) -> Prediction:
    """Blend the target vector with its neighborhood mean and rank items."""
    target_state = store.get_state(target)
    if target_state is None:
        raise UnknownUser(f"user {target!r} has no state")
    tvec = target_state.user_vector
    alpha = params.blend
    if alpha == 1.0:
        scores = tvec
    else:
        neighbors = nearest_neighbors(target, params.neighbors, store)
        if not neighbors:
            raise NeighborlessUser(f"user {target!r} has no neighbors and blend < 1")
        total = SparseVector.zero(tvec.dim)
        for user in neighbors:
            total = total + store.get_state(user).user_vector
        mean = total / len(neighbors)
        scores = alpha * tvec + (1.0 - alpha) * mean
    return Prediction(user=target, scores=scores, top_items=tuple(top_n(scores, n, vocab)))


def top_n(scores: SparseVector, n: int, vocab: ItemVocabulary) -> list:
    """Top-n item ids by score; ties and zero scores rank by ascending item id."""
    if n < 1:
        raise ValueError("n must be positive")
    indices = heapq.nsmallest(
        n, range(len(vocab)), key=lambda i: (-scores.get(i), vocab.id_of(i))
    )
    return [vocab.id_of(i) for i in indices]
