"""Online-maintained next-basket recommendation.

User vectors are hierarchical time-decayed averages of basket multi-hot
vectors. They are kept exact online: basket additions cost O(1) and basket or
item deletions touch only the slice of stored elements after the deletion
point. A kNN blend over user vectors produces recommendations, and the
evalbench subpackage reproduces the accuracy, latency, and error-growth
experiments.
"""

from .decay import (
    DecayedAverage,
    TouchCounter,
    decayed_average,
    decr_update,
    decr_update_indices,
    incr_update,
    inplace_update,
)
from .engine import Engine, Event, UpdateReport, read_events, write_reports
from .errors import BasketKnnError
from .model import (
    Basket,
    Group,
    HyperParams,
    ItemVocabulary,
    UserState,
    multi_hot,
    recompute_from_groups,
    train_from_scratch,
)
from .online import (
    REMOVED,
    DeletionRequest,
    Removed,
    add_basket,
    apply_deletion,
    delete_basket,
    delete_item,
)
from .recommend import Prediction, nearest_neighbors, predict, top_n
from .sparse import SparseVector
from .store import AddBasket, RemoveBasket, RemoveItem, StateStore

__all__ = [
    "AddBasket",
    "Basket",
    "BasketKnnError",
    "DecayedAverage",
    "DeletionRequest",
    "Engine",
    "Event",
    "Group",
    "HyperParams",
    "ItemVocabulary",
    "Prediction",
    "REMOVED",
    "RemoveBasket",
    "RemoveItem",
    "Removed",
    "SparseVector",
    "StateStore",
    "TouchCounter",
    "UpdateReport",
    "UserState",
    "add_basket",
    "apply_deletion",
    "decayed_average",
    "decr_update",
    "decr_update_indices",
    "delete_basket",
    "delete_item",
    "incr_update",
    "inplace_update",
    "multi_hot",
    "nearest_neighbors",
    "predict",
    "read_events",
    "recompute_from_groups",
    "top_n",
    "train_from_scratch",
    "write_reports",
]
