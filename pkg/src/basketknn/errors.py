"""Exception types shared across the package."""


class BasketKnnError(Exception):
    """Base class for all library errors."""


class EmptySeries(BasketKnnError):
    """An operation required a non-empty series or slice."""


class DimensionMismatch(BasketKnnError):
    """Vector operands have incompatible dimensions."""


class SoleElement(BasketKnnError):
    """Deletion from a one-element series; the caller owns state removal."""


class IndexOutOfRange(BasketKnnError):
    """A series position lies outside the tracked element count."""


class UnknownItem(BasketKnnError):
    """An item id is not covered by the vocabulary."""


class EmptyHistory(BasketKnnError):
    """Model construction requires at least one basket."""


class MissingBasket(BasketKnnError):
    """A sequence number does not resolve to a retained basket."""


class OutOfOrderBasket(BasketKnnError):
    """An added basket does not advance past every retained sequence number."""


class ItemNotInBasket(BasketKnnError):
    """An item deletion referenced an item the basket does not contain."""


class ConsistencyViolation(BasketKnnError):
    """A state/history update would break referential integrity."""


class SnapshotCorrupt(BasketKnnError):
    """A snapshot file failed to parse; carries the failing byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class UnknownUser(BasketKnnError):
    """The requested user has no state in the store."""


class NeighborlessUser(BasketKnnError):
    """Blending requires neighbors but the store holds no other users."""


class IngestError(BasketKnnError):
    """Transaction ingestion failed hard (too many malformed rows)."""
