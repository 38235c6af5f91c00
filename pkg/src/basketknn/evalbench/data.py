"""Transaction ingestion and the on-disk dataset format.

Input is delimited text with (user, order-or-timestamp, item) columns; rows
sharing (user, order) form one basket, baskets are ordered by time ascending
and numbered seq 1..n per user. Malformed rows are skipped and reported with
their line numbers; more than 1% malformed rows is a hard failure.

Dataset files are JSON lines: a meta header line, then one line per basket.
"""

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone

from ..errors import IngestError
from ..model import Basket, ItemVocabulary
from ..store import user_sort_key

FORMATS = ("csv", "tafeng")

# column indices / header names per named format
_TAFENG_COLUMNS = {"user": "CUSTOMER_ID", "time": "TRANSACTION_DT", "item": "PRODUCT_ID"}


@dataclass
class Dataset:
    name: str
    vocab: ItemVocabulary
    baskets: dict  # user -> list[Basket], chronological, seq 1..n
    stats: dict = field(default_factory=dict)

    @property
    def user_count(self) -> int:
        return len(self.baskets)

    @property
    def basket_count(self) -> int:
        return sum(len(bs) for bs in self.baskets.values())

    def users(self) -> list:
        return sorted(self.baskets, key=user_sort_key)


def _order_key(raw: str):
    """Chronological sort key for an order column: number, date, or string."""
    try:
        return (0, float(raw), "")
    except ValueError:
        pass
    ts = _parse_date_ms(raw)
    if ts is not None:
        return (0, float(ts), "")
    return (1, 0.0, raw)


def _parse_date_ms(raw: str) -> int | None:
    for fmt in ("%Y-%m-%d", "%Y-%m-%d %H:%M:%S", "%m/%d/%Y", "%d/%m/%Y %H:%M"):
        try:
            dt = datetime.strptime(raw.strip(), fmt).replace(tzinfo=timezone.utc)
            return int(dt.timestamp() * 1000)
        except ValueError:
            continue
    return None


def _coerce_id(raw: str):
    raw = raw.strip()
    try:
        return int(raw)
    except ValueError:
        return raw


def load_transactions(
    path,
    fmt: str = "csv",
    delimiter: str = ",",
    user_col=0,
    time_col=1,
    item_col=2,
    has_header: bool = False,
    name: str | None = None,
    min_baskets_per_user: int | None = None,
    max_baskets_per_user: int | None = None,
    min_item_count: int | None = None,
) -> Dataset:
    """Parse a transaction file into per-user chronological baskets.

    Named formats fix the column mapping; the generic "csv" format takes
    column indices (or header names when `has_header`). Filters mirror the
    common pre-processing of the public datasets and default to off, so raw
    counts are reproduced unless asked otherwise.
    """
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")
    if fmt == "tafeng":
        user_col, time_col, item_col = (
            _TAFENG_COLUMNS["user"], _TAFENG_COLUMNS["time"], _TAFENG_COLUMNS["item"])
        has_header = True
        delimiter = ","

    malformed: list[tuple[int, str]] = []
    rows = 0
    orders: dict = {}  # (user, order_raw) -> set of items
    if isinstance(user_col, str) and not has_header:
        raise ValueError("column names need has_header=True")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        header = None
        if has_header:
            header = next(reader, None)
            if header is None:
                raise IngestError("empty input file")
            if isinstance(user_col, str):
                try:
                    user_col = header.index(user_col)
                    time_col = header.index(time_col)
                    item_col = header.index(item_col)
                except ValueError as exc:
                    raise IngestError(f"missing column: {exc}") from None
        for line_no, row in enumerate(reader, start=2 if header is not None else 1):
            rows += 1
            try:
                user = _coerce_id(row[user_col])
                order_raw = row[time_col].strip()
                item = _coerce_id(row[item_col])
                if row[user_col].strip() == "" or order_raw == "" or row[item_col].strip() == "":
                    raise ValueError("empty field")
            except (IndexError, ValueError) as exc:
                malformed.append((line_no, str(exc)))
                continue
            orders.setdefault((user, order_raw), set()).add(item)

    if rows and len(malformed) / rows > 0.01:
        raise IngestError(f"{len(malformed)} of {rows} rows malformed (>1%)")

    if min_item_count:
        counts: dict = {}
        for items in orders.values():
            for item in items:
                counts[item] = counts.get(item, 0) + 1
        keep = {item for item, c in counts.items() if c >= min_item_count}
        orders = {k: items & keep for k, items in orders.items()}
        orders = {k: items for k, items in orders.items() if items}

    per_user: dict = {}
    for (user, order_raw), items in orders.items():
        per_user.setdefault(user, []).append((order_raw, items))

    baskets: dict = {}
    for user in sorted(per_user, key=user_sort_key):
        entries = sorted(per_user[user], key=lambda e: _order_key(e[0]))
        if min_baskets_per_user and len(entries) < min_baskets_per_user:
            continue
        if max_baskets_per_user and len(entries) > max_baskets_per_user:
            continue
        user_baskets = []
        for seq, (order_raw, items) in enumerate(entries, start=1):
            ts = _parse_date_ms(order_raw)
            if ts is None:
                try:
                    ts = int(float(order_raw))
                except ValueError:
                    ts = 0
            user_baskets.append(Basket(user, seq, frozenset(items), ts))
        baskets[user] = user_baskets

    vocab = ItemVocabulary.from_items(
        item for bs in baskets.values() for b in bs for item in b.items
    )
    ds = Dataset(
        name=name or fmt,
        vocab=vocab,
        baskets=baskets,
        stats={
            "rows": rows,
            "malformed": len(malformed),
            "malformed_lines": malformed[:50],
            "users": len(baskets),
            "items": len(vocab),
            "baskets": sum(len(bs) for bs in baskets.values()),
        },
    )
    return ds


def save_dataset(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        meta = {"name": dataset.name, "users": dataset.user_count,
                "items": len(dataset.vocab), "baskets": dataset.basket_count}
        fh.write(json.dumps(meta) + "\n")
        for user in dataset.users():
            for basket in dataset.baskets[user]:
                rec = {"user": basket.user, "seq": basket.seq, "ts": basket.ts,
                       "items": sorted(basket.items, key=lambda it: (isinstance(it, str), it))}
                fh.write(json.dumps(rec) + "\n")


def load_dataset(path) -> Dataset:
    baskets: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        meta = json.loads(fh.readline())
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            basket = Basket(rec["user"], rec["seq"], frozenset(rec["items"]), rec.get("ts", 0))
            baskets.setdefault(basket.user, []).append(basket)
    for user_baskets in baskets.values():
        user_baskets.sort(key=lambda b: b.seq)
    vocab = ItemVocabulary.from_items(
        item for bs in baskets.values() for b in bs for item in b.items
    )
    return Dataset(name=meta.get("name", "dataset"), vocab=vocab, baskets=baskets,
                   stats={"users": len(baskets), "items": len(vocab),
                          "baskets": sum(len(bs) for bs in baskets.values())})
