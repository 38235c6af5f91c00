"""Command-line interface: ingest, evaluate, run, recommend, and benches."""

import json
import sys

import click

from .engine import Engine, read_events, write_reports
from .model import HyperParams, ItemVocabulary
from .recommend import predict
from .store import StateStore
from .evalbench import (
    bench_decremental,
    bench_incremental,
    error_growth,
    evaluate,
    load_dataset,
    load_transactions,
    save_dataset,
)
from .evalbench.bench import DELETION_ORDERS
from .evalbench.metrics import MODES


def _params_from_flags(preset, group_size, basket_decay, group_decay, neighbors, alpha) -> HyperParams:
    base = HyperParams.preset(preset) if preset else HyperParams()
    return HyperParams(
        group_size=group_size if group_size is not None else base.group_size,
        basket_decay=basket_decay if basket_decay is not None else base.basket_decay,
        group_decay=group_decay if group_decay is not None else base.group_decay,
        neighbors=neighbors if neighbors is not None else base.neighbors,
        blend=alpha if alpha is not None else base.blend,
    )


def _params_options(fn):
    for deco in reversed([
        click.option("--preset", type=click.Choice(sorted(HyperParams.PRESETS)), default=None,
                     help="Per-dataset hyper-parameter preset."),
        click.option("--group-size", type=int, default=None, help="Baskets per group (m)."),
        click.option("--basket-decay", type=float, default=None, help="Within-group decay rate."),
        click.option("--group-decay", type=float, default=None, help="Across-group decay rate."),
        click.option("--neighbors", type=int, default=None, help="kNN neighborhood size."),
        click.option("--alpha", type=float, default=None, help="Target/neighborhood blend weight."),
    ]):
        fn = deco(fn)
    return fn


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", encoding="utf-8")


def _emit_lines(path, records):
    fh = _open_out(path)
    try:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    finally:
        if fh is not sys.stdout:
            fh.close()


def _parse_user(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


@click.group()
def main():
    """Online next-basket recommendation: maintain, query, and benchmark."""


@main.command()
@click.argument("path", type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["csv", "tafeng"]), default="csv")
@click.option("--out", type=click.Path(), required=True, help="Dataset file to write.")
@click.option("--delimiter", default=",")
@click.option("--user-col", default="0", help="Column index, or name with --header.")
@click.option("--time-col", default="1")
@click.option("--item-col", default="2")
@click.option("--header/--no-header", "has_header", default=False)
@click.option("--name", default=None)
@click.option("--min-baskets-per-user", type=int, default=None)
@click.option("--max-baskets-per-user", type=int, default=None)
@click.option("--min-item-count", type=int, default=None)
def ingest(path, fmt, out, delimiter, user_col, time_col, item_col, has_header, name,
           min_baskets_per_user, max_baskets_per_user, min_item_count):
    """Parse a transaction file into a dataset file and print its stats."""
    def col(raw):
        return int(raw) if raw.lstrip("-").isdigit() else raw

    dataset = load_transactions(
        path, fmt=fmt, delimiter=delimiter,
        user_col=col(user_col), time_col=col(time_col), item_col=col(item_col),
        has_header=has_header, name=name,
        min_baskets_per_user=min_baskets_per_user,
        max_baskets_per_user=max_baskets_per_user,
        min_item_count=min_item_count,
    )
    save_dataset(dataset, out)
    click.echo(json.dumps({"name": dataset.name, **dataset.stats,
                           "malformed_lines": dataset.stats.get("malformed_lines", [])[:10]}))


@main.command("evaluate")
@click.option("--dataset", "dataset_path", type=click.Path(exists=True), required=True)
@click.option("--mode", type=click.Choice(MODES), default="baseline")
@click.option("--seed", type=int, default=0)
@click.option("--k", "ks", type=int, multiple=True, default=(10, 20))
@click.option("--per-user-out", type=click.Path(), default=None,
              help="Also write one metrics line per user.")
@_params_options
def evaluate_cmd(dataset_path, mode, seed, ks, per_user_out, preset, group_size,
                 basket_decay, group_decay, neighbors, alpha):
    """Leave-last-out Recall@K / NDCG@K for one training mode."""
    params = _params_from_flags(preset, group_size, basket_decay, group_decay, neighbors, alpha)
    dataset = load_dataset(dataset_path)
    report = evaluate(dataset, params, mode=mode, ks=ks, seed=seed,
                      keep_per_user=per_user_out is not None)
    click.echo(json.dumps(report.to_json_dict()))
    if per_user_out:
        _emit_lines(per_user_out,
                    ({"user": u, **scores} for u, scores in report.per_user.items()))


@main.command()
@click.argument("events_path", type=click.Path(exists=True))
@click.option("--workers", type=int, default=1)
@click.option("--snapshot", "snapshot_path", type=click.Path(), default=None,
              help="Write the final store snapshot here.")
@click.option("--reports", "reports_path", type=click.Path(), default="-",
              help="Report lines destination ('-' for stdout).")
@_params_options
def run(events_path, workers, snapshot_path, reports_path, preset, group_size,
        basket_decay, group_decay, neighbors, alpha):
    """Process an event file through the engine."""
    params = _params_from_flags(preset, group_size, basket_decay, group_decay, neighbors, alpha)
    events = read_events(events_path)
    vocab = ItemVocabulary.from_items(
        item for e in events if e.kind == "add" for item in e.items
    )
    store = StateStore()
    engine = Engine(store, vocab, params)
    reports = engine.run(events, workers=workers)
    fh = _open_out(reports_path)
    try:
        write_reports(fh, reports)
    finally:
        if fh is not sys.stdout:
            fh.close()
    if snapshot_path:
        store.snapshot(snapshot_path, vocab)


@main.command()
@click.option("--snapshot", "snapshot_path", type=click.Path(exists=True), required=True)
@click.option("--user", "user_raw", required=True)
@click.option("--n", type=int, default=10)
@_params_options
def recommend(snapshot_path, user_raw, n, preset, group_size, basket_decay, group_decay,
              neighbors, alpha):
    """Top-N recommendation for one user from a snapshot."""
    params = _params_from_flags(preset, group_size, basket_decay, group_decay, neighbors, alpha)
    store, vocab = StateStore.load(snapshot_path)
    prediction = predict(_parse_user(user_raw), params, store, vocab, n=n)
    click.echo(json.dumps({
        "user": prediction.user,
        "items": list(prediction.top_items),
        "scores": [round(prediction.scores.get(vocab.index_of(it)), 8)
                   for it in prediction.top_items],
    }))


@main.command("bench-incr")
@click.option("--grid", type=int, multiple=True, default=(100, 1000, 10000))
@click.option("--reps", type=int, default=3)
@click.option("--group-size", type=int, default=7)
@click.option("--out", type=click.Path(), default="-")
def bench_incr(grid, reps, group_size, out):
    """Per-addition latency along a growing single-user history."""
    report = bench_incremental(grid=grid, repetitions=reps, group_size=group_size)
    _emit_lines(out, report.to_json_lines())
    summary = {"kind": "incremental",
               **{f"median_ns@{g}": report.median_nanos_at(g) for g in report.meta["grid"]}}
    click.echo(json.dumps(summary), err=True)


@main.command("bench-decr")
@click.option("--order", type=click.Choice(DELETION_ORDERS), default="random")
@click.option("--n", type=int, default=5000)
@click.option("--seed", type=int, default=0)
@click.option("--group-size", type=int, default=None,
              help="Defaults to n (one enclosing group).")
@click.option("--out", type=click.Path(), default="-")
def bench_decr(order, n, seed, group_size, out):
    """Per-deletion latency draining a prebuilt history."""
    report = bench_decremental(order=order, n=n, seed=seed, group_size=group_size)
    _emit_lines(out, report.to_json_lines())
    touches = report.touch_counts
    click.echo(json.dumps({"kind": "decremental", "order": order,
                           "median_ns": report.median_nanos(),
                           "mean_touch": sum(touches) / len(touches)}), err=True)


@main.command("bench-error")
@click.option("--n-build", type=int, default=400)
@click.option("--n-deletions", type=int, default=380)
@click.option("--out", type=click.Path(), default="-")
def bench_error(n_build, n_deletions, out):
    """Relative-error growth under repeated deletions."""
    report = error_growth(n_build=n_build, n_deletions=n_deletions)
    _emit_lines(out, report.to_json_lines())
    click.echo(json.dumps({"kind": "error_growth", "slope_log10": report.slope,
                           "r_squared": report.r_squared,
                           "steps_to_one_percent": report.steps_to_one_percent}), err=True)


if __name__ == "__main__":
    main()
