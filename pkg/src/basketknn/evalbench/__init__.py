"""Dataset ingestion, ranking-metric evaluation, and latency benchmarks."""

from .bench import (
    ErrorGrowthReport,
    LatencyReport,
    bench_decremental,
    bench_incremental,
    error_growth,
    fit_log_linear,
)
from .data import Dataset, load_dataset, load_transactions, save_dataset
from .metrics import MetricsReport, bulk_top_items, evaluate, ndcg_at_k, recall_at_k

__all__ = [
    "Dataset",
    "ErrorGrowthReport",
    "LatencyReport",
    "MetricsReport",
    "bench_decremental",
    "bench_incremental",
    "bulk_top_items",
    "error_growth",
    "evaluate",
    "fit_log_linear",
    "load_dataset",
    "load_transactions",
    "ndcg_at_k",
    "recall_at_k",
    "save_dataset",
]
