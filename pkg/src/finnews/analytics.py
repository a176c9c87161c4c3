"""Report persistence, sentiment feature encoding, and risk statistics.

The store is an append-only JSONL file with an in-memory entity index
rebuilt on open. Sentiment features feed a bootstrap-resampled OLS that
produces a predictive sample cloud per held-out row, from which value at
risk is read off as a lower empirical quantile (default alpha = 0.05).
"""

from __future__ import annotations

import csv
import json
import math
import os
import threading
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .report_parser import AnalysisReport, EntitySentiment, report_from_json, report_to_json

SENTIMENT_ORDINAL = {"negative": -1.0, "neutral": 0.0, "positive": 1.0}
ONE_HOT_ORDER = ("negative", "neutral", "positive")

FEATURE_CSV_HEADER = (
    "entity",
    "window_start",
    "window_end",
    "n_negative",
    "n_neutral",
    "n_positive",
    "ordinal_mean",
)


class StoreError(Exception):
    """Raised when the report store cannot read or append a record."""


@dataclass(frozen=True)
class StoreRecord:
    record_id: int
    article_id: str
    date: date | None
    report: AnalysisReport


class ReportStore:
    """Append-only report log with a case-insensitive entity index.

    Single writer, many readers: the index and record list only ever grow,
    and both are updated under a lock after the line is durably on disk.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.RLock()
        self._records: list[StoreRecord] = []
        self._index: dict[str, list[tuple[int, int]]] = {}
        if self.path.exists():
            self._replay()

    def _replay(self) -> None:
        with self.path.open("r", encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    record = StoreRecord(
                        record_id=int(obj["record_id"]),
                        article_id=obj["article_id"],
                        date=date.fromisoformat(obj["date"]) if obj.get("date") else None,
                        report=report_from_json(obj["report"]),
                    )
                except (KeyError, ValueError, json.JSONDecodeError) as exc:
                    raise StoreError(f"{self.path}:{line_no}: corrupt record: {exc}") from exc
                self._commit(record)

    def _commit(self, record: StoreRecord) -> None:
        position = len(self._records)
        self._records.append(record)
        for entity_idx, entity in enumerate(record.report.entities):
            self._index.setdefault(entity.entity.lower(), []).append((position, entity_idx))

    def append_report(
        self, article_id: str, when: date | None, report: AnalysisReport
    ) -> int:
        """Durably append one record; returns its id. Append-only, no upsert."""
        if not article_id:
            raise ValueError("article_id must be non-empty")
        with self._lock:
            record_id = self._records[-1].record_id + 1 if self._records else 1
            record = StoreRecord(record_id, article_id, when, report)
            line = json.dumps(
                {
                    "record_id": record_id,
                    "article_id": article_id,
                    "date": when.isoformat() if when else None,
                    "report": report_to_json(report),
                },
                ensure_ascii=False,
            )
            try:
                with self.path.open("a", encoding="utf-8") as handle:
                    handle.write(line + "\n")
                    handle.flush()
                    os.fsync(handle.fileno())
            except OSError as exc:
                raise StoreError(f"append failed, store unchanged: {exc}") from exc
            self._commit(record)
            return record_id

    def query_by_entity(
        self,
        entity: str,
        window: tuple[date, date] | None = None,
    ) -> list[tuple[int, EntitySentiment, date | None]]:
        """Exact case-insensitive entity lookup, optionally date-windowed.

        The window is inclusive on both ends; undated records only match
        windowless queries.
        """
        with self._lock:
            hits = list(self._index.get(entity.lower(), ()))
            rows = []
            for position, entity_idx in hits:
                record = self._records[position]
                if window is not None:
                    if record.date is None:
                        continue
                    start, end = window
                    if not start <= record.date <= end:
                        continue
                rows.append(
                    (record.record_id, record.report.entities[entity_idx], record.date)
                )
            return rows

    def records(self) -> list[StoreRecord]:
        with self._lock:
            return list(self._records)

    def stats(self) -> dict[str, int]:
        with self._lock:
            return {
                "records": len(self._records),
                "index_entries": sum(len(v) for v in self._index.values()),
                "entities": len(self._index),
            }


def encode_sentiment(sentiment: str, scheme: str = "ordinal"):
    """Encode a sentiment as ordinal (-1/0/+1) or a one-hot 3-vector."""
    if sentiment not in SENTIMENT_ORDINAL:
        raise ValueError(f"not a valid sentiment: {sentiment!r}")
    if scheme == "ordinal":
        return SENTIMENT_ORDINAL[sentiment]
    if scheme == "one_hot":
        return tuple(1.0 if sentiment == s else 0.0 for s in ONE_HOT_ORDER)
    raise ValueError(f"unknown scheme: {scheme!r}")


@dataclass(frozen=True)
class FeatureVector:
    entity: str
    window_start: date | None
    window_end: date | None
    n_negative: int
    n_neutral: int
    n_positive: int

    @property
    def total(self) -> int:
        return self.n_negative + self.n_neutral + self.n_positive

    @property
    def ordinal_mean(self) -> float:
        return (self.n_positive - self.n_negative) / max(1, self.total)


def aggregate_features(
    store: ReportStore,
    entity: str,
    windows: Sequence[tuple[date, date] | None],
) -> list[FeatureVector]:
    """Per-window sentiment counts for one entity.

    Dated windows must be ordered and non-overlapping; None means an
    unwindowed aggregate over every record, dated or not.
    """
    dated = [w for w in windows if w is not None]
    for start, end in dated:
        if start > end:
            raise ValueError(f"window start {start} after end {end}")
    for (_, prev_end), (next_start, _) in zip(dated, dated[1:]):
        if next_start <= prev_end:
            raise ValueError("windows must be ordered and non-overlapping")

    features = []
    for window in windows:
        counts = {"negative": 0, "neutral": 0, "positive": 0}
        for _, entity_sentiment, _ in store.query_by_entity(entity, window):
            counts[entity_sentiment.sentiment] += 1
        features.append(
            FeatureVector(
                entity=entity,
                window_start=window[0] if window else None,
                window_end=window[1] if window else None,
                n_negative=counts["negative"],
                n_neutral=counts["neutral"],
                n_positive=counts["positive"],
            )
        )
    return features


def export_features_csv(features: Iterable[FeatureVector], path: str | Path) -> int:
    rows = 0
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(FEATURE_CSV_HEADER)
        for fv in features:
            writer.writerow(
                [
                    fv.entity,
                    fv.window_start.isoformat() if fv.window_start else "",
                    fv.window_end.isoformat() if fv.window_end else "",
                    fv.n_negative,
                    fv.n_neutral,
                    fv.n_positive,
                    repr(fv.ordinal_mean),
                ]
            )
            rows += 1
    return rows


@dataclass(frozen=True)
class PredictiveDistribution:
    samples: tuple[float, ...]
    source: str = "bootstrap"

    def __post_init__(self) -> None:
        if not self.samples:
            raise ValueError("a predictive distribution needs at least one sample")


@dataclass
class BootstrapRegressionResult:
    distributions: list[PredictiveDistribution]
    coefficient_draws: np.ndarray  # (draws, n_features + 1), intercept first
    singular_retries: int = 0


def fit_bootstrap_regression(
    train_x: np.ndarray,
    train_y: np.ndarray,
    heldout_x: np.ndarray,
    draws: int = 1000,
    seed: int = 0,
    max_retries_per_draw: int = 100,
) -> BootstrapRegressionResult:
    """Bootstrap-resampled OLS giving a predictive sample cloud per row.

    Each draw refits ordinary least squares (with intercept) on a
    resampled-with-replacement training set and predicts every held-out
    row. Singular resamples are redrawn (bounded) and counted. Fully
    deterministic under the seed.
    """
    train_x = np.atleast_2d(np.asarray(train_x, dtype=float))
    heldout_x = np.atleast_2d(np.asarray(heldout_x, dtype=float))
    train_y = np.asarray(train_y, dtype=float)
    n, p = train_x.shape
    if train_y.shape != (n,):
        raise ValueError(f"y has shape {train_y.shape}, expected ({n},)")
    if heldout_x.shape[1] != p:
        raise ValueError("held-out rows must have the same feature count")
    if n < p + 2:
        raise ValueError(f"need at least {p + 2} training rows, got {n}")
    if draws < 100:
        raise ValueError("draws must be >= 100")

    rng = np.random.default_rng(seed)
    design = np.column_stack([np.ones(n), train_x])
    heldout_design = np.column_stack([np.ones(len(heldout_x)), heldout_x])

    coefficients = np.empty((draws, p + 1))
    predictions = np.empty((draws, len(heldout_x)))
    singular_retries = 0
    for draw in range(draws):
        for _ in range(max_retries_per_draw + 1):
            idx = rng.integers(0, n, size=n)
            coefs, _, rank, _ = np.linalg.lstsq(design[idx], train_y[idx], rcond=None)
            if rank == p + 1:
                break
            singular_retries += 1
        else:
            raise RuntimeError(
                f"draw {draw}: design stayed singular after {max_retries_per_draw} resamples"
            )
        coefficients[draw] = coefs
        predictions[draw] = heldout_design @ coefs

    distributions = [
        PredictiveDistribution(samples=tuple(predictions[:, j]))
        for j in range(len(heldout_x))
    ]
    return BootstrapRegressionResult(
        distributions=distributions,
        coefficient_draws=coefficients,
        singular_retries=singular_retries,
    )


def var_quantile(dist: PredictiveDistribution | Sequence[float], alpha: float = 0.05) -> float:
    """Value at risk as the lower empirical alpha-quantile.

    Returns the ceil(alpha * N)-th order statistic, so at least
    (1 - alpha) * N samples are >= the returned value. No interpolation.
    """
    samples = dist.samples if isinstance(dist, PredictiveDistribution) else dist
    if len(samples) == 0:
        raise ValueError("empty distribution")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    arr = np.asarray(samples, dtype=float)
    k = math.ceil(alpha * arr.size)
    return float(np.partition(arr, k - 1)[k - 1])
