"""News corpus ingestion, text normalization, and deterministic train/validation splits."""

from __future__ import annotations

import csv
import hashlib
import json
import re
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import Mapping


class CorpusError(Exception):
    """Unreadable input or a malformed row in strict mode."""


# Canonical ingestion schema; CSV sources may remap via column_map.
CANONICAL_COLUMNS = ("id", "publisher", "date", "title", "text")

# Control characters that are not whitespace; whitespace control chars
# (\t \n \r \x0b \x0c) are handled by the run-collapsing step instead.
_CONTROLS = re.compile(r"[\x00-\x08\x0e-\x1f\x7f]")
_WS_RUNS = re.compile(r"\s+")


def clean_text(raw: str) -> str:
    """Strip non-whitespace control characters and collapse whitespace runs.

    Total, idempotent, and never lengthens its input.
    """
    return _WS_RUNS.sub(" ", _CONTROLS.sub("", raw)).strip()


@dataclass(frozen=True)
class NewsArticle:
    id: str
    publisher: str
    title: str
    body: str
    published_at: date | None = None


@dataclass(frozen=True)
class SplitSpec:
    validation_fraction: float = 0.25
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError(
                f"validation_fraction must be in (0, 1), got {self.validation_fraction}"
            )


@dataclass
class LoadResult:
    """Articles plus an account of rows that did not become articles."""

    articles: list[NewsArticle]
    dropped_empty: int = 0
    skipped: list[tuple[int, str]] = field(default_factory=list)

    @property
    def loaded(self) -> int:
        return len(self.articles)


_DATE_FORMATS = ("%Y-%m-%d", "%Y/%m/%d", "%Y-%m-%d %H:%M:%S", "%d.%m.%Y")


def _parse_date(value: str) -> date:
    value = value.strip()
    try:
        return datetime.fromisoformat(value).date()
    except ValueError:
        pass
    for fmt in _DATE_FORMATS:
        try:
            return datetime.strptime(value, fmt).date()
        except ValueError:
            continue
    raise ValueError(f"unparseable date: {value!r}")


def _derived_id(title: str, body: str) -> str:
    digest = hashlib.sha256(f"{title}\x1f{body}".encode("utf-8")).hexdigest()
    return digest[:16]


def _row_to_article(row: Mapping[str, object], line_no: int) -> NewsArticle | None:
    """Build one article from a canonical-keyed row; None means empty body."""
    body = clean_text(str(row.get("text") or ""))
    if not body:
        return None
    title = clean_text(str(row.get("title") or ""))
    raw_id = row.get("id")
    article_id = str(raw_id).strip() if raw_id not in (None, "") else _derived_id(title, body)
    publisher = str(row.get("publisher") or "")
    raw_date = row.get("date")
    published_at = None
    if raw_date not in (None, ""):
        published_at = _parse_date(str(raw_date))
    return NewsArticle(
        id=article_id,
        publisher=publisher,
        title=title,
        body=body,
        published_at=published_at,
    )


def _iter_csv(path: Path, column_map: Mapping[str, str]):
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise CorpusError(f"{path}: empty file, header row required")
        missing = [src for src in (column_map["text"],) if src not in reader.fieldnames]
        if missing:
            raise CorpusError(f"{path}: header lacks required column(s) {missing}")
        for line_no, row in enumerate(reader, start=2):
            yield line_no, {canon: row.get(src) for canon, src in column_map.items()}


def _iter_jsonl(path: Path):
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise ValueError("line is not a JSON object")
            yield line_no, {k: obj.get(k) for k in CANONICAL_COLUMNS}


def load_articles(
    path: str | Path,
    format: str = "csv",
    column_map: Mapping[str, str] | None = None,
    tolerant: bool = True,
) -> LoadResult:
    """Load articles from a CSV (header required) or JSONL file.

    Rows with an empty body after cleaning are dropped and counted.
    Malformed rows (bad JSON, bad date, duplicate id) are skipped with a
    line-numbered note in tolerant mode and fatal otherwise.
    """
    path = Path(path)
    if format not in ("csv", "jsonl"):
        raise ValueError(f"format must be 'csv' or 'jsonl', got {format!r}")
    if not path.exists():
        raise CorpusError(f"{path}: no such file")

    mapping = dict(zip(CANONICAL_COLUMNS, CANONICAL_COLUMNS))
    if column_map:
        mapping.update(column_map)

    result = LoadResult(articles=[])
    seen_ids: set[str] = set()
    rows = _iter_csv(path, mapping) if format == "csv" else _iter_jsonl(path)
    while True:
        try:
            line_no, row = next(rows)
        except StopIteration:
            break
        except (json.JSONDecodeError, ValueError, UnicodeDecodeError) as exc:
            raise CorpusError(f"{path}: {exc}") from exc
        try:
            article = _row_to_article(row, line_no)
            if article is None:
                result.dropped_empty += 1
                continue
            if article.id in seen_ids:
                raise ValueError(f"duplicate id {article.id!r}")
        except ValueError as exc:
            if tolerant:
                result.skipped.append((line_no, str(exc)))
                continue
            raise CorpusError(f"{path}:{line_no}: {exc}") from exc
        seen_ids.add(article.id)
        result.articles.append(article)
    return result


def _assignment_key(article_id: str, seed: int) -> bytes:
    return hashlib.sha256(f"{seed}:{article_id}".encode("utf-8")).digest()


def split_dataset(
    articles: list[NewsArticle], spec: SplitSpec
) -> tuple[list[NewsArticle], list[NewsArticle]]:
    """Partition articles into (train, validation) deterministically.

    Articles are ranked by a seeded hash of their id and the lowest
    round(validation_fraction * N) ranks become the validation set, so the
    split survives any re-ordering of the input corpus.
    """
    if not articles:
        raise ValueError("cannot split an empty corpus")
    ids = [a.id for a in articles]
    if len(set(ids)) != len(ids):
        raise ValueError("article ids must be unique within a corpus")
    n_validation = round(spec.validation_fraction * len(articles))
    ranked = sorted(articles, key=lambda a: (_assignment_key(a.id, spec.seed), a.id))
    return ranked[n_validation:], ranked[:n_validation]
