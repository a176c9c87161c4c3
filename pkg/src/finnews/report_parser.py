"""Tolerant parser for the four-section analyst response with embedded entity JSON.

The expected layout is four headed sections — Analysis, Main Points, Summary,
JSON Data — where the last one carries an array of
{"entity", "entity_name", "sentiment"} objects. Model output drifts, so
parsing never hard-fails: missing sections and unrecoverable JSON degrade to
diagnostics on the returned report.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any

SENTIMENTS = ("negative", "neutral", "positive")

# Entity-type labels that pass without a warning; anything else is kept
# verbatim and flagged, since generators routinely invent new labels.
CANONICAL_ENTITY_TYPES = frozenset(
    {
        "company",
        "person",
        "organization",
        "currency",
        "product",
        "financial product",
        "technology",
        "economy",
        "group",
    }
)

SECTION_NAMES = ("analysis", "main_points", "summary", "json_data")

_SECTION_PATTERNS = {
    "analysis": re.compile(r"^[ \t]*analysis[ \t]*:", re.IGNORECASE | re.MULTILINE),
    "main_points": re.compile(r"^[ \t]*main[ \t]+points[ \t]*:", re.IGNORECASE | re.MULTILINE),
    "summary": re.compile(r"^[ \t]*summary[ \t]*:", re.IGNORECASE | re.MULTILINE),
    "json_data": re.compile(r"^[ \t]*json[ \t]+data[ \t]*:", re.IGNORECASE | re.MULTILINE),
}

_POINT_PREFIX = re.compile(r"^[ \t]*(\d+)[.)][ \t]*")


class ReportError(Exception):
    """Base error for report handling."""


class RepairFailure(ReportError):
    """No entity objects could be recovered from a JSON block."""


class EntityRejected(ReportError):
    """Raw object lacks a usable "entity" key."""


@dataclass(frozen=True)
class EntitySentiment:
    entity: str
    entity_name: str
    sentiment: str
    warnings: tuple[str, ...] = ()

    def triple(self) -> tuple[str, str, str]:
        return (self.entity, self.entity_name, self.sentiment)


@dataclass(frozen=True)
class AnalysisReport:
    analysis: str = ""
    main_points: tuple[str, ...] = ()
    summary: str = ""
    entities: tuple[EntitySentiment, ...] = ()
    parse_diagnostics: tuple[str, ...] = ()


@dataclass
class RepairResult:
    objects: list[Any]
    repairs: list[str] = field(default_factory=list)
    dropped: list[str] = field(default_factory=list)


def _scan_string_aware(text: str, start: int, open_ch: str, close_ch: str) -> int | None:
    """Index of the close bracket balancing text[start], honoring JSON strings."""
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == open_ch:
            depth += 1
        elif ch == close_ch:
            depth -= 1
            if depth == 0:
                return i
    return None


def extract_json_block(text: str) -> str | None:
    """First bracket-balanced ``[...]`` span after the "JSON Data:" header.

    Prose before or after the span is ignored. Returns None when the header
    is missing or no balanced span follows it.
    """
    header = _SECTION_PATTERNS["json_data"].search(text)
    if header is None:
        return None
    pos = text.find("[", header.end())
    while pos != -1:
        end = _scan_string_aware(text, pos, "[", "]")
        if end is not None:
            return text[pos : end + 1]
        pos = text.find("[", pos + 1)
    return None


def _normalize_single_quotes(raw: str) -> str:
    """Rewrite single-quoted strings as double-quoted, leaving "..." intact."""
    out: list[str] = []
    i, n = 0, len(raw)
    in_double = False
    while i < n:
        ch = raw[i]
        if in_double:
            out.append(ch)
            if ch == "\\" and i + 1 < n:
                out.append(raw[i + 1])
                i += 2
                continue
            if ch == '"':
                in_double = False
            i += 1
            continue
        if ch == '"':
            in_double = True
            out.append(ch)
            i += 1
            continue
        if ch == "'":
            out.append('"')
            i += 1
            while i < n:
                c = raw[i]
                if c == "\\" and i + 1 < n:
                    nxt = raw[i + 1]
                    if nxt == "'":
                        out.append("'")
                    else:
                        out.append(c)
                        out.append(nxt)
                    i += 2
                    continue
                if c == "'":
                    out.append('"')
                    i += 1
                    break
                if c == '"':
                    out.append('\\"')
                    i += 1
                    continue
                out.append(c)
                i += 1
            continue
        out.append(ch)
        i += 1
    return "".join(out)


_TRAILING_COMMA = re.compile(r",(\s*[\]}])")


def _strip_trailing_commas(raw: str) -> str:
    return _TRAILING_COMMA.sub(r"\1", raw)


def _try_load_list(raw: str) -> list[Any] | None:
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        return None
    return value if isinstance(value, list) else None


def _top_level_objects(raw: str) -> list[str]:
    """Raw text of each brace-balanced object found at array level."""
    spans: list[str] = []
    i = 0
    while i < len(raw):
        if raw[i] == "{":
            end = _scan_string_aware(raw, i, "{", "}")
            if end is None:
                break
            spans.append(raw[i : end + 1])
            i = end + 1
        elif raw[i] == '"':
            # skip over the string literal so braces inside it are ignored
            j = i + 1
            escaped = False
            while j < len(raw):
                if escaped:
                    escaped = False
                elif raw[j] == "\\":
                    escaped = True
                elif raw[j] == '"':
                    break
                j += 1
            i = j + 1
        else:
            i += 1
    return spans


def repair_json(raw: str) -> RepairResult:
    """Recover a list of entity objects from a possibly damaged JSON array.

    Repairs are attempted in a fixed order: strict parse, single-quote
    normalization, trailing-comma removal, then per-element salvage where
    each ``{...}`` object is parsed independently and unparseable ones are
    dropped with a diagnostic. Raises RepairFailure when nothing survives.
    """
    objects = _try_load_list(raw)
    if objects is not None:
        return RepairResult(objects=objects)

    repairs: list[str] = []
    candidate = raw
    normalized = _normalize_single_quotes(candidate)
    if normalized != candidate:
        candidate = normalized
        objects = _try_load_list(candidate)
        if objects is not None:
            return RepairResult(objects=objects, repairs=["single-quote"])
        repairs.append("single-quote")

    decommaed = _strip_trailing_commas(candidate)
    if decommaed != candidate:
        candidate = decommaed
        objects = _try_load_list(candidate)
        if objects is not None:
            return RepairResult(objects=objects, repairs=repairs + ["trailing-comma"])
        repairs.append("trailing-comma")

    spans = _top_level_objects(raw)
    survivors: list[Any] = []
    dropped: list[str] = []
    for idx, span in enumerate(spans):
        for attempt in (span, _strip_trailing_commas(_normalize_single_quotes(span))):
            try:
                obj = json.loads(attempt)
            except json.JSONDecodeError:
                continue
            survivors.append(obj)
            break
        else:
            dropped.append(f"dropped-element:{idx}")
    if not survivors:
        raise RepairFailure(f"no entity objects recoverable from block of {len(raw)} chars")
    return RepairResult(objects=survivors, repairs=repairs + ["element-salvage"], dropped=dropped)


def validate_entity(raw: Any) -> EntitySentiment:
    """Validate one raw entity object into a closed-sentiment EntitySentiment.

    Out-of-set sentiments coerce to neutral with a warning; unknown type
    labels are kept verbatim with a warning; a missing entity key rejects.
    """
    if not isinstance(raw, dict):
        raise EntityRejected(f"not an object: {type(raw).__name__}")
    warnings: list[str] = []

    entity = raw.get("entity")
    if entity is None or (isinstance(entity, str) and not entity.strip()):
        raise EntityRejected("missing-entity")
    if not isinstance(entity, str):
        entity = json.dumps(entity, ensure_ascii=False)
        warnings.append("nested-entity-value")

    entity_name = raw.get("entity_name")
    if entity_name is None or (isinstance(entity_name, str) and not entity_name.strip()):
        entity_name = "unknown"
        warnings.append("missing-type")
    else:
        if not isinstance(entity_name, str):
            entity_name = json.dumps(entity_name, ensure_ascii=False)
            warnings.append("nested-type-value")
        if entity_name.strip().lower() not in CANONICAL_ENTITY_TYPES:
            warnings.append("uncanonical-type")

    sentiment = raw.get("sentiment")
    if isinstance(sentiment, str) and sentiment.strip().lower() in SENTIMENTS:
        sentiment = sentiment.strip().lower()
    else:
        sentiment = "neutral"
        warnings.append("sentiment-coerced")

    return EntitySentiment(
        entity=entity,
        entity_name=entity_name,
        sentiment=sentiment,
        warnings=tuple(warnings),
    )


def _split_main_points(block: str) -> tuple[str, ...]:
    points: list[str] = []
    current: list[str] | None = None
    for line in block.splitlines():
        m = _POINT_PREFIX.match(line)
        if m:
            if current is not None:
                points.append("\n".join(current).strip())
            current = [line[m.end() :].strip()]
        elif current is not None and line.strip():
            current.append(line.strip())
    if current is not None:
        points.append("\n".join(current).strip())
    return tuple(p for p in points if p)


def parse_report(text: str) -> AnalysisReport:
    """Parse model output into an AnalysisReport; total over all strings.

    Section headers are matched case-insensitively at line starts. Missing
    sections become empty fields plus a diagnostic. The JSON block goes
    through extract_json_block and repair_json; per-entity validation
    coerces sentiments into the closed set.
    """
    if not isinstance(text, str):
        raise TypeError("parse_report expects a string")

    diagnostics: list[str] = []
    found: list[tuple[int, int, str]] = []
    for name in SECTION_NAMES:
        m = _SECTION_PATTERNS[name].search(text)
        if m is None:
            diagnostics.append(f"missing-section:{name}")
        else:
            found.append((m.start(), m.end(), name))
    found.sort()

    contents: dict[str, str] = {}
    for i, (start, end, name) in enumerate(found):
        stop = found[i + 1][0] if i + 1 < len(found) else len(text)
        contents[name] = text[end:stop].strip()

    entities: list[EntitySentiment] = []
    raw_block = extract_json_block(text)
    if raw_block is None:
        if "json_data" in contents:
            diagnostics.append("no-json-array")
    else:
        try:
            result = repair_json(raw_block)
        except RepairFailure as exc:
            diagnostics.append(f"json-repair-failed: {exc}")
        else:
            diagnostics.extend(f"json-repair:{r}" for r in result.repairs)
            diagnostics.extend(result.dropped)
            for idx, obj in enumerate(result.objects):
                try:
                    entities.append(validate_entity(obj))
                except EntityRejected as exc:
                    diagnostics.append(f"entity-rejected:{idx}:{exc}")

    return AnalysisReport(
        analysis=contents.get("analysis", ""),
        main_points=_split_main_points(contents.get("main_points", "")),
        summary=contents.get("summary", ""),
        entities=tuple(entities),
        parse_diagnostics=tuple(diagnostics),
    )


def render_report(report: AnalysisReport) -> str:
    """Canonical four-section rendering; inverse of parse_report.

    Requires a diagnostics-free report. Entities serialize as strict JSON,
    so ``parse_report(render_report(r)) == r`` up to re-derived diagnostics
    and entity warnings.
    """
    if report.parse_diagnostics:
        raise ValueError("cannot render a report that carries parse diagnostics")
    lines = ["Analysis:", report.analysis, "", "Main Points:"]
    lines.extend(f"{i}. {point}" for i, point in enumerate(report.main_points, start=1))
    lines.extend(["", "Summary:", report.summary, "", "JSON Data:"])
    payload = [
        {"entity": e.entity, "entity_name": e.entity_name, "sentiment": e.sentiment}
        for e in report.entities
    ]
    lines.append(json.dumps(payload, ensure_ascii=False))
    return "\n".join(lines)


def report_to_json(report: AnalysisReport) -> dict[str, Any]:
    """Canonical storage/API shape for a report."""
    return {
        "analysis": report.analysis,
        "main_points": list(report.main_points),
        "summary": report.summary,
        "entities": [
            {"entity": e.entity, "entity_name": e.entity_name, "sentiment": e.sentiment}
            for e in report.entities
        ],
        "diagnostics": list(report.parse_diagnostics),
    }


def report_from_json(payload: dict[str, Any]) -> AnalysisReport:
    entities = tuple(
        EntitySentiment(
            entity=e["entity"], entity_name=e["entity_name"], sentiment=e["sentiment"]
        )
        for e in payload.get("entities", [])
    )
    return AnalysisReport(
        analysis=payload.get("analysis", ""),
        main_points=tuple(payload.get("main_points", [])),
        summary=payload.get("summary", ""),
        entities=entities,
        parse_diagnostics=tuple(payload.get("diagnostics", [])),
    )
