import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from finnews.report_parser import (
    CANONICAL_ENTITY_TYPES,
    SENTIMENTS,
    AnalysisReport,
    EntityRejected,
    EntitySentiment,
    RepairFailure,
    extract_json_block,
    parse_report,
    render_report,
    repair_json,
    report_from_json,
    report_to_json,
    validate_entity,
)

from conftest import load_response
from expected_fixtures import EXPECTED_COUNTS, EXPECTED_TRIPLES

MINIMAL = "Analysis: A\n\nMain Points:\n1. p\n\nSummary: s\n\nJSON Data: []"


def reference_bracket_matcher(text: str) -> str | None:
    """Independent oracle: first balanced [..] span after the JSON header,
    scanning character-wise with explicit string-literal state."""
    def is_header_at(pos: int) -> bool:
        rest = text[pos:].lower()
        rest = rest.lstrip(" \t")
        if not rest.startswith("json"):
            return False
        rest = rest[4:]
        if not rest or rest[0] not in " \t":
            return False
        rest = rest.lstrip(" \t")
        if not rest.startswith("data"):
            return False
        rest = rest[4:].lstrip(" \t")
        return rest.startswith(":")

    at = -1
    for line_start in [0] + [k + 1 for k, c in enumerate(text) if c == "\n"]:
        if is_header_at(line_start):
            at = line_start
            break
    if at < 0:
        return None
    start = text.find("[", at)
    while start != -1:
        depth, in_str, esc = 0, False, False
        for j in range(start, len(text)):
            c = text[j]
            if in_str:
                if esc:
                    esc = False
                elif c == "\\":
                    esc = True
                elif c == '"':
                    in_str = False
            elif c == '"':
                in_str = True
            elif c == "[":
                depth += 1
            elif c == "]":
                depth -= 1
                if depth == 0:
                    return text[start : j + 1]
        start = text.find("[", start + 1)
    return None


class TestFixtureCorpus:
    @pytest.mark.parametrize("name", sorted(EXPECTED_TRIPLES))
    def test_entity_counts(self, name):
        report = parse_report(load_response(name))
        assert len(report.entities) == EXPECTED_COUNTS[name]

    @pytest.mark.parametrize("name", sorted(EXPECTED_TRIPLES))
    def test_triples_exact(self, name):
        report = parse_report(load_response(name))
        assert [e.triple() for e in report.entities] == EXPECTED_TRIPLES[name]

    @pytest.mark.parametrize("name", sorted(EXPECTED_TRIPLES))
    def test_no_diagnostics_on_fixtures(self, name):
        report = parse_report(load_response(name))
        assert report.parse_diagnostics == ()

    def test_tesla_sections(self):
        report = parse_report(load_response("tesla_deliveries"))
        assert len(report.main_points) == 5
        assert report.summary.startswith("Tesla’s output of the anticipated Model 3")

    def test_usd_rally_contains_named_triples(self):
        report = parse_report(load_response("usd_rally"))
        triples = {e.triple() for e in report.entities}
        assert ("U.S. dollar", "currency", "positive") in triples
        assert ("Federal Reserve", "organization", "neutral") in triples


class TestParseReport:
    def test_minimal_well_formed(self):
        report = parse_report(MINIMAL)
        assert report.analysis == "A"
        assert report.main_points == ("p",)
        assert report.summary == "s"
        assert report.entities == ()
        assert report.parse_diagnostics == ()

    def test_missing_sections_degrade_to_diagnostics(self):
        report = parse_report("Summary: only this")
        assert report.summary == "only this"
        assert "missing-section:analysis" in report.parse_diagnostics
        assert "missing-section:main_points" in report.parse_diagnostics
        assert "missing-section:json_data" in report.parse_diagnostics

    def test_headers_case_insensitive_with_leading_whitespace(self):
        text = "  analysis: a\n\n  MAIN POINTS:\n1) one\n\n summary: s\n\n  Json data: []"
        report = parse_report(text)
        assert report.analysis == "a"
        assert report.main_points == ("one",)
        assert report.parse_diagnostics == ()

    def test_numbered_points_both_forms(self):
        text = "Main Points:\n1. first\n2) second\n3. third"
        report = parse_report(text)
        assert report.main_points == ("first", "second", "third")

    def test_point_order_preserved_as_listed(self):
        text = "Main Points:\n2. second\n1. first"
        assert parse_report(text).main_points == ("second", "first")

    def test_wrapped_point_lines_join(self):
        text = "Main Points:\n1. starts here\ncontinues here\n2. next"
        report = parse_report(text)
        assert report.main_points[0] == "starts here\ncontinues here"

    def test_entirely_pathological_input_is_all_diagnostics(self):
        report = parse_report("")
        assert report.analysis == ""
        assert report.entities == ()
        assert len(report.parse_diagnostics) == 4

    @given(st.text(max_size=400))
    def test_totality_and_sentiment_closure(self, text):
        report = parse_report(text)
        for entity in report.entities:
            assert entity.sentiment in SENTIMENTS


class TestExtractJsonBlock:
    def test_array_with_trailing_prose(self):
        text = 'JSON Data:\n[{"entity":"X"}]\nI hope that helps!'
        assert extract_json_block(text) == '[{"entity":"X"}]'
        assert extract_json_block(text) == reference_bracket_matcher(text)

    def test_missing_header_is_absent(self):
        assert extract_json_block('[{"entity":"X"}]') is None

    def test_bracket_inside_quoted_string(self):
        text = 'JSON Data: [{"entity":"closing ] bracket","entity_name":"co"}] after'
        block = extract_json_block(text)
        assert block == '[{"entity":"closing ] bracket","entity_name":"co"}]'
        assert block == reference_bracket_matcher(text)

    def test_prose_between_header_and_array(self):
        text = "JSON Data:\nHere are the entities you asked for:\n[1, 2]\n"
        assert extract_json_block(text) == "[1, 2]"

    def test_unbalanced_block_is_absent(self):
        assert extract_json_block('JSON Data: [{"entity":"x"}') is None

    @given(st.text(max_size=300))
    def test_matches_reference_oracle(self, text):
        assert extract_json_block(text) == reference_bracket_matcher(text)


class TestRepairJson:
    def test_strict_array_fires_zero_repairs(self):
        result = repair_json('[{"entity": "A"}, {"entity": "B"}]')
        assert result.repairs == []
        assert len(result.objects) == 2

    def test_trailing_comma(self):
        result = repair_json('[{"entity": "A"},]')
        assert result.objects == [{"entity": "A"}]
        assert result.repairs == ["trailing-comma"]

    def test_single_quotes(self):
        result = repair_json("[{'entity': 'A', 'sentiment': 'positive'}]")
        assert result.objects == [{"entity": "A", "sentiment": "positive"}]
        assert result.repairs == ["single-quote"]

    def test_single_quotes_then_trailing_comma(self):
        result = repair_json("[{'entity': 'A'},]")
        assert result.objects == [{"entity": "A"}]
        assert result.repairs == ["single-quote", "trailing-comma"]

    def test_apostrophes_inside_double_quotes_survive(self):
        result = repair_json('[{"entity": "McDonald\'s"}]')
        assert result.objects == [{"entity": "McDonald's"}]
        assert result.repairs == []

    def test_element_salvage_drops_only_broken_middle(self):
        raw = '[{"entity": "A"}, {"entity": broken!!}, {"entity": "C"}]'
        result = repair_json(raw)
        assert [o["entity"] for o in result.objects] == ["A", "C"]
        assert "element-salvage" in result.repairs
        assert result.dropped == ["dropped-element:1"]

    def test_salvage_oracle_on_top_level_braces(self):
        # oracle: count top-level {...} spans by brace depth, string-aware
        raw = '[{"a": {"nested": 1}}, {"b": "x } y"}, {broken]'
        spans = []
        depth = 0
        in_str = False
        start = None
        i = 0
        while i < len(raw):
            c = raw[i]
            if in_str:
                if c == "\\":
                    i += 2
                    continue
                if c == '"':
                    in_str = False
            elif c == '"':
                in_str = True
            elif c == "{":
                if depth == 0:
                    start = i
                depth += 1
            elif c == "}":
                depth -= 1
                if depth == 0:
                    spans.append(raw[start : i + 1])
            i += 1
        assert len(spans) == 2
        result = repair_json(raw)
        assert len(result.objects) == 2

    def test_zero_survivors_is_repair_failure(self):
        with pytest.raises(RepairFailure):
            repair_json("[{nope}, {also broken]")

    def test_non_array_payload_fails(self):
        with pytest.raises(RepairFailure):
            repair_json("[not json at all")


class TestValidateEntity:
    def test_person_labeled_company_is_kept_verbatim(self):
        entity = validate_entity(
            {"entity": "Trump", "entity_name": "company", "sentiment": "positive"}
        )
        assert entity.triple() == ("Trump", "company", "positive")
        assert "sentiment-coerced" not in entity.warnings

    def test_uppercase_sentiment_normalizes_without_coercion_warning(self):
        entity = validate_entity(
            {"entity": "X", "entity_name": "company", "sentiment": "POSITIVE"}
        )
        assert entity.sentiment == "positive"
        assert entity.warnings == ()

    def test_out_of_set_sentiment_and_missing_type(self):
        entity = validate_entity({"entity": "Y", "sentiment": "great"})
        assert entity.entity_name == "unknown"
        assert entity.sentiment == "neutral"
        assert "sentiment-coerced" in entity.warnings
        assert "missing-type" in entity.warnings

    def test_uncanonical_type_warned_but_verbatim(self):
        entity = validate_entity(
            {"entity": "Z", "entity_name": "cryptocurrency", "sentiment": "negative"}
        )
        assert entity.entity_name == "cryptocurrency"
        assert "uncanonical-type" in entity.warnings

    def test_canonical_vocabulary_passes_clean(self):
        for label in sorted(CANONICAL_ENTITY_TYPES):
            entity = validate_entity(
                {"entity": "E", "entity_name": label, "sentiment": "neutral"}
            )
            assert entity.warnings == ()

    def test_missing_entity_key_rejected(self):
        with pytest.raises(EntityRejected):
            validate_entity({"entity_name": "company", "sentiment": "positive"})

    def test_empty_entity_rejected(self):
        with pytest.raises(EntityRejected):
            validate_entity({"entity": "   "})

    def test_nested_value_preserved_as_raw_text_with_warning(self):
        entity = validate_entity({"entity": {"name": "deep"}, "sentiment": "positive"})
        assert entity.entity == '{"name": "deep"}'
        assert "nested-entity-value" in entity.warnings


def texts():
    return st.text(
        alphabet=st.characters(blacklist_categories=("Cs", "Cc")), min_size=1, max_size=60
    ).map(lambda s: " ".join(s.split())).filter(
        lambda s: s and not any(m in s.lower() for m in ("analysis:", "main points:", "summary:", "json data:"))
    ).filter(lambda s: not s[0].isdigit())


def entity_strategy():
    return st.builds(
        EntitySentiment,
        entity=texts(),
        entity_name=st.sampled_from(sorted(CANONICAL_ENTITY_TYPES)),
        sentiment=st.sampled_from(SENTIMENTS),
    )


def report_strategy():
    return st.builds(
        AnalysisReport,
        analysis=texts(),
        main_points=st.lists(texts(), max_size=5).map(tuple),
        summary=texts(),
        entities=st.lists(entity_strategy(), max_size=6).map(tuple),
    )


class TestRenderReport:
    def test_empty_entities_ends_with_empty_array(self):
        report = AnalysisReport(analysis="a", main_points=("p",), summary="s")
        assert render_report(report).endswith("JSON Data:\n[]")

    def test_hasbro_roundtrip_has_six_objects(self):
        report = parse_report(load_response("hasbro_saban"))
        rendered = render_report(report)
        array = extract_json_block(rendered)
        assert len(json.loads(array)) == 6

    def test_report_with_diagnostics_refuses_to_render(self):
        report = parse_report("no sections here")
        with pytest.raises(ValueError):
            render_report(report)

    @given(report_strategy())
    def test_roundtrip_identity(self, report):
        assert parse_report(render_report(report)) == report

    def test_fixture_roundtrip_modulo_diagnostics(self):
        for name in sorted(EXPECTED_TRIPLES):
            report = parse_report(load_response(name))
            again = parse_report(render_report(report))
            assert again.entities == report.entities
            assert again.main_points == report.main_points
            assert again.summary == report.summary


class TestCanonicalJson:
    def test_roundtrip(self):
        report = parse_report(load_response("crop_insurance"))
        payload = report_to_json(report)
        assert set(payload) == {"analysis", "main_points", "summary", "entities", "diagnostics"}
        again = report_from_json(json.loads(json.dumps(payload)))
        assert [e.triple() for e in again.entities] == [e.triple() for e in report.entities]
        assert again.summary == report.summary
