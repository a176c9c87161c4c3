"""Chat prompt rendering and instruction-tuning dataset construction."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .corpus import NewsArticle, clean_text
from .report_parser import AnalysisReport, render_report

BOS_MARKER = "<s>"
INST_OPEN = "[INST]"
INST_CLOSE = "[/INST]"
SYS_OPEN = "<<SYS>>"
SYS_CLOSE = "<</SYS>>"

_ALL_MARKERS = (BOS_MARKER, INST_OPEN, INST_CLOSE, SYS_OPEN, SYS_CLOSE)

DEFAULT_SYSTEM_TEXT = (
    "You are an expert in financial news analytics.\n"
    "Please find companies, products, technologies and currencies \n"
    "in the text and assess sentiments towards them."
)
DEFAULT_INSTRUCTION_TEXT = "Please analyse the text:"

ALL_TASKS = frozenset({"analysis", "main_points", "summary", "entities"})

DEFAULT_TOKEN_BUDGET = 2048
DEFAULT_CHARS_PER_TOKEN = 4.0


class PromptError(ValueError):
    """Envelope content that cannot be rendered or parsed back."""


@dataclass(frozen=True)
class PromptEnvelope:
    input_text: str
    system_text: str = DEFAULT_SYSTEM_TEXT
    instruction_text: str = DEFAULT_INSTRUCTION_TEXT


@dataclass(frozen=True)
class InstructionRecord:
    prompt: str
    response: str
    task_tags: frozenset[str] = ALL_TASKS


def render_prompt(envelope: PromptEnvelope) -> str:
    """Render the chat prompt byte-exactly.

    Layout: ``<s>[INST] <<SYS>>\\n{system}\\n<</SYS>>\\n\\n{instruction}\\n``
    ``{input} [/INST]``. Fields containing template markers are rejected
    rather than escaped, and the instruction must stay on one line so the
    rendering remains invertible.
    """
    if not clean_text(envelope.input_text):
        raise PromptError("input_text is empty after cleaning")
    if "\n" in envelope.instruction_text:
        raise PromptError("instruction_text must be a single line")
    for name, value in (
        ("system_text", envelope.system_text),
        ("instruction_text", envelope.instruction_text),
        ("input_text", envelope.input_text),
    ):
        for marker in _ALL_MARKERS:
            if marker in value:
                raise PromptError(f"{name} contains template marker {marker!r}")
    return (
        f"{BOS_MARKER}{INST_OPEN} {SYS_OPEN}\n"
        f"{envelope.system_text}\n"
        f"{SYS_CLOSE}\n"
        f"\n"
        f"{envelope.instruction_text}\n"
        f"{envelope.input_text} {INST_CLOSE}"
    )


def parse_prompt(rendered: str) -> PromptEnvelope:
    """Invert render_prompt, recovering the three envelope fields."""
    prefix = f"{BOS_MARKER}{INST_OPEN} {SYS_OPEN}\n"
    if not rendered.startswith(prefix):
        raise PromptError("missing opening markers")
    sys_close = f"\n{SYS_CLOSE}\n\n"
    close_at = rendered.find(sys_close, len(prefix))
    if close_at < 0:
        raise PromptError("missing system close marker")
    system_text = rendered[len(prefix) : close_at]
    rest = rendered[close_at + len(sys_close) :]
    if not rest.endswith(f" {INST_CLOSE}"):
        raise PromptError("missing closing instruction marker")
    rest = rest[: -len(f" {INST_CLOSE}")]
    instruction_text, sep, input_text = rest.partition("\n")
    if not sep:
        raise PromptError("missing instruction/input separator")
    return PromptEnvelope(
        input_text=input_text,
        system_text=system_text,
        instruction_text=instruction_text,
    )


def build_instruction_record(
    article: NewsArticle,
    target: AnalysisReport,
    system_text: str = DEFAULT_SYSTEM_TEXT,
    instruction_text: str = DEFAULT_INSTRUCTION_TEXT,
) -> InstructionRecord:
    """Pair an article with its canonical target response for fine-tuning."""
    envelope = PromptEnvelope(
        input_text=article.body,
        system_text=system_text,
        instruction_text=instruction_text,
    )
    return InstructionRecord(
        prompt=render_prompt(envelope),
        response=render_report(target),
        task_tags=ALL_TASKS,
    )


def export_training_file(records: list[InstructionRecord], path: str | Path) -> int:
    """Write records as JSONL of {"prompt", "response"}; returns the count."""
    if not records:
        raise ValueError("no records to export")
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(
                json.dumps(
                    {"prompt": record.prompt, "response": record.response},
                    ensure_ascii=False,
                )
            )
            handle.write("\n")
    return len(records)


def load_training_file(path: str | Path) -> list[InstructionRecord]:
    records = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            obj = json.loads(line)
            records.append(InstructionRecord(prompt=obj["prompt"], response=obj["response"]))
    return records


@dataclass(frozen=True)
class LengthEstimate:
    estimated_tokens: int
    over_budget: bool
    budget: int = DEFAULT_TOKEN_BUDGET


def estimate_length_budget(
    record: InstructionRecord,
    chars_per_token: float = DEFAULT_CHARS_PER_TOKEN,
    budget: int = DEFAULT_TOKEN_BUDGET,
) -> LengthEstimate:
    """Character-heuristic token estimate; flags records over the budget.

    A deliberate approximation: the fine-tune runner re-checks true token
    lengths with its own tokenizer.
    """
    if chars_per_token <= 0:
        raise ValueError("chars_per_token must be positive")
    total_chars = len(record.prompt) + len(record.response)
    tokens = math.ceil(total_chars / chars_per_token)
    return LengthEstimate(estimated_tokens=tokens, over_budget=tokens > budget, budget=budget)
