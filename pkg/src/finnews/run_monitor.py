"""Loss-log parsing, overfit detection, and run comparison for fine-tune runs.

Log contract (produced by the fine-tune runner): a CSV with header exactly
``epoch,loss,eval_loss``, one row per epoch, eval_loss possibly empty.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

LOSS_LOG_HEADER = ("epoch", "loss", "eval_loss")

QUANTIZATIONS = ("4bit", "8bit")


class LossLogError(Exception):
    """Malformed loss log: bad header, bad values, or non-monotone epochs."""


@dataclass(frozen=True)
class LossCurvePoint:
    epoch: int
    train_loss: float
    eval_loss: float | None = None

    def __post_init__(self) -> None:
        if self.epoch < 1:
            raise ValueError(f"epoch must be positive, got {self.epoch}")
        for name, value in (("train_loss", self.train_loss), ("eval_loss", self.eval_loss)):
            if value is None:
                continue
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {value}")


@dataclass(frozen=True)
class RunRecord:
    run_id: str
    points: tuple[LossCurvePoint, ...]
    quantization: str | None = None
    config: Mapping[str, object] | None = None

    def __post_init__(self) -> None:
        epochs = [p.epoch for p in self.points]
        if any(b <= a for a, b in zip(epochs, epochs[1:])):
            raise ValueError("epochs must be strictly increasing within a run")
        if self.quantization is not None and self.quantization not in QUANTIZATIONS:
            raise ValueError(f"quantization must be one of {QUANTIZATIONS}")
        if self.quantization is not None and self.config is not None:
            four = bool(self.config.get("load_in_4bit"))
            eight = bool(self.config.get("load_in_8bit"))
            expected = {"4bit": (True, False), "8bit": (False, True)}[self.quantization]
            if (four, eight) != expected:
                raise ValueError(
                    f"quantization {self.quantization} contradicts config flags "
                    f"load_in_4bit={four}, load_in_8bit={eight}"
                )


def parse_loss_log(
    path: str | Path,
    run_id: str | None = None,
    quantization: str | None = None,
    config: Mapping[str, object] | None = None,
) -> RunRecord:
    """Parse one loss-log CSV into a RunRecord, validating the contract."""
    path = Path(path)
    points: list[LossCurvePoint] = []
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != LOSS_LOG_HEADER:
            raise LossLogError(
                f"{path}: header must be exactly {','.join(LOSS_LOG_HEADER)!r}, got {header}"
            )
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 3:
                raise LossLogError(f"{path}:{row_no}: expected 3 columns, got {len(row)}")
            try:
                epoch = int(row[0])
                train_loss = float(row[1])
                eval_loss = float(row[2]) if row[2].strip() else None
                point = LossCurvePoint(epoch, train_loss, eval_loss)
            except ValueError as exc:
                raise LossLogError(f"{path}:{row_no}: {exc}") from exc
            if points and epoch <= points[-1].epoch:
                raise LossLogError(
                    f"{path}:{row_no}: epoch {epoch} not greater than {points[-1].epoch}"
                )
            points.append(point)
    return RunRecord(
        run_id=run_id or path.stem,
        points=tuple(points),
        quantization=quantization,
        config=config,
    )


def detect_overfit(points: Sequence[LossCurvePoint], patience: int) -> int | None:
    """First epoch where eval loss has risen for `patience` consecutive steps
    while train loss was non-increasing over the same span; None otherwise.

    Depends only on orderings, so it is invariant under positive scaling of
    the loss columns. Steps are taken over consecutive points that carry an
    eval loss.
    """
    if patience < 1:
        raise ValueError("patience must be >= 1")
    evaluated = [p for p in points if p.eval_loss is not None]
    if len(evaluated) < patience + 1:
        raise ValueError(
            f"need at least {patience + 1} points with eval_loss, got {len(evaluated)}"
        )
    run_length = 0
    for prev, cur in zip(evaluated, evaluated[1:]):
        if cur.eval_loss > prev.eval_loss and cur.train_loss <= prev.train_loss:
            run_length += 1
            if run_length == patience:
                return cur.epoch
        else:
            run_length = 0
    return None


@dataclass(frozen=True)
class EpochDivergence:
    epoch: int
    train_abs_diff: float
    eval_abs_diff: float | None


@dataclass(frozen=True)
class RunDivergence:
    per_epoch: tuple[EpochDivergence, ...]
    max_train: float
    mean_train: float
    max_eval: float | None
    mean_eval: float | None


def compare_runs(a: RunRecord, b: RunRecord) -> RunDivergence:
    """Per-epoch absolute loss differences between two runs on equal epochs.

    Eval divergence is computed over epochs where both runs report an eval
    loss. Symmetric in (a, b).
    """
    epochs_a = {p.epoch for p in a.points}
    epochs_b = {p.epoch for p in b.points}
    if epochs_a != epochs_b:
        raise ValueError(f"epoch sets differ: {sorted(epochs_a ^ epochs_b)}")
    if not epochs_a:
        raise ValueError("cannot compare empty runs")
    by_epoch_b = {p.epoch: p for p in b.points}
    rows = []
    for pa in a.points:
        pb = by_epoch_b[pa.epoch]
        eval_diff = None
        if pa.eval_loss is not None and pb.eval_loss is not None:
            eval_diff = abs(pa.eval_loss - pb.eval_loss)
        rows.append(EpochDivergence(pa.epoch, abs(pa.train_loss - pb.train_loss), eval_diff))
    train_diffs = [r.train_abs_diff for r in rows]
    eval_diffs = [r.eval_abs_diff for r in rows if r.eval_abs_diff is not None]
    return RunDivergence(
        per_epoch=tuple(rows),
        max_train=max(train_diffs),
        mean_train=sum(train_diffs) / len(train_diffs),
        max_eval=max(eval_diffs) if eval_diffs else None,
        mean_eval=sum(eval_diffs) / len(eval_diffs) if eval_diffs else None,
    )


def export_curve_csv(run: RunRecord, path: str | Path) -> int:
    """Write a run back out in the loss-log contract; returns data row count."""
    if not run.points:
        raise ValueError("run has no points to export")
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(LOSS_LOG_HEADER)
        for point in run.points:
            writer.writerow(
                [
                    point.epoch,
                    repr(point.train_loss),
                    repr(point.eval_loss) if point.eval_loss is not None else "",
                ]
            )
    return len(run.points)
