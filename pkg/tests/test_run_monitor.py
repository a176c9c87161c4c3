import random

import pytest

from finnews.run_monitor import (
    LossCurvePoint,
    LossLogError,
    RunRecord,
    compare_runs,
    detect_overfit,
    export_curve_csv,
    parse_loss_log,
)


def write_log(path, rows, header="epoch,loss,eval_loss"):
    lines = [header] + [",".join(str(c) for c in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def points_from(train, eval_losses=None):
    eval_losses = eval_losses or [None] * len(train)
    return tuple(
        LossCurvePoint(epoch=i + 1, train_loss=t, eval_loss=e)
        for i, (t, e) in enumerate(zip(train, eval_losses))
    )


def brute_force_overfit(points, patience):
    """Oracle: scan every window of `patience` steps over eval-bearing points."""
    evaluated = [p for p in points if p.eval_loss is not None]
    for end in range(patience, len(evaluated)):
        window = evaluated[end - patience : end + 1]
        ok = all(
            b.eval_loss > a.eval_loss and b.train_loss <= a.train_loss
            for a, b in zip(window, window[1:])
        )
        if ok:
            return evaluated[end].epoch
    return None


class TestParseLossLog:
    def test_single_row(self, tmp_path):
        path = write_log(tmp_path / "run.csv", [(1, 1.20, 1.30)])
        run = parse_loss_log(path)
        assert run.run_id == "run"
        assert run.points == (LossCurvePoint(1, 1.20, 1.30),)

    def test_ten_rows(self, tmp_path):
        rows = [(i, 2.0 - 0.1 * i, 2.1 - 0.1 * i) for i in range(1, 11)]
        run = parse_loss_log(write_log(tmp_path / "ten.csv", rows))
        assert [p.epoch for p in run.points] == list(range(1, 11))

    def test_empty_eval_loss_cell(self, tmp_path):
        path = write_log(tmp_path / "run.csv", [(1, 1.0, ""), (2, 0.9, 0.95)])
        run = parse_loss_log(path)
        assert run.points[0].eval_loss is None
        assert run.points[1].eval_loss == 0.95

    def test_non_monotone_epochs_rejected(self, tmp_path):
        path = write_log(tmp_path / "bad.csv", [(1, 1.0, 1.0), (3, 0.9, 0.9), (2, 0.8, 0.8)])
        with pytest.raises(LossLogError, match="epoch 2"):
            parse_loss_log(path)

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "nohead.csv"
        path.write_text("1,1.0,1.1\n2,0.9,1.0\n", encoding="utf-8")
        with pytest.raises(LossLogError, match="header"):
            parse_loss_log(path)

    def test_non_numeric_loss_rejected(self, tmp_path):
        path = write_log(tmp_path / "nan.csv", [(1, "abc", 1.0)])
        with pytest.raises(LossLogError, match=":2:"):
            parse_loss_log(path)

    def test_quantization_config_consistency(self, tmp_path):
        path = write_log(tmp_path / "q.csv", [(1, 1.0, 1.0)])
        config = {"load_in_4bit": True, "load_in_8bit": False}
        run = parse_loss_log(path, quantization="4bit", config=config)
        assert run.quantization == "4bit"
        with pytest.raises(ValueError, match="contradicts"):
            parse_loss_log(path, quantization="8bit", config=config)


class TestDetectOverfit:
    def test_monotone_decreasing_eval_is_none(self):
        points = points_from(
            [1.0, 0.8, 0.6, 0.5, 0.4], [1.1, 0.9, 0.7, 0.6, 0.5]
        )
        assert detect_overfit(points, patience=2) is None

    def test_eval_rises_from_epoch_six(self):
        train = [1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1]
        eval_losses = [1.0, 0.9, 0.8, 0.7, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85]
        points = points_from(train, eval_losses)
        assert detect_overfit(points, patience=2) == 7
        assert brute_force_overfit(points, 2) == 7

    def test_both_rising_is_not_overfit(self):
        points = points_from(
            [1.0, 1.1, 1.2, 1.3, 1.4], [1.0, 1.1, 1.2, 1.3, 1.4]
        )
        assert detect_overfit(points, patience=2) is None

    def test_matches_brute_force_on_random_curves(self):
        rng = random.Random(5)
        for _ in range(200):
            n = rng.randint(3, 20)
            train = [round(rng.uniform(0.1, 2.0), 3) for _ in range(n)]
            evals = [round(rng.uniform(0.1, 2.0), 3) for _ in range(n)]
            points = points_from(train, evals)
            patience = rng.randint(1, 2)
            assert detect_overfit(points, patience) == brute_force_overfit(points, patience)

    def test_scaling_invariance(self):
        rng = random.Random(9)
        train = [rng.uniform(0.1, 2.0) for _ in range(12)]
        evals = [rng.uniform(0.1, 2.0) for _ in range(12)]
        base = detect_overfit(points_from(train, evals), patience=2)
        scaled = detect_overfit(
            points_from([t * 7.5 for t in train], [e * 7.5 for e in evals]), patience=2
        )
        assert base == scaled

    def test_insufficient_eval_points(self):
        points = points_from([1.0, 0.9], [1.0, 1.1])
        with pytest.raises(ValueError):
            detect_overfit(points, patience=2)


class TestCompareRuns:
    def run(self, train, evals, run_id="r"):
        return RunRecord(run_id=run_id, points=points_from(train, evals))

    def test_identical_runs_diverge_zero(self):
        a = self.run([1.0, 0.8, 0.6], [1.1, 0.9, 0.7])
        div = compare_runs(a, a)
        assert div.max_train == div.mean_train == 0.0
        assert div.max_eval == div.mean_eval == 0.0

    def test_constant_shift(self):
        a = self.run([1.0, 0.8, 0.6], [1.1, 0.9, 0.7])
        b = self.run([1.0, 0.8, 0.6], [1.2, 1.0, 0.8], run_id="b")
        div = compare_runs(a, b)
        assert div.mean_eval == pytest.approx(0.1)
        assert div.max_eval == pytest.approx(0.1)
        assert div.mean_train == 0.0

    def test_randomized_pair_matches_recompute(self):
        rng = random.Random(21)
        train_a = [rng.uniform(0, 2) for _ in range(8)]
        train_b = [rng.uniform(0, 2) for _ in range(8)]
        eval_a = [rng.uniform(0, 2) for _ in range(8)]
        eval_b = [rng.uniform(0, 2) for _ in range(8)]
        div = compare_runs(self.run(train_a, eval_a), self.run(train_b, eval_b, "b"))
        train_diffs = [abs(x - y) for x, y in zip(train_a, train_b)]
        eval_diffs = [abs(x - y) for x, y in zip(eval_a, eval_b)]
        assert div.max_train == max(train_diffs)
        assert div.mean_train == pytest.approx(sum(train_diffs) / 8)
        assert div.max_eval == max(eval_diffs)
        assert div.mean_eval == pytest.approx(sum(eval_diffs) / 8)

    def test_symmetry(self):
        rng = random.Random(2)
        a = self.run([rng.uniform(0, 2) for _ in range(5)], [rng.uniform(0, 2) for _ in range(5)])
        b = self.run([rng.uniform(0, 2) for _ in range(5)], [rng.uniform(0, 2) for _ in range(5)], "b")
        assert compare_runs(a, b).max_train == compare_runs(b, a).max_train
        assert compare_runs(a, b).mean_eval == compare_runs(b, a).mean_eval

    def test_mismatched_epoch_sets_rejected(self):
        a = self.run([1.0, 0.8], [1.0, 0.9])
        b = self.run([1.0, 0.8, 0.6], [1.0, 0.9, 0.8], "b")
        with pytest.raises(ValueError, match="epoch sets"):
            compare_runs(a, b)


class TestExportCurveCsv:
    def test_roundtrip(self, tmp_path):
        rows = [(i, 2.0 - 0.13 * i, "" if i % 3 == 0 else 2.2 - 0.11 * i) for i in range(1, 11)]
        original = parse_loss_log(write_log(tmp_path / "orig.csv", rows))
        out = tmp_path / "exported.csv"
        assert export_curve_csv(original, out) == 10
        again = parse_loss_log(out, run_id=original.run_id)
        assert again == original

    def test_ten_points_eleven_lines(self, tmp_path):
        rows = [(i, 1.0 / i, 1.1 / i) for i in range(1, 11)]
        run = parse_loss_log(write_log(tmp_path / "r.csv", rows))
        out = tmp_path / "out.csv"
        export_curve_csv(run, out)
        assert len(out.read_text(encoding="utf-8").splitlines()) == 11

    def test_empty_run_rejected(self, tmp_path):
        run = RunRecord(run_id="empty", points=())
        with pytest.raises(ValueError):
            export_curve_csv(run, tmp_path / "x.csv")


class TestRecordValidation:
    def test_negative_loss_rejected(self):
        with pytest.raises(ValueError):
            LossCurvePoint(epoch=1, train_loss=-0.1)

    def test_nonfinite_loss_rejected(self):
        with pytest.raises(ValueError):
            LossCurvePoint(epoch=1, train_loss=float("nan"))
        with pytest.raises(ValueError):
            LossCurvePoint(epoch=1, train_loss=1.0, eval_loss=float("inf"))

    def test_epochs_strictly_increasing(self):
        with pytest.raises(ValueError):
            RunRecord(
                run_id="r",
                points=(
                    LossCurvePoint(1, 1.0),
                    LossCurvePoint(1, 0.9),
                ),
            )
