"""CLI subcommands end to end, including the figure/CSV report outputs."""

import csv
import json

import pytest
from click.testing import CliRunner

from copaint.brush import blank_canvas
from copaint.cli import main
from copaint.fixtures import write_fixtures
from copaint.formats import export_image, load_plan


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def fixture_paths(tmp_path):
    return write_fixtures(tmp_path / "fixtures", size=64)


class TestGradcheck:
    def test_small_run_passes_and_reports(self, runner, tmp_path):
        report_dir = tmp_path / "report"
        result = runner.invoke(main, ["gradcheck", "--scenes", "5",
                                      "--report-dir", str(report_dir)])
        assert result.exit_code == 0, result.output
        assert "PASS" in result.output
        rows = list(csv.reader(open(report_dir / "gradcheck.csv")))
        assert rows[0] == ["seed", "stamps", "max_rel_err", "max_abs_err", "passed"]
        assert len(rows) == 6
        assert (report_dir / "gradcheck.png").exists()


class TestOptimize:
    def test_emits_plan_trace_and_figure(self, runner, tmp_path, fixture_paths):
        out = tmp_path / "fit.pcplan.json"
        result = runner.invoke(main, [
            "optimize", "--target", str(fixture_paths["target"]),
            "--stamps", "12", "--seed", "3", "--iterations", "8",
            "--out", str(out)])
        assert result.exit_code == 0, result.output
        plan = load_plan(out.read_bytes())
        assert len(plan.stamps) == 12
        trace_rows = list(csv.reader(open(out.with_suffix(".trace.csv"))))
        assert trace_rows[0] == ["iteration", "loss"]
        assert len(trace_rows) >= 2
        assert out.with_suffix(".loss.png").exists()


class TestSequence:
    def test_full_pipeline(self, runner, tmp_path, fixture_paths):
        out = tmp_path / "plan.pcplan.json"
        snaps = tmp_path / "snaps"
        result = runner.invoke(main, [
            "sequence",
            "--target", str(fixture_paths["target"]),
            "--labels", str(fixture_paths["labels"]),
            "--normals", str(fixture_paths["normals"]),
            "--attention", str(fixture_paths["attention"]),
            "--order", str(fixture_paths["order"]),
            "--seed", "1", "--budget", "30",
            "--out", str(out), "--snapshots", str(snaps)])
        assert result.exit_code == 0, result.output
        plan = load_plan(out.read_bytes())
        assert len(plan.stamps) == 30
        assert len(list(snaps.glob("stroke_*.png"))) == 30
        assert out.with_suffix(".progression.png").exists()
        assert out.with_suffix(".trace.csv").exists()


class TestMetrics:
    def test_one_line_json(self, runner, tmp_path):
        a = blank_canvas(32, 32, (0.0, 0.0, 0.0))
        b = blank_canvas(32, 32, (1.0, 1.0, 1.0))
        pa, pb = tmp_path / "a.png", tmp_path / "b.png"
        pa.write_bytes(export_image(a))
        pb.write_bytes(export_image(b))
        result = runner.invoke(main, ["metrics", str(pa), str(pb)])
        assert result.exit_code == 0, result.output
        line = result.output.strip()
        assert "\n" not in line
        decoded = json.loads(line)
        assert decoded["psnr"] == pytest.approx(0.0, abs=0.01)
        result_same = runner.invoke(main, ["metrics", str(pa), str(pa)])
        assert "Infinity" in result_same.output


class TestServe:
    def test_rejects_bad_canvas_spec(self, runner):
        result = runner.invoke(main, ["serve", "--canvas", "banana"])
        assert result.exit_code != 0

    def test_rejects_mismatched_reference(self, runner, tmp_path):
        ref = tmp_path / "ref.png"
        ref.write_bytes(export_image(blank_canvas(16, 16)))
        result = runner.invoke(main, ["serve", "--canvas", "32x32",
                                      "--reference", str(ref)])
        assert result.exit_code != 0
        assert "reference" in result.output
