import json

import numpy as np
import pytest

from benchgen.surface_builder import normalized_regret, prepare_grid
from bo_loop.config import BoConfig
from bo_loop.run_log import RunLog
from bo_loop.state_store import JsonFileStateStore
from common.exceptions import DataFormatError, UnsupportedConfigurationError
from controller_sim.light_pattern import unpack_frame
from controller_sim.plant import PlantSpec, simulate_trace
from end_to_end import benchmark
from end_to_end.benchmark import (
    RANDOM_BASELINE_LABEL,
    BenchmarkReport,
    BenchmarkSuite,
    ConfigSummary,
    nearest_rank_percentile,
    run_benchmark,
    runlog_path,
    table_labels,
)
from end_to_end.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from end_to_end.closed_loop_graph import run_closed_loop
from end_to_end.report import format_cell, ordering_deviations, parse_report_csv, report_table, write_report
from gp_core.hyperparams import ControllerParams

NEAR_OPTIMUM = "400.0,42.0"


def _suite(text: str) -> BenchmarkSuite:
    return BenchmarkSuite.loads("bench.random_baseline = false\n" + text)


def _surface_for(suite: BenchmarkSuite, run: int):
    return benchmark._surface(prepare_grid(suite.source_grid()), suite.master_seed, run)


def _summary(label, median, p95, n=4):
    return ConfigSummary(label=label, median=median, p95=p95, curve=(p95, median), final_regrets=(median,) * n)


def oracle_factory(surface):
    return lambda iteration, gp: surface.theta_opt if iteration == 2 else None


class TestSuiteConfig:
    def test_table_layout(self):
        labels = table_labels()
        assert len(labels) == 34 == len(set(labels))
        assert "2Mat/ES/f1/fixed" not in labels
        assert "SE/ES/f1/fixed" in labels and "2Mat/PI/f1/learned" in labels
        suite = BenchmarkSuite.loads("")
        assert suite.labels == labels + [RANDOM_BASELINE_LABEL]
        assert (suite.runs, suite.budget, suite.v_star) == (200, 20, 3.0)

    def test_unsupported_configurations_are_rejected_at_load(self):
        with pytest.raises(UnsupportedConfigurationError):
            _suite("bench.configs = SE/ES/f1/learned\n")
        with pytest.raises(DataFormatError):
            _suite("bench.configs = SE/EI/f1/fixed, SE/EI/f1/fixed\n")
        with pytest.raises(DataFormatError):
            _suite("bench.configs = SE/EI/f1/fixed\nbench.runs = 0\n")

    def test_run_seeds_are_shared_across_configurations(self):
        suite = _suite("bench.configs = SE/EI/f1/fixed, M52/PI/f2/learned\n")
        a, b = (suite.config_for_run(c, 5) for c in suite.configs)
        assert a.seed == b.seed != suite.config_for_run(suite.configs[0], 6).seed

    def test_percentile_is_nearest_rank(self):
        values = np.arange(1, 21, dtype=float)
        assert nearest_rank_percentile(values, 95.0) == 19.0
        assert nearest_rank_percentile([0.3], 95.0) == 0.3


class TestRunBenchmark:
    def test_single_iteration_scores_the_first_incumbent(self, tmp_path):
        suite = _suite(f"bench.configs = M52/EI/f1/fixed\nbench.runs = 1\nbench.budget = 1\ninitial_theta = {NEAR_OPTIMUM}\n")
        report = run_benchmark(suite, out_dir=tmp_path)
        surface = _surface_for(suite, 0)
        log = RunLog.read(runlog_path(tmp_path, "M52/EI/f1/fixed", 0))
        record = log.records[0]
        assert record.theta == ControllerParams.parse(NEAR_OPTIMUM)
        assert report.summaries[0].median == normalized_regret(surface, record.incumbent_theta)
        assert report.summaries[0].median == pytest.approx(normalized_regret(surface, record.theta), abs=0.01)

    def test_oracle_proposal_reaches_the_optimum(self):
        suite = _suite("bench.configs = M52/EI/f1/fixed\nbench.runs = 3\nbench.budget = 2\n")
        report = run_benchmark(suite, hook_factory=oracle_factory)
        assert report.summaries[0].median < 1e-3
        assert len(report.summaries[0].curve) == 2

    def test_configurations_share_surfaces(self, tmp_path):
        suite = _suite("bench.configs = SE/EI/f1/fixed, RQ/PI/f1/fixed\nbench.runs = 2\nbench.budget = 2\n")
        run_benchmark(suite, out_dir=tmp_path)
        for run in range(2):
            hashes = {
                RunLog.read(runlog_path(tmp_path, label, run)).records[-1].surface_hash
                for label in suite.labels
            }
            assert hashes == {_surface_for(suite, run).surface_hash}

    def test_resume_skips_logged_pairs(self, tmp_path, monkeypatch):
        suite = _suite("bench.configs = SE/EI/f1/fixed\nbench.runs = 2\nbench.budget = 2\n")
        first = run_benchmark(suite, out_dir=tmp_path)

        def fail(*args, **kwargs):
            raise AssertionError("pair should have been resumed from disk")

        monkeypatch.setattr(benchmark, "execute_pair", fail)
        assert run_benchmark(suite, out_dir=tmp_path) == first

    def test_reports_are_byte_identical(self, tmp_path):
        suite = _suite("bench.configs = M32/EI/f1/fixed, M52/RANDOM/f1/fixed\nbench.runs = 2\nbench.budget = 3\nbench.seed = 11\n")
        docs = [write_report(run_benchmark(suite), suite, tmp_path / name) for name in ("a", "b")]
        assert docs[0] == docs[1]
        for name in ("report.csv", "curves.csv", "histogram.csv", "manifest.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    @pytest.mark.slow
    def test_headline_configuration_beats_random_search(self):
        suite = BenchmarkSuite.loads("bench.configs = 2Mat/EI/f1/learned\nbench.workers = 4\n")
        report = run_benchmark(suite)
        learned = report.summary("2Mat/EI/f1/learned")
        assert learned.median <= 0.15
        assert learned.median < report.summary(RANDOM_BASELINE_LABEL).median


class TestReport:
    def test_cell_format(self):
        assert format_cell(0.034, 0.230) == "3.4 (23.0)"
        assert format_cell(0.0, 1.0) == "0.0 (100.0)"

    def test_empty_report_has_header_only(self):
        doc = report_table(BenchmarkReport())
        assert doc.text.count("\n") == 1
        assert doc.text.startswith("kernel")
        assert doc.csv.strip() == "label,kernel,acquisition,signal_variance,hyper_mode,median,p95"
        assert parse_report_csv(doc.csv) == {}

    def test_full_precision_csv_and_text_layout(self):
        report = BenchmarkReport(summaries=(
            _summary("SE/EI/f1/fixed", 0.123456789012345, 0.4),
            _summary("M52/EI/f1/fixed", 0.2, 0.5),
            _summary(RANDOM_BASELINE_LABEL, 0.3, 0.6),
        ))
        doc = report_table(report)
        parsed = parse_report_csv(doc.csv)
        assert parsed["SE/EI/f1/fixed"] == {"median": 0.123456789012345, "p95": 0.4}
        lines = doc.text.splitlines()
        assert lines[1].startswith("SE") and "12.3 (40.0)" in lines[1] and "-" in lines[1]
        assert lines[-1] == f"{RANDOM_BASELINE_LABEL}: 30.0 (60.0)"
        assert ordering_deviations(report) == ["M52 median 0.2 above SE median 0.1235"]
        with pytest.raises(DataFormatError):
            parse_report_csv("label,median\nx,1\n")

    def test_histogram_frequencies(self):
        doc = report_table(BenchmarkReport(summaries=(_summary("SE/EI/f1/fixed", 0.12, 0.12),)))
        lines = doc.histogram_csv.splitlines()
        assert lines[0] == "label,bin_low,bin_high,frequency"
        frequencies = [float(line.rsplit(",", 1)[1]) for line in lines[1:]]
        assert sum(frequencies) == pytest.approx(1.0)
        assert frequencies[2] == 1.0


class TestCli:
    def test_ask_tell_status(self, tmp_path, capsys):
        state = str(tmp_path / "state.json")
        assert main(["ask", "--state", state]) == EXIT_OK
        assert capsys.readouterr().out.strip() == "645.0,30.0"
        digest = JsonFileStateStore(state).digest()
        assert main(["tell", "--state", state, "--theta", "500,25", "--cost", "1.0"]) == EXIT_DATA
        assert JsonFileStateStore(state).digest() == digest
        assert main(["tell", "--state", state, "--theta", "645.0,30.0", "--cost", "1.4"]) == EXIT_OK
        capsys.readouterr()
        assert main(["status", "--state", state]) == EXIT_OK
        status = json.loads(capsys.readouterr().out)
        assert status["iteration"] == 1 and status["phase"] == "awaiting_ask"
        assert status["best_observed"]["cost"] == 1.4

    def test_wall_time_flag(self, tmp_path, capsys):
        state = tmp_path / "state.json"
        assert main(["ask", "--state", str(state)]) == EXIT_OK
        assert '"asked_at"' not in state.read_text()
        theta = capsys.readouterr().out.strip()
        assert main(["tell", "--state", str(state), "--theta", theta, "--cost", "1.0", "--record-wall-time"]) == EXIT_OK
        assert '"wall_time_s": null' in state.read_text()
        assert main(["ask", "--state", str(state), "--record-wall-time"]) == EXIT_OK
        assert '"asked_at"' in state.read_text()

    def test_usage_errors(self, tmp_path):
        assert main(["dance"]) == EXIT_USAGE
        assert main(["pattern", "--out", str(tmp_path / "f.bin")]) == EXIT_USAGE
        assert main(["--log-level", "CHATTY", "status", "--state", str(tmp_path / "s.json")]) == EXIT_USAGE
        assert main(["status", "--state", str(tmp_path / "missing.json")]) == EXIT_DATA

    def test_fit_velocity(self, tmp_path, capsys):
        plant = PlantSpec()
        theta = ControllerParams.parse(NEAR_OPTIMUM)
        path = tmp_path / "trace.csv"
        simulate_trace(plant, theta, seed=3).write_csv(path)
        assert main(["fit-velocity", "--trace", str(path), "--v-star", "3.0"]) == EXIT_OK
        fit = json.loads(capsys.readouterr().out)
        assert fit["v_m"] == pytest.approx(plant.speed(theta), rel=0.02)
        assert fit["cost"] == pytest.approx(abs(3.0 - fit["v_m"]))
        assert "covariance" not in fit

    def test_pattern(self, tmp_path):
        out = tmp_path / "frame.bin"
        args = ["pattern", "--theta", "645,30", "--out", str(out), "--width", "64", "--height", "2", "--pgm"]
        assert main(args) == EXIT_OK
        assert unpack_frame(out.read_bytes()).shape == (2, 64)
        assert (tmp_path / "frame.pgm").exists()
        assert main(["pattern", "--wavelength-px", "40", "--duty-pct", "25", "--out", str(out), "--width", "80"]) == EXIT_OK
        assert unpack_frame(out.read_bytes())[0, :40].mean() == pytest.approx(0.25, abs=1 / 40)

    def test_surface(self, tmp_path, capsys):
        out = tmp_path / "surface.json"
        assert main(["surface", "--seed", "4", "--out", str(out)]) == EXIT_OK
        printed = json.loads(capsys.readouterr().out)
        assert printed == json.loads(out.read_text())
        assert printed["optimum"]["cost"] > 0

    def test_bench(self, tmp_path, capsys):
        config = tmp_path / "bench.cfg"
        config.write_text("bench.configs = M52/EI/f1/fixed\nbench.runs = 2\nbench.budget = 2\nbench.random_baseline = false\n")
        assert main(["bench", "--config", str(config), "--out", str(tmp_path / "out")]) == EXIT_OK
        assert capsys.readouterr().out.startswith("kernel")
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["configs"] == ["M52/EI/f1/fixed"]
        config.write_text("bench.configs = 2Mat/ES/f1/learned\n")
        assert main(["bench", "--config", str(config), "--out", str(tmp_path / "out")]) == EXIT_DATA


class TestClosedLoop:
    def test_short_loop_and_resume(self, tmp_path):
        store = JsonFileStateStore(tmp_path / "state.json")
        report = run_closed_loop(store, config=BoConfig(budget=2, seed=3), duration_s=8.0)
        assert report.iterations == 2
        assert len(report.measured_costs) == 2
        again = run_closed_loop(store, duration_s=8.0)
        assert again.iterations == 2
        assert again.measured_costs == report.measured_costs

    def test_repeated_loop_writes_identical_state(self, tmp_path):
        blobs = []
        for name in ("first", "second"):
            store = JsonFileStateStore(tmp_path / name / "state.json")
            run_closed_loop(store, config=BoConfig(budget=2, seed=3), duration_s=8.0)
            blobs.append(store.path.read_bytes())
        assert blobs[0] == blobs[1]

    @pytest.mark.slow
    def test_reaches_most_of_the_optimum_speed(self, tmp_path):
        store = JsonFileStateStore(tmp_path / "state.json")
        report = run_closed_loop(store, config=BoConfig(budget=20, seed=1))
        assert report.fraction_of_optimum >= 0.85
        assert report.incumbent.speed_mean > report.initial.speed_mean
