"""Table, curve and histogram documents for a finished benchmark."""
import io
import json
import logging
from importlib import metadata
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional

import numpy as np
import pandas as pd

from bo_loop.config import SignalVariance
from bo_loop.run_log import atomic_write_text
from common.exceptions import DataFormatError
from end_to_end.benchmark import (
    NOT_RUN,
    TABLE_COLUMNS,
    TABLE_KERNELS,
    BenchmarkReport,
    BenchmarkSuite,
    column_label,
)

logger = logging.getLogger(__name__)

HISTOGRAM_BIN_WIDTH = 0.05
REPORT_COLUMNS = ["label", "kernel", "acquisition", "signal_variance", "hyper_mode", "median", "p95"]
# Kernels expected to beat SE under EI with the optimistic fixed prior.
MATERN_FAMILY = ("M32", "M52", "2Mat")
DECISIONS = {
    "observation_noise": "fresh gaussian noise of benchgen.noise_std per evaluation on top of the resampled surface",
    "table_cells": "5 kernels x 7 columns, 2Mat with ES not run",
    "percentile": "nearest rank",
    "degenerate_surfaces": "resampled with the next attempt index, at most 20 attempts",
    "entropy_search": "fixed hyperparameters only",
}


class TableDocument(NamedTuple):
    csv: str
    text: str
    curves_csv: str
    histogram_csv: str


def format_cell(median: float, p95: float) -> str:
    return f"{100.0 * median:.1f} ({100.0 * p95:.1f})"


def column_header(column) -> str:
    acq, variance, mode = column
    return f"{acq.value} {variance.short} {mode.value}"


def _report_frame(report: BenchmarkReport) -> pd.DataFrame:
    variances = {v.short: v.value for v in SignalVariance}
    rows = []
    for s in report.summaries:
        kernel, acq, variance, mode = s.label.split("/")
        rows.append({
            "label": s.label, "kernel": kernel, "acquisition": acq,
            "signal_variance": variances.get(variance, variance), "hyper_mode": mode,
            "median": s.median, "p95": s.p95,
        })
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def _text_table(report: BenchmarkReport) -> str:
    by_label = {s.label: s for s in report.summaries}
    header = ["kernel"] + [column_header(c) for c in TABLE_COLUMNS]
    rows: List[List[str]] = []
    for kernel in TABLE_KERNELS:
        cells = []
        for column in TABLE_COLUMNS:
            s = by_label.get(column_label(kernel, column))
            if s is None or (kernel, column[0]) in NOT_RUN:
                cells.append("-")
            else:
                cells.append(format_cell(s.median, s.p95))
        if any(c != "-" for c in cells):
            rows.append([kernel.value] + cells)
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]

    def line(cells: List[str]) -> str:
        return "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(cells, widths))).rstrip()

    lines = [line(header)] + [line(r) for r in rows]
    tabled = {column_label(k, c) for k in TABLE_KERNELS for c in TABLE_COLUMNS}
    for s in report.summaries:
        if s.label not in tabled:
            lines.append(f"{s.label}: {format_cell(s.median, s.p95)}")
    return "\n".join(lines) + "\n"


def _curves_csv(report: BenchmarkReport) -> str:
    if not report.summaries:
        return "iteration\n"
    n = len(report.summaries[0].curve)
    frame = pd.DataFrame({"iteration": np.arange(1, n + 1)})
    for s in report.summaries:
        frame[s.label] = list(s.curve)
    return frame.to_csv(index=False)


def _histogram_csv(report: BenchmarkReport) -> str:
    columns = ["label", "bin_low", "bin_high", "frequency"]
    if not report.summaries:
        return ",".join(columns) + "\n"
    top = max(max(s.final_regrets) for s in report.summaries)
    n_bins = max(int(np.ceil(top / HISTOGRAM_BIN_WIDTH)), 1)
    edges = np.arange(n_bins + 1) * HISTOGRAM_BIN_WIDTH
    rows = []
    for s in report.summaries:
        counts, _ = np.histogram(s.final_regrets, bins=edges)
        for lo, hi, count in zip(edges[:-1], edges[1:], counts):
            rows.append({"label": s.label, "bin_low": lo, "bin_high": hi, "frequency": count / len(s.final_regrets)})
    return pd.DataFrame(rows, columns=columns).to_csv(index=False)


def report_table(report: BenchmarkReport) -> TableDocument:
    """Render the report as CSV (full precision), aligned text, curves and histogram CSVs."""
    return TableDocument(
        csv=_report_frame(report).to_csv(index=False),
        text=_text_table(report),
        curves_csv=_curves_csv(report),
        histogram_csv=_histogram_csv(report),
    )


def parse_report_csv(text: str) -> Dict[str, Dict[str, float]]:
    try:
        frame = pd.read_csv(io.StringIO(text), float_precision="round_trip")
    except (ValueError, pd.errors.ParserError) as e:
        raise DataFormatError(f"malformed report CSV: {e}") from e
    missing = set(REPORT_COLUMNS) - set(frame.columns)
    if missing:
        raise DataFormatError(f"report CSV lacks columns {sorted(missing)}")
    return {row.label: {"median": float(row.median), "p95": float(row.p95)} for row in frame.itertuples()}


def ordering_deviations(report: BenchmarkReport) -> List[str]:
    """Matérn-family kernels that did not beat SE under EI with the optimistic fixed prior."""
    by_label = {s.label: s for s in report.summaries}
    se = by_label.get("SE/EI/f1/fixed")
    if se is None:
        return []
    deviations = []
    for kernel in MATERN_FAMILY:
        other = by_label.get(f"{kernel}/EI/f1/fixed")
        if other is not None and other.median > se.median:
            deviations.append(f"{kernel} median {other.median:.4g} above SE median {se.median:.4g}")
    return deviations


def package_versions() -> Dict[str, Optional[str]]:
    versions: Dict[str, Optional[str]] = {}
    for name in ("numpy", "scipy", "pydantic", "pandas", "langgraph"):
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = None
    return versions


def manifest(report: BenchmarkReport, suite: BenchmarkSuite, deviations: List[str]) -> Dict[str, object]:
    return {
        "configs": suite.labels,
        "run_metadata": report.metadata,
        "seeds": {
            "master_seed": suite.master_seed,
            "surface": "derive(master_seed, run, STREAM_SURFACE, attempt)",
            "observation_noise": "derive(master_seed, run)",
            "optimizer": "derive(master_seed, run, STREAM_ACQUISITION)",
        },
        "acquisition": {k: v for k, v in suite.configs[0].acquisition.to_document().items() if k != "acq.kind"} if suite.configs else {},
        "gp": suite.configs[0].gp.model_dump() if suite.configs else {},
        "versions": package_versions(),
        "decisions": DECISIONS,
        "ordering_deviations": deviations,
    }


def write_report(report: BenchmarkReport, suite: BenchmarkSuite, out_dir: Path) -> TableDocument:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = report_table(report)
    deviations = ordering_deviations(report)
    for deviation in deviations:
        logger.warning("kernel ordering deviation: %s", deviation)
    atomic_write_text(out_dir / "report.csv", doc.csv)
    atomic_write_text(out_dir / "report.txt", doc.text)
    atomic_write_text(out_dir / "curves.csv", doc.curves_csv)
    atomic_write_text(out_dir / "histogram.csv", doc.histogram_csv)
    atomic_write_text(out_dir / "manifest.json", json.dumps(manifest(report, suite, deviations), indent=2, sort_keys=True) + "\n")
    logger.info("wrote benchmark report for %d configurations to %s", len(report.summaries), out_dir)
    return doc
