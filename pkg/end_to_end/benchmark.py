"""
Paired benchmark over semi-synthetic surfaces.

Every configuration sees the same surface and the same observation-noise
stream for a given run index, so per-run regrets of two configurations can be
differenced directly. (config, run) pairs are independent and are dispatched
to a process pool; results are keyed by indices, so completion order does not
matter. Finished pairs leave a run log on disk and are skipped on rerun.
"""
import functools
import logging
import math
import multiprocessing
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from acquisition.base_acquisition import AcquisitionKind
from benchgen.grid_data import (
    DEFAULT_NOISE_STD,
    DEFAULT_OBSERVED_CELLS,
    GridData,
    default_grid,
    read_grid_csv,
)
from benchgen.surface_builder import CostSurface, build_surface_with_retry, prepare_grid
from bo_loop.config import BoConfig, HyperMode, SignalVariance
from bo_loop.run_log import RunLog
from common import seeding
from common.exceptions import DataFormatError, GaitTuneError
from common.kv_document import get_bool, load_kv, parse_kv
from end_to_end.run_graph import HookFactory, run_on_surface
from gp_core.hyperparams import KernelKind

logger = logging.getLogger(__name__)

BENCH_V_STAR = 3.0
TABLE_KERNELS = (KernelKind.SE, KernelKind.RQ, KernelKind.M32, KernelKind.M52, KernelKind.TWO_MAT)
TABLE_COLUMNS: Tuple[Tuple[AcquisitionKind, SignalVariance, HyperMode], ...] = (
    (AcquisitionKind.EI, SignalVariance.OPTIMISTIC, HyperMode.FIXED),
    (AcquisitionKind.EI, SignalVariance.OPTIMISTIC, HyperMode.LEARNED),
    (AcquisitionKind.EI, SignalVariance.PESSIMISTIC, HyperMode.FIXED),
    (AcquisitionKind.EI, SignalVariance.PESSIMISTIC, HyperMode.LEARNED),
    (AcquisitionKind.PI, SignalVariance.OPTIMISTIC, HyperMode.FIXED),
    (AcquisitionKind.PI, SignalVariance.OPTIMISTIC, HyperMode.LEARNED),
    (AcquisitionKind.ES, SignalVariance.OPTIMISTIC, HyperMode.FIXED),
)
# Not part of the table layout.
NOT_RUN = {(KernelKind.TWO_MAT, AcquisitionKind.ES)}
RANDOM_BASELINE_LABEL = "M52/RANDOM/f1/fixed"


def column_label(kernel: KernelKind, column: Tuple[AcquisitionKind, SignalVariance, HyperMode]) -> str:
    acq, variance, mode = column
    return f"{kernel.value}/{acq.value}/{variance.short}/{mode.value}"


def table_labels() -> List[str]:
    return [
        column_label(kernel, column)
        for kernel in TABLE_KERNELS
        for column in TABLE_COLUMNS
        if (kernel, column[0]) not in NOT_RUN
    ]


class BenchmarkSuite(BaseModel):
    model_config = ConfigDict(frozen=True)

    configs: Tuple[BoConfig, ...] = Field(description="Configurations, seeds are assigned per run.")
    runs: int = Field(default=200, ge=1)
    budget: int = Field(default=20, ge=1)
    master_seed: int = Field(default=0, ge=0)
    workers: int = Field(default=1, ge=1)
    v_star: float = BENCH_V_STAR
    grid_csv: Optional[str] = None
    observed_cells: int = Field(default=DEFAULT_OBSERVED_CELLS, ge=1)
    mask_seed: int = Field(default=0, ge=0)
    noise_std: float = Field(default=DEFAULT_NOISE_STD, ge=0)
    record_wall_time: bool = False

    @property
    def labels(self) -> List[str]:
        return [c.label for c in self.configs]

    @classmethod
    def from_document(cls, doc: Dict[str, str]) -> "BenchmarkSuite":
        """Build from a flat run config; unsupported configurations are rejected here."""
        base = BoConfig.from_document(doc)
        requested = doc.get("bench.configs", "table")
        labels: List[str] = []
        for item in (part.strip() for part in requested.split(",")):
            if not item:
                continue
            labels.extend(table_labels() if item == "table" else [item])
        if get_bool(doc, "bench.random_baseline", True) and RANDOM_BASELINE_LABEL not in labels:
            labels.append(RANDOM_BASELINE_LABEL)
        if len(set(labels)) != len(labels):
            raise DataFormatError("bench.configs lists a configuration twice")
        try:
            budget = int(doc.get("bench.budget", 20))
            configs = tuple(
                BoConfig.from_label(label, acquisition=base.acquisition, gp=base.gp, budget=budget,
                                    initial_theta=base.initial_theta)
                for label in labels
            )
            return cls(
                configs=configs,
                runs=int(doc.get("bench.runs", 200)),
                budget=budget,
                master_seed=int(doc.get("bench.seed", 0)),
                workers=int(doc.get("bench.workers", 1)),
                v_star=float(doc.get("bench.v_star", BENCH_V_STAR)),
                grid_csv=doc.get("bench.grid_csv") or None,
                observed_cells=int(doc.get("benchgen.observed_cells", DEFAULT_OBSERVED_CELLS)),
                mask_seed=int(doc.get("benchgen.mask_seed", 0)),
                noise_std=float(doc.get("benchgen.noise_std", DEFAULT_NOISE_STD)),
                record_wall_time=get_bool(doc, "bench.record_wall_time", False),
            )
        except GaitTuneError:
            raise
        except ValueError as e:
            raise DataFormatError(f"invalid benchmark configuration: {e}") from e

    @classmethod
    def loads(cls, text: str) -> "BenchmarkSuite":
        return cls.from_document(parse_kv(text))

    @classmethod
    def load(cls, path) -> "BenchmarkSuite":
        return cls.from_document(load_kv(path))

    def source_grid(self) -> GridData:
        if self.grid_csv:
            return read_grid_csv(self.grid_csv, noise_std=self.noise_std)
        return default_grid(v_star=self.v_star, n_observed=self.observed_cells, mask_seed=self.mask_seed, noise_std=self.noise_std)

    def config_for_run(self, config: BoConfig, run: int) -> BoConfig:
        return config.model_copy(update={"seed": seeding.derive(self.master_seed, run, seeding.STREAM_ACQUISITION)})


class ConfigSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str
    median: float
    p95: float
    curve: Tuple[float, ...] = Field(description="Median regret after each iteration.")
    final_regrets: Tuple[float, ...]


class BenchmarkReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    summaries: Tuple[ConfigSummary, ...] = ()
    metadata: Dict[str, object] = {}

    def summary(self, label: str) -> ConfigSummary:
        for s in self.summaries:
            if s.label == label:
                return s
        raise KeyError(label)


def nearest_rank_percentile(values, q: float) -> float:
    ordered = np.sort(np.asarray(values, dtype=float))
    rank = max(int(math.ceil(q / 100.0 * ordered.size)), 1)
    return float(ordered[rank - 1])


def summarize(label: str, curves: np.ndarray) -> ConfigSummary:
    """``curves`` has one row per run and one column per iteration."""
    final = curves[:, -1]
    return ConfigSummary(
        label=label,
        median=float(np.median(final)),
        p95=nearest_rank_percentile(final, 95.0),
        curve=tuple(float(v) for v in np.median(curves, axis=0)),
        final_regrets=tuple(float(v) for v in final),
    )


def runlog_path(out_dir: Path, label: str, run: int) -> Path:
    return out_dir / f"runlog-{label.replace('/', '_')}-{run:04d}.jsonl"


@functools.lru_cache(maxsize=64)
def _surface(grid: GridData, master_seed: int, run: int) -> CostSurface:
    return build_surface_with_retry(grid, (master_seed, run, seeding.STREAM_SURFACE))


def _completed(path: Path, budget: int) -> Optional[List[float]]:
    if not path.exists():
        return None
    try:
        log = RunLog.read(path)
    except DataFormatError:
        logger.warning("discarding unreadable run log %s", path)
        return None
    if len(log) != budget or any(r.regret is None for r in log.records):
        return None
    return [r.regret for r in log.records]


class PairTask(BaseModel):
    model_config = ConfigDict(frozen=True)

    suite: BenchmarkSuite
    grid: GridData
    config_index: int
    run: int
    out_dir: Optional[str] = None


def execute_pair(task: PairTask, hook_factory: Optional[HookFactory] = None) -> Tuple[int, int, List[float]]:
    suite = task.suite
    config = suite.config_for_run(suite.configs[task.config_index], task.run)
    surface = _surface(task.grid, suite.master_seed, task.run)
    hook = hook_factory(surface) if hook_factory else None
    log = run_on_surface(
        config, surface,
        noise_seed=seeding.derive(suite.master_seed, task.run),
        noise_std=suite.noise_std,
        proposal_hook=hook,
    )
    if task.out_dir is not None:
        log.write(runlog_path(Path(task.out_dir), config.label, task.run), include_wall_time=suite.record_wall_time)
    logger.info("finished %s run %d: regret %.4g", config.label, task.run, log.records[-1].regret)
    return task.config_index, task.run, [r.regret for r in log.records]


def run_benchmark(
    suite: BenchmarkSuite,
    out_dir: Optional[Path] = None,
    hook_factory: Optional[HookFactory] = None,
) -> BenchmarkReport:
    """Run every (config, run) pair not already logged under ``out_dir``.

    ``hook_factory`` must be a module-level callable when ``suite.workers > 1``.
    """
    grid = prepare_grid(suite.source_grid())
    curves = np.full((len(suite.configs), suite.runs, suite.budget), np.nan)
    tasks: List[PairTask] = []
    for ci, config in enumerate(suite.configs):
        for run in range(suite.runs):
            done = _completed(runlog_path(out_dir, config.label, run), suite.budget) if out_dir else None
            if done is not None:
                curves[ci, run] = done
                continue
            tasks.append(PairTask(suite=suite, grid=grid, config_index=ci, run=run,
                                  out_dir=str(out_dir) if out_dir else None))
    skipped = len(suite.configs) * suite.runs - len(tasks)
    if skipped:
        logger.info("resuming: %d finished (config, run) pairs found on disk", skipped)

    if suite.workers == 1 or len(tasks) <= 1:
        results = [execute_pair(task, hook_factory) for task in tasks]
    else:
        worker = functools.partial(execute_pair, hook_factory=hook_factory)
        with multiprocessing.Pool(processes=suite.workers) as pool:
            results = pool.map(worker, tasks, chunksize=1)
    for ci, run, regrets in results:
        curves[ci, run] = regrets

    summaries = tuple(summarize(config.label, curves[ci]) for ci, config in enumerate(suite.configs))
    metadata = {
        "master_seed": suite.master_seed,
        "runs": suite.runs,
        "budget": suite.budget,
        "v_star": suite.v_star,
        "source_grid": suite.grid_csv or "default plant grid",
        "observed_cells": suite.observed_cells,
        "mask_seed": suite.mask_seed,
        "noise_std": suite.noise_std,
    }
    return BenchmarkReport(summaries=summaries, metadata=metadata)
