from end_to_end.benchmark import BenchmarkReport, BenchmarkSuite, run_benchmark, table_labels
from end_to_end.closed_loop_graph import ClosedLoopReport, run_closed_loop
from end_to_end.report import report_table, write_report
from end_to_end.run_graph import run_on_surface

__all__ = [
    "BenchmarkReport", "BenchmarkSuite", "run_benchmark", "table_labels", "ClosedLoopReport",
    "run_closed_loop", "report_table", "write_report", "run_on_surface",
]
