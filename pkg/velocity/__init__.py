from velocity.movement_fit import FitResult, cost_from_speed, fit_movement
from velocity.traces import TrackingTrace, parse_trace_csv, read_trace_csv

__all__ = ["FitResult", "cost_from_speed", "fit_movement", "TrackingTrace", "parse_trace_csv", "read_trace_csv"]
