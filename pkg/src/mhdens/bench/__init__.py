"""Benchmark harness: experiments, manufactured solutions, reporting, CLI."""

from .experiments import (
    CHANNEL_TAGS,
    RunSpec,
    packaged_channel_mesh,
    run_channel,
    run_compare,
    run_convergence,
    run_stability,
)
from .reporting import ErrorReport, ErrorRow, TrajectoryErrors, write_csv

__all__ = [
    "CHANNEL_TAGS",
    "RunSpec",
    "packaged_channel_mesh",
    "run_channel",
    "run_compare",
    "run_convergence",
    "run_stability",
    "ErrorReport",
    "ErrorRow",
    "TrajectoryErrors",
    "write_csv",
]
