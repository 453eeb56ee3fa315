"""Distributed Android dynamic-analysis pipeline over a simulated cluster."""

from ._core import (
    __version__,
    build_ready_queue,
    classify,
    diff_dirs,
    digests,
    explore,
    replay,
    run,
    simulate_run,
    speedup,
    sweep,
    sweep_csv,
    theoretical_runtime,
    wave_bound,
)

__all__ = [
    "__version__",
    "build_ready_queue",
    "classify",
    "diff_dirs",
    "digests",
    "explore",
    "replay",
    "run",
    "simulate_run",
    "speedup",
    "sweep",
    "sweep_csv",
    "theoretical_runtime",
    "wave_bound",
]
