"""Worker-count resolution shared by the CLI and the batch pipelines."""
from __future__ import annotations

import os

import numba

ENV_VAR = "CELFORGE_WORKERS"


def resolve_workers(workers: int | None = None) -> int:
    """Explicit value, else ``$CELFORGE_WORKERS``, else the logical core count."""
    if workers is None:
        env = os.environ.get(ENV_VAR)
        workers = int(env) if env else (os.cpu_count() or 1)
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    return workers


def configure_threads(workers: int) -> None:
    """Cap the thread count used by the compiled kernels."""
    numba.set_num_threads(max(1, min(workers, numba.config.NUMBA_NUM_THREADS)))
