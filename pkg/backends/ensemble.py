import logging
import os
from typing import Any, Callable, List, Optional, Sequence, Tuple

import psutil
from dask import compute, delayed

logger = logging.getLogger(__name__)

# ——— Tunable defaults ———
JOBS_ENV = "EXCITON_JOBS"
BYTES_PER_AMPLITUDE = 16     # complex128
DENSE_COPIES = 4             # H, eigenvectors, evolution operator, scratch


def detect_system_resources() -> Tuple[float, int]:
    mem = psutil.virtual_memory().available / (1024**3)
    cpu = psutil.cpu_count(logical=False) or psutil.cpu_count() or 1
    logger.info(f"Resources: mem={mem:.2f}GB cpu={cpu}")
    return mem, cpu


def default_jobs() -> Optional[int]:
    """Worker cap from the environment, or None when unset."""
    raw = os.environ.get(JOBS_ENV)
    if raw is None or raw.strip() == "":
        return None
    try:
        jobs = int(raw)
    except ValueError:
        raise ValueError(f"{JOBS_ENV} must be an integer, got {raw!r}") from None
    if jobs < 1:
        raise ValueError(f"{JOBS_ENV} must be >= 1, got {jobs}")
    return jobs


def calculate_optimal_workers(n_jobs: int, n_states: int, mem: float, cpu: int,
                              cap: Optional[int] = None) -> int:
    """Workers bounded by the job count, physical cores, ``cap`` and dense-matrix memory per job."""
    if n_jobs <= 0:
        return 1
    est_gb = DENSE_COPIES * BYTES_PER_AMPLITUDE * n_states**2 / 1024**3
    by_memory = max(1, int(mem // est_gb)) if est_gb > 0 else n_jobs
    workers = min(n_jobs, max(1, cpu), by_memory)
    if cap is not None:
        workers = min(workers, cap)
    logger.info(f"Workers: {workers} (jobs={n_jobs} est={est_gb:.3f}GB/job cap={cap})")
    return max(1, workers)


def run_ensemble(fn: Callable[[Any], Any], tasks: Sequence[Any], jobs: Optional[int] = 1,
                 n_states: int = 0) -> List[Any]:
    """
    Apply ``fn`` to every task and return results in task order.
    jobs == 1 runs synchronously; otherwise a dask threaded pool of the computed size.
    """
    tasks = list(tasks)
    if not tasks:
        return []
    cap = jobs if jobs is not None else default_jobs()
    if cap == 1 or len(tasks) == 1:
        return [fn(task) for task in tasks]
    mem, cpu = detect_system_resources()
    workers = calculate_optimal_workers(len(tasks), n_states, mem, cpu, cap)
    if workers == 1:
        return [fn(task) for task in tasks]
    lazy = [delayed(fn)(task) for task in tasks]
    return list(compute(*lazy, scheduler="threads", num_workers=workers))
