# tests/backends/test_ensemble.py
import pytest

from backends.ensemble import (
    JOBS_ENV,
    calculate_optimal_workers,
    default_jobs,
    detect_system_resources,
    run_ensemble,
)


def test_detect_system_resources():
    memory, cpu_count = detect_system_resources()
    assert memory > 0, "Memory should be detected as positive."
    assert cpu_count > 0, "CPU count should be positive."


def test_workers_follow_cores_and_cap():
    assert calculate_optimal_workers(10, 100, 8.0, 4) == 4, "Workers should not exceed physical cores."
    assert calculate_optimal_workers(2, 100, 8.0, 4) == 2, "Workers should not exceed the job count."
    assert calculate_optimal_workers(10, 100, 8.0, 4, cap=3) == 3, "An explicit cap wins."
    assert calculate_optimal_workers(0, 100, 8.0, 4) == 1, "No jobs still means one worker."


def test_workers_limited_by_dense_memory():
    # 10^4 states need about 6 GB per dense job
    assert calculate_optimal_workers(10, 10_000, 8.0, 16) == 1, "Large Hamiltonians should run one at a time."


def test_run_ensemble_preserves_order():
    tasks = list(range(12))
    assert run_ensemble(lambda x: x * x, tasks, jobs=1) == [x * x for x in tasks], "Serial order."
    assert run_ensemble(lambda x: x * x, tasks, jobs=3) == [x * x for x in tasks], "Threaded order."
    assert run_ensemble(lambda x: x, [], jobs=4) == [], "No tasks, no results."


def test_default_jobs_from_environment(monkeypatch):
    monkeypatch.delenv(JOBS_ENV, raising=False)
    assert default_jobs() is None, "Unset means no cap."
    monkeypatch.setenv(JOBS_ENV, "3")
    assert default_jobs() == 3, "The variable caps the worker count."
    monkeypatch.setenv(JOBS_ENV, "many")
    with pytest.raises(ValueError):
        default_jobs()
    monkeypatch.setenv(JOBS_ENV, "0")
    with pytest.raises(ValueError):
        default_jobs()


def test_environment_cap_applies_when_jobs_unset(monkeypatch):
    monkeypatch.setenv(JOBS_ENV, "1")
    seen = []
    assert run_ensemble(lambda x: seen.append(x) or x, [3, 1, 2], jobs=None) == [3, 1, 2], "Results in order."
    assert seen == [3, 1, 2], "A cap of one runs the tasks serially in order."
