"""Job runner: single active job per session, progress, error capture."""

import threading
import time

import pytest

from surveygen.errors import JobAlreadyRunning, UnknownJob
from surveygen.jobs import JobRunner


def test_submit_runs_to_done():
    runner = JobRunner(max_workers=2)
    seen = []
    job = runner.submit("s1", "compose", lambda progress: seen.append("ran"))
    finished = runner.wait(job.job_id)
    assert seen == ["ran"]
    assert finished.state == "done"
    assert finished.progress == 1.0
    assert finished.error == ""


def test_failure_is_captured_not_raised():
    runner = JobRunner(max_workers=2)

    def boom(progress):
        raise RuntimeError("stage exploded")

    job = runner.submit("s1", "categorize", boom)
    finished = runner.wait(job.job_id)
    assert finished.state == "failed"
    assert "RuntimeError" in finished.error
    assert "stage exploded" in finished.error


def test_one_active_job_per_session():
    runner = JobRunner(max_workers=4)
    release = threading.Event()
    job = runner.submit("s1", "compose", lambda progress: release.wait(5))
    with pytest.raises(JobAlreadyRunning):
        runner.submit("s1", "export", lambda progress: None)
    # a different session is unaffected
    other = runner.submit("s2", "compose", lambda progress: None)
    runner.wait(other.job_id)
    release.set()
    runner.wait(job.job_id)
    assert runner.active("s1") is None
    # slot freed: a new job is accepted
    runner.wait(runner.submit("s1", "export", lambda progress: None).job_id)


def test_progress_is_clamped_and_monotone():
    runner = JobRunner(max_workers=1)

    def fn(progress):
        progress(0.5, "half")
        progress(0.2, "ignored fraction, message kept")
        progress(7.0)

    job = runner.submit("s1", "ingest", fn)
    runner.wait(job.job_id)
    assert job.progress == 1.0
    assert job.message == "ignored fraction, message kept"


def test_progress_visible_while_running():
    runner = JobRunner(max_workers=1)
    release = threading.Event()

    def fn(progress):
        progress(0.4, "working")
        release.wait(5)

    job = runner.submit("s1", "compose", fn)
    deadline = time.time() + 5
    while job.progress < 0.4 and time.time() < deadline:
        time.sleep(0.01)
    assert runner.get(job.job_id).progress == pytest.approx(0.4)
    assert runner.get(job.job_id).state == "running"
    release.set()
    runner.wait(job.job_id)


def test_unknown_job_rejected():
    runner = JobRunner(max_workers=1)
    with pytest.raises(UnknownJob):
        runner.get("nope")


def test_snapshot_shape():
    runner = JobRunner(max_workers=1)
    job = runner.submit("s9", "search", lambda progress: None)
    runner.wait(job.job_id)
    snap = job.snapshot()
    assert snap["session_id"] == "s9"
    assert snap["stage"] == "search"
    assert snap["state"] == "done"
    assert set(snap) == {"job_id", "session_id", "stage", "state", "progress",
                         "message", "error"}
