"""Background job execution: a shared worker pool, one active job per session."""

from __future__ import annotations

import threading
import uuid
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field

from .errors import JobAlreadyRunning, UnknownJob


@dataclass
class Job:
    job_id: str
    session_id: str
    stage: str
    state: str = "running"  # running | done | failed
    progress: float = 0.0
    message: str = ""
    error: str = ""

    def snapshot(self) -> dict:
        return {
            "job_id": self.job_id,
            "session_id": self.session_id,
            "stage": self.stage,
            "state": self.state,
            "progress": round(self.progress, 4),
            "message": self.message,
            "error": self.error,
        }


class JobRunner:
    """Runs stage functions asynchronously; progress is polled, not pushed."""

    def __init__(self, max_workers: int = 8):
        self._pool = ThreadPoolExecutor(max_workers=max_workers,
                                        thread_name_prefix="stage")
        self._lock = threading.Lock()
        self._jobs: dict[str, Job] = {}
        self._futures: dict[str, Future] = {}
        self._active: dict[str, str] = {}  # session_id -> job_id

    def submit(self, session_id: str, stage: str, fn) -> Job:
        """fn(progress) does the work; progress(fraction, message) reports."""
        with self._lock:
            if session_id in self._active:
                raise JobAlreadyRunning(
                    f"session {session_id} already runs job {self._active[session_id]}")
            job = Job(job_id=uuid.uuid4().hex, session_id=session_id, stage=stage)
            self._jobs[job.job_id] = job
            self._active[session_id] = job.job_id
        self._futures[job.job_id] = self._pool.submit(self._run, job, fn)
        return job

    def _run(self, job: Job, fn):
        def progress(fraction: float, message: str = ""):
            # monotone and clamped so pollers never see it move backwards
            job.progress = min(1.0, max(job.progress, float(fraction)))
            if message:
                job.message = message

        try:
            fn(progress)
        except Exception as exc:
            job.error = f"{type(exc).__name__}: {exc}"
            job.state = "failed"
        else:
            job.progress = 1.0
            job.state = "done"
        finally:
            with self._lock:
                if self._active.get(job.session_id) == job.job_id:
                    del self._active[job.session_id]

    def get(self, job_id: str) -> Job:
        job = self._jobs.get(job_id)
        if job is None:
            raise UnknownJob(job_id)
        return job

    def active(self, session_id: str) -> Job | None:
        with self._lock:
            job_id = self._active.get(session_id)
        return self._jobs.get(job_id) if job_id else None

    def wait(self, job_id: str, timeout: float | None = None) -> Job:
        future = self._futures.get(job_id)
        if future is not None:
            future.result(timeout=timeout)
        return self.get(job_id)

    def shutdown(self):
        self._pool.shutdown(wait=False)
