"""Asynchronous processing jobs: a FIFO queue drained by one background worker.

At most one job runs at a time; queued jobs start in submission order.
Job state is persisted in the datastore after every change, so a restart
can never lose a job silently: queued jobs are re-enqueued, and a job that
was mid-run when the process died is marked Failed with a reason.
"""

from __future__ import annotations

import queue
import threading
import uuid
from dataclasses import dataclass, replace
from datetime import datetime
from enum import Enum
from pathlib import Path

from .datastore import Datastore, GeoPoint, format_timestamp, parse_timestamp, utc_now
from .pipeline import PipelineConfig
from .runner import find_images, process_files


class JobState(Enum):
    QUEUED = "Queued"
    RUNNING = "Running"
    DONE = "Done"
    FAILED = "Failed"


_ALLOWED_TRANSITIONS = {
    JobState.QUEUED: {JobState.RUNNING, JobState.FAILED},
    JobState.RUNNING: {JobState.DONE, JobState.FAILED},
    JobState.DONE: set(),
    JobState.FAILED: set(),
}


@dataclass(frozen=True, kw_only=True)
class ProcessingJob:
    id: str
    state: JobState
    submitted_at: datetime
    finished_at: datetime | None = None
    total_images: int = 0
    processed: int = 0
    failures: tuple[tuple[str, str], ...] = ()

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "state": self.state.value,
            "submitted_at": format_timestamp(self.submitted_at),
            "finished_at": format_timestamp(self.finished_at) if self.finished_at else None,
            "total_images": self.total_images,
            "processed": self.processed,
            "failures": [[name, reason] for name, reason in self.failures],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProcessingJob":
        return cls(
            id=d["id"],
            state=JobState(d["state"]),
            submitted_at=parse_timestamp(d["submitted_at"]),
            finished_at=parse_timestamp(d["finished_at"]) if d["finished_at"] else None,
            total_images=d["total_images"],
            processed=d["processed"],
            failures=tuple((n, r) for n, r in d["failures"]),
        )


class JobExecutor:
    """Single-worker job runner bound to a datastore and pipeline config."""

    def __init__(
        self,
        store: Datastore,
        cfg: PipelineConfig,
        *,
        default_geo: GeoPoint | None = None,
        poll_interval: float = 0.1,
    ):
        self.store = store
        self.cfg = cfg
        self.default_geo = default_geo
        self._queue: queue.Queue[str] = queue.Queue()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._poll_interval = poll_interval

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> None:
        self.recover()
        self._stop.clear()
        self._thread = threading.Thread(target=self._run, name="job-worker", daemon=True)
        self._thread.start()

    def stop(self, timeout: float = 10.0) -> None:
        self._stop.set()
        if self._thread:
            self._thread.join(timeout=timeout)
            self._thread = None

    def recover(self) -> None:
        """Reconcile persisted jobs after a restart."""
        jobs = sorted(self.store.load_jobs(), key=lambda d: (d["submitted_at"], d["id"]))
        for raw in jobs:
            job = ProcessingJob.from_dict(raw)
            if job.state == JobState.RUNNING:
                self._save(
                    replace(
                        job,
                        state=JobState.FAILED,
                        finished_at=utc_now(),
                        failures=job.failures + (("*", "interrupted by restart"),),
                    )
                )
            elif job.state == JobState.QUEUED:
                self._queue.put(job.id)

    # -- submission and reads -------------------------------------------------

    def submit(self, upload_dir: Path, total_images: int) -> ProcessingJob:
        job = ProcessingJob(
            id=upload_dir.name,
            state=JobState.QUEUED,
            submitted_at=utc_now(),
            total_images=total_images,
        )
        self._save(job)
        self._queue.put(job.id)
        return job

    def get(self, job_id: str) -> ProcessingJob | None:
        raw = self.store.load_job(job_id)
        return ProcessingJob.from_dict(raw) if raw else None

    @staticmethod
    def new_job_id() -> str:
        return str(uuid.uuid4())

    def upload_dir(self, job_id: str) -> Path:
        return self.store.root / "uploads" / job_id

    # -- worker ----------------------------------------------------------------

    def _run(self) -> None:
        while not self._stop.is_set():
            try:
                job_id = self._queue.get(timeout=self._poll_interval)
            except queue.Empty:
                continue
            self._execute(job_id)

    def _execute(self, job_id: str) -> None:
        job = self.get(job_id)
        if job is None or job.state != JobState.QUEUED:
            return
        job = self._transition(job, JobState.RUNNING)

        def on_progress(name: str, ok: bool, reason: str | None):
            nonlocal job
            if ok:
                job = replace(job, processed=job.processed + 1)
            else:
                job = replace(job, failures=job.failures + ((name, reason),))
            self._save(job)

        try:
            paths = find_images(self.upload_dir(job_id))
            process_files(
                paths,
                self.store,
                self.cfg,
                default_geo=self.default_geo,
                on_progress=on_progress,
                should_stop=self._stop.is_set,
            )
        except InterruptedError:
            self._transition(job, JobState.FAILED, reason="interrupted by shutdown")
            return
        except Exception as exc:  # job-level crash, not a per-image failure
            self._transition(job, JobState.FAILED, reason=f"{type(exc).__name__}: {exc}")
            return
        self._transition(job, JobState.DONE)

    def _transition(self, job: ProcessingJob, state: JobState, reason: str | None = None) -> ProcessingJob:
        if state not in _ALLOWED_TRANSITIONS[job.state]:
            raise RuntimeError(f"illegal job transition {job.state} -> {state}")
        failures = job.failures
        if reason:
            failures = failures + (("*", reason),)
        updated = replace(
            job,
            state=state,
            failures=failures,
            finished_at=utc_now() if state in (JobState.DONE, JobState.FAILED) else None,
        )
        self._save(updated)
        return updated

    def _save(self, job: ProcessingJob) -> None:
        self.store.save_job(job.to_dict())
