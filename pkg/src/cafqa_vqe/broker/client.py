"""Client end of the broker: write request files, poll for result files.

The client touches nothing but files in the session directory; it never
talks to the host process directly.
"""

from __future__ import annotations

import logging
import time
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .records import JobRecord, RecordError, ResultRecord, Session, format_job_id

logger = logging.getLogger(__name__)

DEFAULT_POLL_INTERVAL = 0.2


class SubmitError(RuntimeError):
    pass


class AwaitTimeout(TimeoutError):
    """Raised when results are still missing at the deadline."""

    def __init__(self, results: dict[str, ResultRecord], missing: list[str]):
        super().__init__(f"{len(missing)} result(s) missing after timeout: {', '.join(missing)}")
        self.results = results
        self.missing = missing


def _existing_ids(session: Session) -> set[str]:
    return set(session.request_ids()) | set(session.result_ids()) | set(session.quarantined_ids())


def client_submit(jobs: Sequence[JobRecord], dir1: Path | str) -> list[str]:
    """Write one request file per job, atomically and in job_id order.

    All ids are checked before anything is written, so a duplicate leaves
    the directory untouched.
    """
    session = Session(Path(dir1).parent)
    ids = [j.job_id for j in jobs]
    if len(set(ids)) != len(ids):
        raise SubmitError("duplicate job_id within the batch")
    taken = _existing_ids(session) & set(ids)
    if taken:
        raise SubmitError(f"job_id(s) already used in this session: {', '.join(sorted(taken))}")
    Path(dir1).mkdir(parents=True, exist_ok=True)
    for job in sorted(jobs, key=lambda j: j.job_id):
        job.dump(session.job_path(job.job_id))
    return sorted(ids)


def read_result(dir3: Path | str, job_id: str) -> ResultRecord | None:
    path = Path(dir3) / f"result_{job_id}.yaml"
    try:
        return ResultRecord.load(path)
    except FileNotFoundError:
        return None


def client_await(job_ids: Iterable[str], dir3: Path | str, poll_interval: float = DEFAULT_POLL_INTERVAL,
                 timeout: float | None = None) -> list[ResultRecord]:
    """Block until every requested result file exists; return them in request order.

    Raises :class:`AwaitTimeout` (carrying the partial results) at the
    deadline and :class:`RecordError` for a malformed result file.
    """
    wanted = list(job_ids)
    found: dict[str, ResultRecord] = {}
    deadline = None if timeout is None else time.monotonic() + timeout
    while True:
        for job_id in wanted:
            if job_id not in found:
                record = read_result(dir3, job_id)
                if record is not None:
                    if record.job_id != job_id:
                        raise RecordError(f"result file for {job_id} names job {record.job_id}")
                    found[job_id] = record
        missing = [j for j in wanted if j not in found]
        if not missing:
            return [found[j] for j in wanted]
        if deadline is not None and time.monotonic() >= deadline:
            raise AwaitTimeout(found, missing)
        time.sleep(poll_interval)


class BrokerClient:
    """Convenience wrapper that allocates job ids for one session."""

    def __init__(self, session_dir: Path | str, poll_interval: float = DEFAULT_POLL_INTERVAL):
        self.session = Session(session_dir).create()
        self.poll_interval = poll_interval
        self._next = None

    def allocate_ids(self, n: int) -> list[str]:
        existing = _existing_ids(self.session)
        start = max((int(i) for i in existing), default=0) + 1
        if self._next is not None:
            start = max(start, self._next)
        self._next = start + n
        return [format_job_id(start + i) for i in range(n)]

    def make_jobs(self, payloads: Sequence[tuple[str, int, Mapping[str, float] | None, Mapping[str, Any]]]
                  ) -> list[JobRecord]:
        ids = self.allocate_ids(len(payloads))
        return [JobRecord(job_id, qasm, shots, dict(expected) if expected is not None else None, dict(meta))
                for job_id, (qasm, shots, expected, meta) in zip(ids, payloads)]

    def submit(self, jobs: Sequence[JobRecord]) -> list[str]:
        return client_submit(jobs, self.session.dir1)

    def wait(self, job_ids: Iterable[str], timeout: float | None = None) -> list[ResultRecord]:
        return client_await(job_ids, self.session.dir3, self.poll_interval, timeout)

    def host_blocked(self) -> bool:
        return self.session.alert.exists()
