"""Host end of the broker: a supervisor loop over the request directory.

The supervisor owns all state and is the only writer of result, journal,
alert and status files.  Backend calls run on a small worker pool that
keeps ``max_in_flight`` jobs executing whenever enough are pending.

Crash safety: a result file is written (temp + rename) before its id is
appended to ``completed.log``; on restart a job counts as done if either
exists, so finished work is never executed again.
"""

from __future__ import annotations

import bisect
import fcntl
import logging
import os
import shutil
import threading
import time
from concurrent.futures import FIRST_COMPLETED, Future, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

from .. import kvfile
from ..qasm import QasmError, parse_qasm
from .criteria import check_return_criteria
from .records import (STATUS_BLOCKED, STATUS_FAILED, STATUS_OK, JobRecord, RecordError,
                      ResultRecord, Session)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_BLOCKED = 4

JobExecutor = Callable[[JobRecord], Mapping[str, int]]


class HostLockError(RuntimeError):
    pass


class BackendExecutor:
    """Adapts a circuit backend (``run(circuit, shots, seed)``) to request records.

    ``metadata.seed``, when present, seeds the backend so a job's histogram
    does not depend on which host run executed it.
    """

    def __init__(self, backend):
        self.backend = backend

    def __call__(self, job: JobRecord) -> dict[str, int]:
        circuit = parse_qasm(job.circuit_qasm)
        return dict(self.backend.run(circuit, job.shots, seed=job.metadata.get("seed")).counts)


@dataclass
class HostState:
    max_in_flight: int = 3
    retry_limit: int = 3
    deviation_threshold: float = 0.5
    queue: list[str] = field(default_factory=list)
    in_flight: set[str] = field(default_factory=set)
    completed: set[str] = field(default_factory=set)
    blocked: str | None = None
    attempts: dict[str, int] = field(default_factory=dict)
    strikes: dict[str, int] = field(default_factory=dict)
    job_state: dict[str, str] = field(default_factory=dict)
    last_deviation: dict[str, float] = field(default_factory=dict)
    quarantined: list[str] = field(default_factory=list)
    started_at: float = field(default_factory=time.monotonic)
    finished_this_run: int = 0

    def __post_init__(self):
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.retry_limit < 0:
            raise ValueError("retry_limit must be >= 0")

    def enqueue(self, job_id: str) -> None:
        if job_id not in self.queue:
            bisect.insort(self.queue, job_id)
        if job_id != self.blocked:
            self.job_state[job_id] = "queued"

    def check(self) -> None:
        q, f, c = set(self.queue), self.in_flight, self.completed
        assert not (q & f) and not (q & c) and not (f & c), "host state sets overlap"
        assert len(f) <= self.max_in_flight


_STATES = ("queued", "in_flight", STATUS_OK, STATUS_FAILED, STATUS_BLOCKED)


def host_status(state: HostState) -> str:
    """Snapshot in the flat key-value format: counts, throughput, per-job state."""
    counts = {s: 0 for s in _STATES}
    for s in state.job_state.values():
        counts[s] = counts.get(s, 0) + 1
    elapsed = max(time.monotonic() - state.started_at, 1e-9)
    data: dict = {"host_state": "blocked" if state.blocked else "running"}
    data.update(kvfile.flatten("count", counts))
    data["count.quarantined"] = len(state.quarantined)
    data["throughput_jobs_per_s"] = round(state.finished_this_run / elapsed, 4)
    if state.blocked:
        data["blocked.job_id"] = state.blocked
        data["blocked.attempts"] = state.attempts.get(state.blocked, 0)
    for job_id in sorted(state.job_state):
        data[f"job.{job_id}"] = f"{state.job_state[job_id]} attempts={state.attempts.get(job_id, 0)}"
    return kvfile.dumps(data)


def request_resume(session_dir: Path | str) -> Path:
    """Operator command: ask the host to clear its blocked job and retry it."""
    session = Session(session_dir).create()
    kvfile.atomic_write_text(session.resume_flag, "resume\n")
    return session.resume_flag


def quarantine_list(session_dir: Path | str) -> list[str]:
    session = Session(session_dir)
    try:
        return session.quarantine_log.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        return []


def read_status(session_dir: Path | str) -> str | None:
    try:
        return Session(session_dir).status.read_text(encoding="utf-8")
    except FileNotFoundError:
        return None


class Host:
    def __init__(self, session_dir: Path | str, executor: JobExecutor, state: HostState | None = None,
                 poll_interval: float = 0.2, halt_on_failure: bool = True,
                 on_block: Callable[[str, int], None] | None = None):
        self.session = Session(session_dir)
        self.executor = executor
        self.state = state or HostState()
        self.poll_interval = poll_interval
        self.halt_on_failure = halt_on_failure
        self.on_block = on_block
        self.jobs: dict[str, JobRecord] = {}
        self.discovered: dict[str, float] = {}
        self._futures: dict[Future, tuple[str, float]] = {}
        self._pool: ThreadPoolExecutor | None = None
        self._lock_fh = None
        self._dirty = True
        self._resume_first: str | None = None

    # Lifecycle

    def start(self) -> None:
        self.session.create()
        self._lock_fh = open(self.session.lock, "a")
        try:
            fcntl.flock(self._lock_fh.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError:
            self._lock_fh.close()
            self._lock_fh = None
            raise HostLockError(f"another host holds {self.session.lock}") from None
        self._pool = ThreadPoolExecutor(max_workers=self.state.max_in_flight, thread_name_prefix="host-exec")
        self.recover()

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True, cancel_futures=True)
            for fut in list(self._futures):
                if fut.cancelled():
                    job_id, _ = self._futures.pop(fut)
                    self.state.in_flight.discard(job_id)
                    self.state.enqueue(job_id)
                elif fut.done():
                    self._complete(fut)
            self._pool = None
        self._write_status()
        if self._lock_fh is not None:
            fcntl.flock(self._lock_fh.fileno(), fcntl.LOCK_UN)
            self._lock_fh.close()
            self._lock_fh = None

    def recover(self) -> None:
        s = self.state
        self._trim_torn_journal()
        journal = set(self.session.journal_ids())
        results = set(self.session.result_ids())
        for job_id in sorted(results - journal):
            # crashed between result write and journal append
            self._append_journal(job_id)
        for job_id in journal | results:
            s.completed.add(job_id)
            s.job_state[job_id] = STATUS_OK
        s.quarantined = self.session.quarantined_ids()
        if self.session.alert.exists():
            alert = kvfile.load_file(self.session.alert)
            s.blocked = alert.get("job_id")
            if s.blocked in s.completed:
                self.session.alert.unlink()
                s.blocked = None
            elif s.blocked:
                s.strikes[s.blocked] = s.retry_limit + 1
                s.attempts[s.blocked] = int(alert.get("attempts", 0))
                s.job_state[s.blocked] = STATUS_BLOCKED
        for tmp in list(self.session.dir3.glob(".*.tmp")):
            tmp.unlink(missing_ok=True)
        logger.info("host recovered: %d completed, blocked=%s", len(s.completed), s.blocked)

    def _trim_torn_journal(self) -> None:
        # drop a partial last line so the next append starts on a fresh line
        try:
            data = self.session.journal.read_bytes()
        except FileNotFoundError:
            return
        if data and not data.endswith(b"\n"):
            keep = data.rfind(b"\n") + 1
            with open(self.session.journal, "r+b") as fh:
                fh.truncate(keep)
                os.fsync(fh.fileno())
            logger.warning("dropped torn journal tail %r", data[keep:])

    # Supervisor steps

    def check_resume(self) -> None:
        flag = self.session.resume_flag
        if not flag.exists():
            return
        s = self.state
        if s.blocked:
            logger.warning("operator resume: retrying from job %s", s.blocked)
            s.job_state[s.blocked] = "queued"
            self._resume_first = s.blocked
            s.blocked = None
            self.session.alert.unlink(missing_ok=True)
        for job_id in s.queue:
            s.strikes[job_id] = 0
        flag.unlink(missing_ok=True)
        self._dirty = True

    def scan(self) -> None:
        s = self.state
        known = s.completed | s.in_flight | set(s.queue)
        for job_id in self.session.request_ids():
            if job_id in known:
                continue
            path = self.session.job_path(job_id)
            if self.session.result_path(job_id).exists():
                s.completed.add(job_id)
                s.job_state[job_id] = STATUS_OK
                continue
            try:
                job = JobRecord.load(path)
                if job.job_id != job_id:
                    raise RecordError(f"file name says {job_id}, record says {job.job_id}")
                parse_qasm(job.circuit_qasm)
            except FileNotFoundError:
                continue
            except (RecordError, QasmError, UnicodeDecodeError) as exc:
                self._quarantine(job_id, path, str(exc))
                continue
            self.jobs[job_id] = job
            self.discovered[job_id] = time.monotonic()
            s.enqueue(job_id)
            self._dirty = True

    def _quarantine(self, job_id: str, path: Path, reason: str) -> None:
        dest = self.session.quarantine / path.name
        shutil.move(str(path), str(dest))
        line = f"{job_id}\t{reason}".replace("\n", " ")
        with open(self.session.quarantine_log, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
        self.state.quarantined.append(job_id)
        logger.error("quarantined job %s: %s", job_id, reason)
        self._dirty = True

    def dispatch(self) -> None:
        s = self.state
        if s.blocked:
            return
        while s.queue and len(s.in_flight) < s.max_in_flight:
            if self._resume_first in s.queue:
                # restart from the circuit that blocked, ahead of older retries
                job_id = self._resume_first
                s.queue.remove(job_id)
            else:
                job_id = s.queue.pop(0)
            self._resume_first = None
            if self.session.result_path(job_id).exists():
                s.completed.add(job_id)
                s.job_state[job_id] = STATUS_OK
                continue
            s.in_flight.add(job_id)
            s.job_state[job_id] = "in_flight"
            fut = self._pool.submit(self._execute, self.jobs[job_id])
            self._futures[fut] = (job_id, time.monotonic())
            self._dirty = True

    def _execute(self, job: JobRecord):
        t0 = time.monotonic()
        counts = self.executor(job)
        return dict(counts), (time.monotonic() - t0) * 1000.0

    def _complete(self, fut: Future) -> None:
        s = self.state
        job_id, dispatched = self._futures.pop(fut)
        s.in_flight.discard(job_id)
        job = self.jobs[job_id]
        s.attempts[job_id] = s.attempts.get(job_id, 0) + 1
        counts, exec_ms, deviation = {}, 0.0, None
        try:
            counts, exec_ms = fut.result()
            if sum(counts.values()) != job.shots:
                raise RuntimeError(f"backend returned {sum(counts.values())} shots, expected {job.shots}")
            passed, deviation = check_return_criteria(counts, job.expected_distribution,
                                                      s.deviation_threshold)
        except Exception as exc:
            logger.error("job %s attempt %d failed in backend: %r", job_id, s.attempts[job_id], exc)
            passed = False
        if deviation is not None:
            s.last_deviation[job_id] = deviation
        queued_ms = (dispatched - self.discovered.get(job_id, dispatched)) * 1000.0
        self._dirty = True
        if passed:
            self._finish(ResultRecord(job_id, STATUS_OK, counts, s.attempts[job_id], queued_ms, exec_ms))
            return
        s.strikes[job_id] = s.strikes.get(job_id, 0) + 1
        logger.warning("job %s failed return criteria (deviation %s), strike %d/%d",
                       job_id, deviation, s.strikes[job_id], s.retry_limit + 1)
        if s.strikes[job_id] <= s.retry_limit:
            s.enqueue(job_id)
            s.job_state[job_id] = STATUS_FAILED
        elif not self.halt_on_failure:
            self._finish(ResultRecord(job_id, STATUS_FAILED, counts, s.attempts[job_id], queued_ms, exec_ms))
        else:
            s.enqueue(job_id)
            if s.blocked is None:
                self._block(job_id, counts, deviation)
            else:
                s.job_state[job_id] = STATUS_FAILED

    def _finish(self, record: ResultRecord) -> None:
        s = self.state
        record.dump(self.session.result_path(record.job_id))
        self._append_journal(record.job_id)
        s.completed.add(record.job_id)
        s.job_state[record.job_id] = record.status
        s.finished_this_run += 1

    def _block(self, job_id: str, counts: Mapping[str, int], deviation: float | None) -> None:
        s = self.state
        s.blocked = job_id
        s.job_state[job_id] = STATUS_BLOCKED
        alert = {
            "job_id": job_id,
            "status": STATUS_BLOCKED,
            "attempts": s.attempts[job_id],
            "deviation": deviation,
            "message": "job-return criteria failed repeatedly; check the hardware, then run 'resume'",
        }
        alert.update(kvfile.flatten("counts", dict(sorted(counts.items()))))
        kvfile.dump_file(self.session.alert, alert)
        logger.critical("HALTED on job %s after %d attempts (deviation %s); awaiting operator resume",
                        job_id, s.attempts[job_id], deviation)
        if self.on_block is not None:
            self.on_block(job_id, s.attempts[job_id])

    def _append_journal(self, job_id: str) -> None:
        with open(self.session.journal, "a", encoding="utf-8") as fh:
            fh.write(job_id + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _write_status(self) -> None:
        kvfile.atomic_write_text(self.session.status, host_status(self.state), fsync=False)
        self._dirty = False

    def step(self) -> None:
        """One supervisor iteration: resume flag, discovery, dispatch, completions."""
        self.check_resume()
        self.scan()
        self.dispatch()
        if self._futures:
            done, _ = wait(list(self._futures), timeout=self.poll_interval, return_when=FIRST_COMPLETED)
            for fut in sorted(done, key=lambda f: self._futures[f][0]):
                self._complete(fut)
            self.dispatch()
        else:
            time.sleep(self.poll_interval)
        self.state.check()
        if self._dirty:
            self._write_status()

    @property
    def idle(self) -> bool:
        return not self.state.queue and not self.state.in_flight

    def run(self, stop: threading.Event | None = None, idle_exit: float | None = None,
            exit_on_block: bool = False) -> int:
        """Serve until ``stop`` is set, the host idles ``idle_exit`` seconds, or
        (with ``exit_on_block``) a job blocks.  Returns a process exit code."""
        self.start()
        try:
            idle_since = time.monotonic()
            while stop is None or not stop.is_set():
                self.step()
                if exit_on_block and self.state.blocked and not self.state.in_flight:
                    return EXIT_BLOCKED
                if not self.idle:
                    idle_since = time.monotonic()
                elif idle_exit is not None and time.monotonic() - idle_since >= idle_exit:
                    break
            return EXIT_OK
        finally:
            self.close()


def host_run(dir1: Path | str, dir3: Path | str, backend, state: HostState | None = None,
             poll_interval: float = 0.2) -> int:
    """Serve a session forever with a circuit backend.  ``dir1``/``dir3`` must
    be the ``dir1``/``dir3`` folders of the same session directory."""
    root = Path(dir1).resolve().parent
    if Path(dir3).resolve().parent != root:
        raise ValueError("dir1 and dir3 must belong to the same session directory")
    return Host(root, BackendExecutor(backend), state, poll_interval).run()
