"""Host fixtures shared by the broker and acceptance tests: instrumented
executors, an in-thread host, and a forked host that can be SIGKILLed."""

from __future__ import annotations

import contextlib
import multiprocessing
import os
import signal
import threading
import time
from pathlib import Path

from cafqa_vqe.backend import make_backend, probabilities
from cafqa_vqe.broker import BackendExecutor, BrokerClient, Host, HostState, Session
from cafqa_vqe.circuit import Circuit, gate
from cafqa_vqe.qasm import parse_qasm, serialize_qasm

POLL = 0.01


def ghz_qasm(n: int = 2) -> str:
    gates = (gate("h", 0),) + tuple(gate("cx", q, q + 1) for q in range(n - 1))
    return serialize_qasm(Circuit(n, gates).measure_all())


def zero_qasm(n: int = 2) -> str:
    return serialize_qasm(Circuit(n).measure_all())


def expected_of(qasm: str) -> dict[str, float]:
    return probabilities(parse_qasm(qasm))


class InstrumentedExecutor:
    """Backend executor that records each call and the peak concurrency."""

    def __init__(self, backend=None, delay: float = 0.0, log_path: Path | None = None):
        self.inner = BackendExecutor(backend or make_backend("sim"))
        self.delay = delay
        self.log_path = log_path
        self.calls: list[str] = []
        self.active = 0
        self.peak = 0
        self._lock = threading.Lock()

    def __call__(self, job):
        with self._lock:
            self.calls.append(job.job_id)
            self.active += 1
            self.peak = max(self.peak, self.active)
        try:
            if self.log_path is not None:
                fd = os.open(self.log_path, os.O_WRONLY | os.O_APPEND | os.O_CREAT)
                try:
                    os.write(fd, f"{os.getpid()} {job.job_id}\n".encode())
                finally:
                    os.close(fd)
            if self.delay:
                time.sleep(self.delay)
            return self.inner(job)
        finally:
            with self._lock:
                self.active -= 1


class UniformExecutor:
    """Corrupted backend: every outcome equally often, regardless of the circuit."""

    def __init__(self):
        self.calls: list[str] = []

    def __call__(self, job):
        self.calls.append(job.job_id)
        n = parse_qasm(job.circuit_qasm).n_clbits
        outcomes = [format(i, f"0{n}b") for i in range(2 ** n)]
        base, extra = divmod(job.shots, len(outcomes))
        return {o: base + (1 if i < extra else 0) for i, o in enumerate(outcomes)}


class SwitchableExecutor:
    def __init__(self, current):
        self.current = current
        self.calls: list[str] = []

    def __call__(self, job):
        self.calls.append(job.job_id)
        return self.current(job)


@contextlib.contextmanager
def host_thread(session_dir, executor, state: HostState | None = None, **kwargs):
    host = Host(session_dir, executor, state, poll_interval=POLL, **kwargs)
    stop = threading.Event()
    box = {}
    t = threading.Thread(target=lambda: box.setdefault("rc", host.run(stop=stop)), daemon=True)
    t.start()
    try:
        yield host
    finally:
        stop.set()
        t.join(timeout=10)


def submit_payloads(session_dir, payloads):
    client = BrokerClient(session_dir, poll_interval=POLL)
    jobs = client.make_jobs(payloads)
    return client, client.submit(jobs)


def wait_until(pred, timeout: float = 10.0) -> bool:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if pred():
            return True
        time.sleep(POLL)
    return pred()


# Crash injection

def _host_child(session_dir: str, log_path: str, delay: float) -> None:
    executor = InstrumentedExecutor(delay=delay, log_path=Path(log_path))
    Host(session_dir, executor, HostState(), poll_interval=POLL).run(idle_exit=0.3)
    os._exit(0)


def start_forked_host(session_dir, log_path, delay: float):
    ctx = multiprocessing.get_context("fork")
    p = ctx.Process(target=_host_child, args=(str(session_dir), str(log_path), delay), daemon=True)
    p.start()
    return p


def read_exec_log(log_path: Path) -> list[tuple[int, str]]:
    if not log_path.exists():
        return []
    out = []
    for line in log_path.read_text().splitlines():
        pid, job_id = line.split()
        out.append((int(pid), job_id))
    return out


def crash_trial(root: Path, rng, n_jobs: int = 30, max_kills: int = 3, delay: float = 0.004) -> dict:
    """Submit ``n_jobs``, SIGKILL the host at random moments, restart until done.

    Returns the client's results, the reference counts and violation lists.
    """
    session_dir = root / "session"
    log_path = root / "exec.log"
    payloads = []
    for i in range(n_jobs):
        qasm = ghz_qasm(int(rng.integers(1, 4)))
        payloads.append((qasm, 100, expected_of(qasm), {"seed": 1000 + i}))
    client, ids = submit_payloads(session_dir, payloads)
    session = Session(session_dir)

    done_before_run: dict[int, set[str]] = {}
    kills = int(rng.integers(1, max_kills + 1))
    for _ in range(kills):
        done = set(session.result_ids())
        if len(done) == len(ids):
            break
        p = start_forked_host(session_dir, log_path, delay)
        done_before_run[p.pid] = done
        time.sleep(float(rng.uniform(0.0, 0.15)))
        os.kill(p.pid, signal.SIGKILL)
        p.join()
    p = start_forked_host(session_dir, log_path, delay)
    done_before_run[p.pid] = set(session.result_ids())
    results = client.wait(ids, timeout=60)
    p.join(timeout=30)
    if p.is_alive():
        p.kill()

    # a job re-executes illegally if a run executed it although its result existed when that run started
    log = read_exec_log(log_path)
    reexec = [(pid, j) for pid, j in log if j in done_before_run.get(pid, set())]
    per_run: dict[tuple[int, str], int] = {}
    for pid, j in log:
        per_run[(pid, j)] = per_run.get((pid, j), 0) + 1
    duplicate_in_run = [k for k, v in per_run.items() if v > 1]

    reference_exec = BackendExecutor(make_backend("sim"))
    reference = []
    for job_id, (qasm, shots, _, meta) in zip(ids, payloads):
        from cafqa_vqe.broker import JobRecord
        reference.append(reference_exec(JobRecord(job_id, qasm, shots, None, dict(meta))))
    return {
        "ids": ids,
        "results": results,
        "reference": reference,
        "reexecuted": reexec,
        "duplicate_in_run": duplicate_in_run,
        "journal": session.journal_ids(),
        "kills": kills,
    }
