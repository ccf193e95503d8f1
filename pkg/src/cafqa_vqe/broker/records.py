"""On-disk request/result records and the session directory layout."""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from .. import kvfile

SCHEMA_VERSION = 1
ID_WIDTH = 8
_ID_RE = re.compile(rf"^\d{{{ID_WIDTH}}}$")
JOB_FILE_RE = re.compile(rf"^job_(\d{{{ID_WIDTH}}})\.yaml$")
RESULT_FILE_RE = re.compile(rf"^result_(\d{{{ID_WIDTH}}})\.yaml$")

STATUS_OK = "ok"
STATUS_FAILED = "failed_criteria"
STATUS_BLOCKED = "blocked"
RESULT_STATUSES = (STATUS_OK, STATUS_FAILED, STATUS_BLOCKED)


class RecordError(ValueError):
    pass


def format_job_id(n: int) -> str:
    if n < 0:
        raise ValueError("job ids are non-negative")
    return f"{n:0{ID_WIDTH}d}"


def check_job_id(job_id: str) -> str:
    if not isinstance(job_id, str) or not _ID_RE.match(job_id):
        raise RecordError(f"job_id must be {ID_WIDTH} digits, got {job_id!r}")
    return job_id


class Session:
    """Paths of one broker session.

    ``dir1`` holds requests, ``dir3`` results plus the ``completed.log``
    journal; the remaining files are host bookkeeping.
    """

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.dir1 = self.root / "dir1"
        self.dir3 = self.root / "dir3"
        self.quarantine = self.root / "quarantine"
        self.control = self.root / "control"
        self.journal = self.dir3 / "completed.log"
        self.alert = self.root / "alert.yaml"
        self.status = self.root / "status.yaml"
        self.resume_flag = self.control / "resume"
        self.lock = self.root / "host.lock"
        self.quarantine_log = self.quarantine / "quarantine.log"

    def create(self) -> "Session":
        for d in (self.dir1, self.dir3, self.quarantine, self.control):
            d.mkdir(parents=True, exist_ok=True)
        return self

    def job_path(self, job_id: str) -> Path:
        return self.dir1 / f"job_{job_id}.yaml"

    def result_path(self, job_id: str) -> Path:
        return self.dir3 / f"result_{job_id}.yaml"

    def request_ids(self) -> list[str]:
        return sorted(m.group(1) for m in map(JOB_FILE_RE.match, _names(self.dir1)) if m)

    def result_ids(self) -> list[str]:
        return sorted(m.group(1) for m in map(RESULT_FILE_RE.match, _names(self.dir3)) if m)

    def quarantined_ids(self) -> list[str]:
        return sorted(m.group(1) for m in map(JOB_FILE_RE.match, _names(self.quarantine)) if m)

    def journal_ids(self) -> list[str]:
        try:
            text = self.journal.read_text(encoding="utf-8")
        except FileNotFoundError:
            return []
        # A torn final line (crash mid-append) has no newline and is ignored.
        lines = text.split("\n")[:-1]
        return [ln for ln in lines if _ID_RE.match(ln)]


def _names(d: Path) -> list[str]:
    try:
        return os.listdir(d)
    except FileNotFoundError:
        return []


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


@dataclass
class JobRecord:
    job_id: str
    circuit_qasm: str
    shots: int
    expected_distribution: dict[str, float] | None = None
    metadata: dict[str, Any] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION
    created_at: str = field(default_factory=_now)

    def __post_init__(self):
        check_job_id(self.job_id)
        if not isinstance(self.shots, int) or isinstance(self.shots, bool) or self.shots < 1:
            raise RecordError(f"shots must be a positive integer, got {self.shots!r}")
        if not isinstance(self.circuit_qasm, str) or not self.circuit_qasm.strip():
            raise RecordError("empty circuit payload")
        if self.expected_distribution is not None:
            probs = self.expected_distribution
            if any(not math.isfinite(p) or p < 0 for p in probs.values()):
                raise RecordError("expected_distribution has invalid probabilities")
            if abs(sum(probs.values()) - 1.0) > 1e-9:
                raise RecordError(f"expected_distribution sums to {sum(probs.values())!r}")

    def to_kv(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "schema_version": self.schema_version,
            "job_id": self.job_id,
            "shots": self.shots,
            "created_at": self.created_at,
        }
        data.update(kvfile.flatten("metadata", self.metadata))
        if self.expected_distribution is not None:
            data.update(kvfile.flatten("expected_distribution", self.expected_distribution))
        qasm = self.circuit_qasm if self.circuit_qasm.endswith("\n") else self.circuit_qasm + "\n"
        data["circuit_qasm"] = qasm
        return data

    @classmethod
    def from_kv(cls, data: dict[str, Any]) -> "JobRecord":
        try:
            version = data["schema_version"]
            if version != SCHEMA_VERSION:
                raise RecordError(f"unsupported schema_version {version!r}")
            expected = kvfile.subkeys(data, "expected_distribution") or None
            if expected is not None:
                expected = {k: float(v) for k, v in expected.items()}
            return cls(
                job_id=data["job_id"],
                circuit_qasm=data["circuit_qasm"],
                shots=data["shots"],
                expected_distribution=expected,
                metadata=kvfile.subkeys(data, "metadata"),
                schema_version=version,
                created_at=str(data.get("created_at", "")),
            )
        except KeyError as exc:
            raise RecordError(f"missing key {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise RecordError(str(exc)) from None

    def dump(self, path: Path) -> None:
        kvfile.dump_file(path, self.to_kv())

    @classmethod
    def load(cls, path: Path) -> "JobRecord":
        try:
            return cls.from_kv(kvfile.load_file(path))
        except kvfile.KVFormatError as exc:
            raise RecordError(str(exc)) from None


@dataclass
class ResultRecord:
    job_id: str
    status: str
    counts: dict[str, int]
    attempts: int = 1
    queued_ms: float = 0.0
    exec_ms: float = 0.0

    def __post_init__(self):
        check_job_id(self.job_id)
        if self.status not in RESULT_STATUSES:
            raise RecordError(f"bad status {self.status!r}")
        if self.attempts < 1:
            raise RecordError("attempts must be >= 1")
        if any(not isinstance(v, int) or v < 0 for v in self.counts.values()):
            raise RecordError("counts must be non-negative integers")

    @property
    def shots(self) -> int:
        return sum(self.counts.values())

    def to_kv(self) -> dict[str, Any]:
        data: dict[str, Any] = {"job_id": self.job_id, "status": self.status, "attempts": self.attempts}
        data.update(kvfile.flatten("counts", dict(sorted(self.counts.items()))))
        data["timing.queued_ms"] = round(float(self.queued_ms), 3)
        data["timing.exec_ms"] = round(float(self.exec_ms), 3)
        return data

    @classmethod
    def from_kv(cls, data: dict[str, Any]) -> "ResultRecord":
        try:
            return cls(
                job_id=data["job_id"],
                status=data["status"],
                counts=kvfile.subkeys(data, "counts"),
                attempts=data["attempts"],
                queued_ms=float(data.get("timing.queued_ms", 0.0)),
                exec_ms=float(data.get("timing.exec_ms", 0.0)),
            )
        except KeyError as exc:
            raise RecordError(f"missing key {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise RecordError(str(exc)) from None

    def dump(self, path: Path) -> None:
        kvfile.dump_file(path, self.to_kv())

    @classmethod
    def load(cls, path: Path) -> "ResultRecord":
        try:
            return cls.from_kv(kvfile.load_file(path))
        except kvfile.KVFormatError as exc:
            raise RecordError(str(exc)) from None
