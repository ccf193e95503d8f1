"""File-based circuit broker: a client that writes request files and an
independent host daemon that executes them."""

from .client import AwaitTimeout, BrokerClient, SubmitError, client_await, client_submit
from .criteria import check_return_criteria, total_variation
from .host import (BackendExecutor, Host, HostLockError, HostState, host_run, host_status,
                   quarantine_list, read_status, request_resume)
from .records import JobRecord, RecordError, ResultRecord, Session, format_job_id

__all__ = [
    "AwaitTimeout", "BackendExecutor", "BrokerClient", "Host", "HostLockError", "HostState",
    "JobRecord", "RecordError", "ResultRecord", "Session", "SubmitError", "check_return_criteria",
    "client_await", "client_submit", "format_job_id", "host_run", "host_status", "quarantine_list",
    "read_status", "request_resume", "total_variation",
]
