"""Sandboxed one-job runner with a frozen JSON wire format (version 1)."""

from .runner import GRACE_SECONDS, JobResult, JobSpec, WIRE_VERSION, run_job

__version__ = "0.1.0"
__all__ = ["GRACE_SECONDS", "JobResult", "JobSpec", "WIRE_VERSION", "run_job"]
