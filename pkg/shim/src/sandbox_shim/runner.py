"""Execute one untrusted program against one test under resource limits.

The child runs in its own session inside a fresh temp directory with a
minimal environment. Output streams go to files, never pipes, so a child
that floods stdout can neither deadlock us nor force unbounded buffering.
"""

from __future__ import annotations

import os
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

try:
    import resource
except ImportError:  # non-POSIX: limits become advisory
    resource = None  # type: ignore[assignment]

WIRE_VERSION = 1

# extra time allowed for the kill itself; run_job returns within
# wall_time + GRACE_SECONDS for any source
GRACE_SECONDS = 2.0

_KEPT_ENV = ("PATH", "LANG", "LC_ALL")


@dataclass(frozen=True)
class JobSpec:
    source: str
    stdin_data: str
    wall_time: float
    memory: int
    output_cap: int

    @classmethod
    def from_obj(cls, obj: object) -> "JobSpec":
        if not isinstance(obj, dict):
            raise ValueError("job spec must be a JSON object")
        if obj.get("v") != WIRE_VERSION:
            raise ValueError(f"unsupported wire version {obj.get('v')!r}")
        try:
            spec = cls(
                source=obj["source"],
                stdin_data=obj.get("stdin_data", ""),
                wall_time=float(obj["wall_time"]),
                memory=int(obj["memory"]),
                output_cap=int(obj["output_cap"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"bad job spec: {exc}") from exc
        if not isinstance(spec.source, str) or not isinstance(spec.stdin_data, str):
            raise ValueError("source and stdin_data must be strings")
        if spec.wall_time <= 0 or spec.memory <= 0 or spec.output_cap <= 0:
            raise ValueError("wall_time, memory, and output_cap must be positive")
        return spec


@dataclass(frozen=True)
class JobResult:
    status: str  # ok | timeout | runtime_error | output_overflow
    stdout: str
    stderr: str
    runtime: float
    memory_enforced: bool = True

    def to_obj(self) -> dict:
        return {
            "v": WIRE_VERSION,
            "status": self.status,
            "stdout": self.stdout,
            "stderr": self.stderr,
            "runtime": self.runtime,
            "memory_enforced": self.memory_enforced,
        }


def _child_env(workdir: str) -> dict[str, str]:
    env = {key: os.environ[key] for key in _KEPT_ENV if key in os.environ}
    env["HOME"] = workdir
    env["PYTHONIOENCODING"] = "utf-8"
    return env


def _read_capped(path: Path, cap: int) -> tuple[str, bool]:
    size = path.stat().st_size
    with path.open("rb") as handle:
        data = handle.read(cap)
    return data.decode("utf-8", errors="replace"), size > cap


def run_job(spec: JobSpec) -> JobResult:
    with tempfile.TemporaryDirectory(prefix="shim-") as workdir:
        source_path = Path(workdir) / "main.py"
        source_path.write_text(spec.source, encoding="utf-8")
        stdin_path = Path(workdir) / "stdin.txt"
        stdin_path.write_text(spec.stdin_data, encoding="utf-8")
        out_path = Path(workdir) / "stdout.bin"
        err_path = Path(workdir) / "stderr.bin"

        memory_enforced = resource is not None
        preexec = None
        if resource is not None:
            limit = spec.memory

            def preexec() -> None:
                resource.setrlimit(resource.RLIMIT_AS, (limit, limit))

        timed_out = False
        started = time.monotonic()
        with stdin_path.open("rb") as stdin, out_path.open("wb") as out, err_path.open(
            "wb"
        ) as err:
            proc = subprocess.Popen(
                [sys.executable, "-I", str(source_path)],
                stdin=stdin,
                stdout=out,
                stderr=err,
                cwd=workdir,
                env=_child_env(workdir),
                start_new_session=True,
                preexec_fn=preexec,
            )
            try:
                returncode = proc.wait(timeout=spec.wall_time)
            except subprocess.TimeoutExpired:
                timed_out = True
                _kill_group(proc)
                returncode = proc.wait()
        runtime = time.monotonic() - started

        stdout, out_over = _read_capped(out_path, spec.output_cap)
        stderr, err_over = _read_capped(err_path, spec.output_cap)

        if timed_out:
            status = "timeout"
        elif out_over or err_over:
            status = "output_overflow"
        elif returncode != 0:
            status = "runtime_error"
        else:
            status = "ok"
        return JobResult(
            status=status,
            stdout=stdout,
            stderr=stderr,
            runtime=runtime,
            memory_enforced=memory_enforced,
        )


def _kill_group(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, 9)
    except (ProcessLookupError, PermissionError, OSError):
        proc.kill()
