"""`shim run`: JobSpec JSON on stdin, JobResult JSON on stdout.

Exit 0 means the protocol worked, whatever the test outcome was; nonzero
exits are reserved for protocol failures (bad invocation, malformed spec).
"""

from __future__ import annotations

import json
import sys

from .runner import JobSpec, run_job

USAGE = "usage: shim run  (reads a JSON job spec on standard input)"


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if argv != ["run"]:
        print(USAGE, file=sys.stderr)
        return 2
    try:
        obj = json.load(sys.stdin)
    except json.JSONDecodeError as exc:
        print(f"shim: malformed job spec JSON: {exc}", file=sys.stderr)
        return 2
    try:
        spec = JobSpec.from_obj(obj)
    except ValueError as exc:
        print(f"shim: {exc}", file=sys.stderr)
        return 2
    result = run_job(spec)
    json.dump(result.to_obj(), sys.stdout)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
