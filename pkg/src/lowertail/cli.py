"""Command line entry point: ``lowertail run|resume|report|oracle|bench``."""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .experiment import ResumeError, SpecError, bench, report, resume, run

THREADS_ENV = "LOWERTAIL_THREADS"


def _threads():
    val = os.environ.get(THREADS_ENV)
    if val:
        import numba

        numba.set_num_threads(max(1, min(int(val), numba.config.NUMBA_NUM_THREADS)))


def _default_out(spec_path: str, sub: str) -> Path:
    return Path("records") / f"{Path(spec_path).stem}-{sub}"


def _summary(res) -> str:
    status = res["status"]
    lines = [f"record written to {res['dir']}",
             f"threshold c = {res['threshold']['c']!r}; samples = {len(res['batch'])}"]
    if not status.get("complete", True):
        lines.append("run incomplete: " + status.get("failure", "interrupted (use resume)"))
    lines += [f"{v['verdict']} {v['name']}" for v in res["verdicts"]]
    return "\n".join(lines)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="lowertail", description="Lower-tail conditioned last passage percolation")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="execute an experiment spec")
    p.add_argument("spec")
    p.add_argument("-o", "--out", help="record directory (default records/<spec>-run)")
    p.add_argument("--seed", type=int)
    p.add_argument("--stop-after", type=int, help="interrupt chains after this many sweeps")

    p = sub.add_parser("resume", help="continue a run from its checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--stop-after", type=int)

    p = sub.add_parser("report", help="print a record directory's metrics and verdicts")
    p.add_argument("record")

    p = sub.add_parser("oracle", help="run a spec with the rejection sampler")
    p.add_argument("spec")
    p.add_argument("-o", "--out")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("bench", help="measure Gibbs sweep throughput")
    p.add_argument("spec")
    p.add_argument("--sweeps", type=int, default=20)
    p.add_argument("--seed", type=int)

    args = ap.parse_args(argv)
    _threads()
    try:
        if args.cmd == "run":
            res = run(args.spec, args.out or _default_out(args.spec, "run"), seed=args.seed,
                      stop_after=args.stop_after)
            print(_summary(res))
            return 0 if res["status"].get("complete", True) or args.stop_after else 1
        if args.cmd == "oracle":
            res = run(args.spec, args.out or _default_out(args.spec, "oracle"), seed=args.seed,
                      force_sampler="rejection")
            print(_summary(res))
            return 0 if res["status"].get("complete", True) else 1
        if args.cmd == "resume":
            res = resume(args.checkpoint, stop_after=args.stop_after)
            print(_summary(res))
            return 0
        if args.cmd == "report":
            print(report(args.record))
            return 0
        if args.cmd == "bench":
            print(json.dumps(bench(args.spec, args.sweeps, args.seed), indent=2))
            return 0
    except (SpecError, ResumeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 1


if __name__ == "__main__":
    sys.exit(main())
