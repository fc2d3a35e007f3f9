#!/usr/bin/env python3
"""Tabulate every bundled model: source size, generated size, state-space
size and verification verdict.  Shows the expansion effect (a few dozen
imperative lines turn into hundreds of flat-model lines) next to the
actual cost of exploring each system."""

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent

from rybu import dedan  # noqa: E402
from rybu.cli import compile_rybu  # noqa: E402
from rybu.lts import ExplorationLimits, verify  # noqa: E402

MODELS = [
    "two_sem.rybu",
    "two_sem_ordered.rybu",
    "buffers.rybu",
    "buffers_mutex.rybu",
    "scaling.rybu",
]


def main() -> int:
    header = f"{'model':<22} {'src':>5} {'gen':>6} {'nodes':>7} {'edges':>7}  verdict"
    print(header)
    print("-" * len(header))
    for name in MODELS:
        source = (ROOT / "models" / name).read_text()
        result = compile_rybu(source)
        generated = dedan.print_dedan(result.unit)
        report = verify(result.model, ExplorationLimits(max_nodes=200_000))
        if not report.complete:
            verdict = "inconclusive (limit)"
        elif report.total_deadlocks:
            verdict = f"{len(report.total_deadlocks)} total deadlock(s)"
        elif report.partial_deadlocks:
            verdict = f"{len(report.partial_deadlocks)} partial deadlock report(s)"
        else:
            verdict = "deadlock-free"
        print(
            f"{name:<22} {len(source.splitlines()):>5} {len(generated.splitlines()):>6}"
            f" {report.nodes:>7} {report.edges:>7}  {verdict}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
