"""Run every bundled manifest through the command line tool.

One invocation per manifest per applicable command (describe always, check
when a soliton block is present, fit when a fit block is present), plus a
handful of integrals.  Reports land in --out-dir, one JSON file each, and a
one-line summary per invocation goes to the terminal.  The script's exit
status is the worst exit status seen, so CI can gate on it directly.

Running the suite twice and comparing the report directories byte for byte
is the determinism check.
"""

import argparse
import io
import sys
from contextlib import redirect_stdout
from pathlib import Path

from solitonlab.cli import main as cli_main
from solitonlab.manifest import bundled, bundled_names

INTEGRALS = (
    ("sphere2", "1"),
    ("sphere2", "r"),
    ("sphere2_nonsoliton_yamabe", "ric(gradf,gradf)"),
    ("sphere2_nonsoliton_yamabe", "g(gradf, gradr)"),
    ("sphere2_nonsoliton_yamabe", "lap(f)"),
    ("torus2_killing_vector", "g(xi,xi)"),
    ("warped_sphere", "r^2"),
)


def invocations():
    for name in bundled_names():
        man = bundled(name)
        yield f"{name}__describe", ["describe", name]
        if man.soliton is not None:
            yield f"{name}__check", ["check", name]
        if man.fit is not None:
            yield f"{name}__fit", ["fit", name]
    for k, (name, expression) in enumerate(INTEGRALS):
        yield f"{name}__integral{k}", ["integrate", name, expression]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default="suite_reports",
                        help="directory for the JSON reports")
    args = parser.parse_args(argv)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    worst = 0
    for label, argv_cli in invocations():
        target = out_dir / f"{label}.json"
        sink = io.StringIO()
        with redirect_stdout(sink):
            code = cli_main(argv_cli + ["--out", str(target)])
        worst = max(worst, code)
        print(f"[{code}] {label}")
    print(f"reports in {out_dir} (worst exit status {worst})")
    return worst


if __name__ == "__main__":
    sys.exit(main())
