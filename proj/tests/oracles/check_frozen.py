#!/usr/bin/env python3
"""Re-runs the oracle scripts and checks that the literals frozen in the unit
tests still match their output."""

import pathlib
import re
import subprocess
import sys


def literals(text):
    return re.findall(r"-?0x[0-9a-f]\.[0-9a-f]+p[-+]?\d+", text)


def main():
    root = pathlib.Path(sys.argv[1])
    checks = [
        ("fill_oracle.py", "unit/test_grid.cpp"),
        ("stencil_oracle.py", "unit/test_kernels.cpp"),
    ]
    ok = True
    for script, test in checks:
        out = subprocess.run([sys.executable, str(root / "oracles" / script)],
                             check=True, capture_output=True, text=True,
                             cwd=root / "oracles").stdout
        frozen = literals((root / test).read_text())
        produced = literals(out)
        if not produced or any(v not in frozen for v in produced):
            print(f"{script}: frozen values in {test} are stale")
            ok = False
        else:
            print(f"{script}: {len(produced)} values match {test}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
