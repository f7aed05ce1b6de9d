"""Communication grows linearly in the input size and in the output size.

Sweeps a three-relation chain join along both axes and fits
bytes = a*n + b*m + c.  Pass --mpc to use the full intersection protocol
instead of the trusted stand-in; the byte counts are the same either way.
"""

import sys

from rankjoin.engine.bench import bench
from rankjoin.runtime import SessionConfig


def main(argv):
    backend = "mpc" if "--mpc" in argv else "dealer"
    cfg = SessionConfig(backend=backend)
    grow_n = [(n, 128) for n in (128, 256, 512, 1024)]
    grow_m = [(128, m) for m in (256, 512, 1024)]
    report = bench(None, grow_n + grow_m, cfg)
    print(report.as_text())
    print(f"largest deviation from the fitted plane: {report.max_residual:.4%}")


if __name__ == "__main__":
    main(sys.argv[1:])
