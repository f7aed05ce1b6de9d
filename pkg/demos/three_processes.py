"""The clinic query run as three separate processes talking over TCP.

Each process loads only its own table.  Shares are written to a temporary
directory and then any two of the three files are combined to read the
result, as a data analyst holding two shares would.
"""

import json
import socket
import subprocess
import sys
import tempfile
from pathlib import Path

DATA = Path(__file__).parent / "data" / "clinic"


def free_ports(k):
    socks = [socket.socket() for _ in range(k)]
    for s in socks:
        s.bind(("127.0.0.1", 0))
    ports = [s.getsockname()[1] for s in socks]
    for s in socks:
        s.close()
    return ports


def main():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        config = json.loads((DATA / "parties.json").read_text())
        config["endpoints"] = [f"127.0.0.1:{p}" for p in free_ports(3)]
        (tmp / "session.json").write_text(json.dumps(config))
        base = [sys.executable, "-m", "rankjoin", "run", "--query", str(DATA / "avg_cost.sql"),
                "--data", str(DATA), "--config", str(tmp / "session.json"), "--no-reconstruct", "--out", str(tmp)]
        procs = [subprocess.Popen(base + ["--party", str(p)]) for p in (1, 2, 3)]
        if any(p.wait(timeout=120) for p in procs):
            sys.exit("a party failed")
        subprocess.run([sys.executable, "-m", "rankjoin", "reveal", "--query", str(DATA / "avg_cost.sql"),
                        "--data", str(DATA), "--party", "2", str(tmp / "party1.shares"), str(tmp / "party3.shares")],
                       check=True)


if __name__ == "__main__":
    main()
