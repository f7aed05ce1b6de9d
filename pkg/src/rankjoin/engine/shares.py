"""Share files: one party's half of a secret-shared result relation.

Layout: the 8-byte magic ``RJSHARE1``, a little-endian u32 header length,
a JSON header, then ``pack_shares`` of the stacked relation.  Any two files
from different parties of the same run reconstruct the relation.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from rankjoin.relation import SharedRelation
from rankjoin.sharing import pack_shares, reconstruct_array, unpack_shares

MAGIC = b"RJSHARE1"


class ShareFileError(ValueError):
    pass


def save_shares(path, party: int, rel: SharedRelation, tag: str = "") -> None:
    """Write ``rel`` as held by 0-based ``party``; ``tag`` ties files of one run together."""
    sv = rel.stacked()
    header = {
        "party": party,
        "tag": tag,
        "n": rel.n,
        "semiring": list(rel.semiring),
        "layout": [[kind, list(name) if isinstance(name, tuple) else name] for kind, name in rel.layout()],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    body = pack_shares(sv.first, sv.second)
    Path(path).write_bytes(MAGIC + struct.pack("<I", len(blob)) + blob + body)


def load_shares(path) -> tuple[dict, np.ndarray, np.ndarray]:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC) or len(data) < len(MAGIC) + 4:
        raise ShareFileError(f"{path} is not a share file")
    (size,) = struct.unpack_from("<I", data, len(MAGIC))
    start = len(MAGIC) + 4
    try:
        header = json.loads(data[start:start + size])
    except json.JSONDecodeError as exc:
        raise ShareFileError(f"{path}: corrupt header") from exc
    first, second = unpack_shares(data[start + size:])
    rows = len(header["layout"])
    if first.size != rows * header["n"]:
        raise ShareFileError(f"{path}: expected {rows}x{header['n']} shares, found {first.size}")
    shape = (rows, header["n"])
    return header, first.reshape(shape), second.reshape(shape)


def reconstruct_files(path_a, path_b) -> dict:
    """Combine two parties' files into the opened form of ``open_relation``."""
    ha, fa, sa = load_shares(path_a)
    hb, fb, sb = load_shares(path_b)
    if ha["tag"] != hb["tag"] or ha["layout"] != hb["layout"] or ha["n"] != hb["n"]:
        raise ShareFileError("share files come from different results")
    values = reconstruct_array((fa, sa), ha["party"], (fb, sb), hb["party"])
    out = {"columns": {}, "ranks": {}, "annotation": []}
    for row, (kind, name) in zip(values, ha["layout"]):
        if kind == "col":
            out["columns"][name] = row
        elif kind == "rank":
            out["ranks"][tuple(name)] = row
        elif kind == "marker":
            out["marker"] = row
        else:
            out["annotation"].append(row)
    out["annotation"] = np.array(out["annotation"], dtype=np.uint64).reshape(len(out["annotation"]), ha["n"])
    return out
