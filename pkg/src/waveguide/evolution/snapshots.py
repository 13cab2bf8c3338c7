"""Binary snapshot dumps.

Layout (all little-endian):

    8 bytes   magic b"WGSNAP01"
    uint32    length n of the JSON header
    n bytes   UTF-8 JSON header: grid metadata, mode count, record count
    records   one per (output time, mode j), each a float64 array
              [t, j, U_j(r_0..r_M), Ut_j(r_0..r_M)]

Records are ordered by time, then mode.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .solver import Snapshot

MAGIC = b"WGSNAP01"
_DTYPE = np.dtype("<f8")


@dataclass
class SnapshotFile:
    header: dict
    snapshots: list

    @property
    def r(self) -> np.ndarray:
        return np.arange(self.header["M"] + 1) * self.header["dr"]


def write_snapshots(path, snapshots, meta: dict) -> int:
    """Write ``snapshots`` (list of Snapshot) with ``meta`` (needs dr, J and
    any other run metadata).  Returns the number of records written."""
    if not snapshots:
        raise ValueError("no snapshots to write")
    J, n_r = snapshots[0].U.shape
    header = dict(meta)
    header.update({"J": int(J), "M": int(n_r - 1), "records": len(snapshots) * J,
                   "record_length": 2 + 2 * n_r, "times": [float(s.t) for s in snapshots]})
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for s in snapshots:
            if s.U.shape != (J, n_r) or s.Ut.shape != (J, n_r):
                raise ValueError("snapshots must share one grid")
            for j in range(J):
                rec = np.concatenate([[s.t, j + 1], s.U[j], s.Ut[j]]).astype(_DTYPE)
                fh.write(rec.tobytes())
    return header["records"]


def read_snapshots(path) -> SnapshotFile:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path} is not a waveguide snapshot file")
        (n,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(n).decode("utf-8"))
        data = np.frombuffer(fh.read(), dtype=_DTYPE)
    J, n_r, L = header["J"], header["M"] + 1, header["record_length"]
    if data.size != header["records"] * L:
        raise ValueError(f"{path}: expected {header['records']} records, file is truncated or padded")
    recs = data.reshape(-1, J, L)
    snaps = [Snapshot(float(r[0, 0]), r[:, 2 : 2 + n_r].copy(), r[:, 2 + n_r :].copy()) for r in recs]
    return SnapshotFile(header, snaps)
