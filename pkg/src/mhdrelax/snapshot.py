"""SMHD binary snapshot format.

Little-endian layout:

    magic   4 bytes  b"SMHD"
    version u32      1 = unit torus, 2 = free-space box
    n       u32      samples per dimension
    t       f64      simulation time
    count   u32      number of field components
    box     f64      (version 2 only) side length of the sample box
    payload count * n * n f64, row-major samples per component

Version 1 carries periodic fields sampled at x_j = j / n. Version 2 is the
free-space variant used by the convolution solver, sampled at cell centers
x_j = (j + 1/2) * box / n.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"SMHD"

__all__ = ["Snapshot", "write_snapshot", "read_snapshot", "snapshot_of_field"]


@dataclass(frozen=True)
class Snapshot:
    """Decoded snapshot: time stamp, optional box size, (count, n, n) samples."""

    t: float
    samples: np.ndarray
    box: float | None = None


def write_snapshot(path, t: float, components, box: float | None = None) -> None:
    """Write components (iterable of equal-shape square sample arrays) to path."""
    comps = [np.ascontiguousarray(np.asarray(c, dtype="<f8")) for c in components]
    if not comps:
        raise ValueError("snapshot needs at least one component")
    n = comps[0].shape[0]
    for c in comps:
        if c.shape != (n, n):
            raise ValueError("all components must be square arrays of one size")
    version = 1 if box is None else 2
    header = MAGIC + struct.pack("<IIdI", version, n, float(t), len(comps))
    if box is not None:
        header += struct.pack("<d", float(box))
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        for c in comps:
            fh.write(c.tobytes())
    tmp.replace(path)


def read_snapshot(path) -> Snapshot:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise ValueError(f"not an SMHD snapshot: bad magic {raw[:4]!r}")
    version, n, t, count = struct.unpack_from("<IIdI", raw, 4)
    offset = 4 + 20
    box = None
    if version == 2:
        (box,) = struct.unpack_from("<d", raw, offset)
        offset += 8
    elif version != 1:
        raise ValueError(f"unsupported SMHD version {version}")
    expected = offset + count * n * n * 8
    if len(raw) != expected:
        raise ValueError(
            f"truncated or oversized snapshot: {len(raw)} bytes, header implies {expected}"
        )
    data = np.frombuffer(raw, dtype="<f8", count=count * n * n, offset=offset)
    samples = data.reshape(count, n, n).copy()
    return Snapshot(t=float(t), samples=samples, box=box)


def snapshot_of_field(path, state_t: float, B) -> None:
    """Convenience: write a two-component torus snapshot of a vector field."""
    from .fields import to_physical

    write_snapshot(path, state_t, [to_physical(B.x_comp), to_physical(B.y_comp)])
