"""
Binary field files.

Layout (all little-endian)::

    magic   5 bytes   b"NLSF1"
    d       uint8
    n       uint32
    L       float64
    rep     uint8     0 = physical, 1 = spectral
    data    n**d complex values as interleaved (re, im) float64, row-major

Reloading is bit-exact.
"""
import struct

import numpy as np

from randnls.errors import StructuralError
from randnls.spectral import PHYSICAL, SPECTRAL, Field, GridSpec, _wrap

MAGIC = b"NLSF1"
_HEADER = struct.Struct("<5sBIdB")
_REP_TAGS = {PHYSICAL: 0, SPECTRAL: 1}
_TAG_REPS = {v: k for k, v in _REP_TAGS.items()}


def to_bytes(field: Field) -> bytes:
    g = field.grid
    head = _HEADER.pack(MAGIC, g.d, g.n, g.L, _REP_TAGS[field.rep])
    body = np.ascontiguousarray(field.data, dtype="<c16").tobytes(order="C")
    return head + body


def from_bytes(buf: bytes) -> Field:
    if len(buf) < _HEADER.size:
        raise StructuralError("truncated field file header")
    magic, d, n, L, tag = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise StructuralError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if tag not in _TAG_REPS:
        raise StructuralError(f"unknown representation tag {tag}")
    grid = GridSpec(n, L, d)
    count = n ** d
    expected = _HEADER.size + 16 * count
    if len(buf) != expected:
        raise StructuralError(f"field file has {len(buf)} bytes, expected {expected}")
    data = np.frombuffer(buf, dtype="<c16", count=count, offset=_HEADER.size)
    data = data.astype(np.complex128).reshape(grid.shape)
    data.setflags(write=False)
    return _wrap(grid, _TAG_REPS[tag], data)


def save_field(field: Field, path):
    with open(path, "wb") as fh:
        fh.write(to_bytes(field))


def load_field(path) -> Field:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
