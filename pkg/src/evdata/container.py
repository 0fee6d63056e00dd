"""Named tensor container, shared by the voxel cache and model checkpoints.

Layout: a `TensorMapHeader` (magic, format version, entry count), then for
each entry a `TensorEntryHeader` (name length, dtype code and rank packed into
one byte, payload size), the UTF-8 name, the shape as u32 values and the raw
little-endian C-order payload.
"""

import io
import struct

import numpy as np

from .base import FormatError
from .constants import tensormagic, tensorversion
from .header import TensorMapHeader, TensorEntryHeader

dtype_codes = {
    0: np.dtype("<f8"), 1: np.dtype("<f4"), 2: np.dtype("<i8"), 3: np.dtype("<i4"),
    4: np.dtype("u1"), 5: np.dtype("i1"), 6: np.dtype("<u2"), 7: np.dtype("<u8"),
    8: np.dtype("?"),
}
_code_of = {v: k for k, v in dtype_codes.items()}


def encode_tensors(tensors):
    """Serialise a mapping name -> ndarray to bytes (order preserved)."""

    out = io.BytesIO()
    out.write(TensorMapHeader.build(
        magic=tensormagic, version=tensorversion, count=len(tensors)).tobytes())

    for name, array in tensors.items():
        array = np.asarray(array)
        dtype = array.dtype.newbyteorder("<") if array.dtype.byteorder == ">" else array.dtype
        if dtype not in _code_of:
            raise TypeError(f"unsupported dtype {array.dtype} for tensor '{name}'")
        if array.ndim > 15:
            raise ValueError(f"tensor '{name}' has too many dimensions ({array.ndim})")

        raw = np.ascontiguousarray(array, dtype=dtype).tobytes()
        bname = name.encode("utf-8")
        out.write(TensorEntryHeader.build(
            namelen=len(bname), dtype=_code_of[dtype], ndim=array.ndim,
            reserved=0, nbytes=len(raw)).tobytes())
        out.write(bname)
        out.write(struct.pack(f"<{array.ndim}L", *array.shape))
        out.write(raw)

    return out.getvalue()


def decode_tensors(data, source=None):
    """Inverse of `encode_tensors`; raises FormatError on any inconsistency."""

    stream = io.BytesIO(data)
    hdr = TensorMapHeader.read(stream, source=source)
    tensors = dict()

    for _ in range(hdr.count):
        entry = TensorEntryHeader.read(stream, source=source)
        addr = stream.tell()

        if entry.dtype not in dtype_codes:
            raise FormatError(f"unknown dtype code {entry.dtype}", source=source, offset=addr)
        dtype = dtype_codes[entry.dtype]

        bname = stream.read(entry.namelen)
        shape_raw = stream.read(4 * entry.ndim)
        raw = stream.read(entry.nbytes)
        if (len(bname) != entry.namelen or len(shape_raw) != 4 * entry.ndim
                or len(raw) != entry.nbytes):
            raise FormatError("truncated tensor entry", source=source, offset=addr)

        try:
            name = bname.decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError("invalid tensor name", source=source, offset=addr) from None

        shape = struct.unpack(f"<{entry.ndim}L", shape_raw)
        if int(np.prod(shape, dtype=np.int64)) * dtype.itemsize != entry.nbytes:
            raise FormatError(f"payload size of '{name}' does not match its shape",
                              source=source, offset=addr)

        tensors[name] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()

    if stream.read(1):
        raise FormatError("trailing data after last tensor", source=source,
                          offset=stream.tell() - 1)
    return tensors
