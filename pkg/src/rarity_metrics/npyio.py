"""Minimal NPY v1.0 reader/writer for little-endian float32 arrays.

The on-disk layout is fixed: magic ``\\x93NUMPY``, version (1, 0), a 2-byte
little-endian header length, an ASCII header dict with exactly the keys
``descr`` (``'<f4'``), ``fortran_order`` (``False``) and ``shape``, padded
with spaces so the data section starts on a 64-byte boundary, terminated by
a newline.  Matrices are 2-D, vectors 1-D, both C-order.

Implemented directly (rather than through ``numpy.save``/``numpy.load``) so
that malformed files fail with errors naming the offending header field and
so the written bytes are pinned down to the exact layout above.
"""

import ast
import struct

import numpy as np

from .errors import FeatureShapeError, NpyFormatError

MAGIC = b"\x93NUMPY"
VERSION = (1, 0)
_ALIGN = 64


def _shape_repr(shape):
    if len(shape) == 1:
        return "(%d,)" % shape
    return "(%s)" % ", ".join(str(s) for s in shape)


def build_header(shape):
    """Return the padded header bytes (everything after version) for a shape."""
    body = "{'descr': '<f4', 'fortran_order': False, 'shape': %s, }" % _shape_repr(shape)
    # magic(6) + version(2) + hlen(2) + header must be a multiple of 64
    unpadded = len(MAGIC) + 2 + 2 + len(body) + 1
    pad = (-unpadded) % _ALIGN
    header = body + " " * pad + "\n"
    return struct.pack("<H", len(header)) + header.encode("ascii")


def header_nbytes(shape):
    """Total bytes preceding the data section for an array of this shape."""
    return len(MAGIC) + 2 + len(build_header(shape))


def write_array(path, arr):
    """Write a C-contiguous float32 array (1-D or 2-D) as NPY v1.0."""
    arr = np.ascontiguousarray(arr, dtype="<f4")
    if arr.ndim not in (1, 2):
        raise FeatureShapeError("only 1-D or 2-D arrays are supported, got %d-D" % arr.ndim)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(bytes(VERSION))
        f.write(build_header(arr.shape))
        f.write(memoryview(arr).cast("B"))


def read_array(path, ndim):
    """Read an NPY v1.0 '<f4' array, enforcing the expected dimensionality.

    Returns a read-only array backed by the file's bytes.  Raises
    :class:`NpyFormatError` for container problems (naming the bad field) and
    :class:`FeatureShapeError` for wrong dtype or dimensionality.
    """
    with open(path, "rb") as f:
        buf = f.read()
    if buf[: len(MAGIC)] != MAGIC:
        raise NpyFormatError("magic: not an NPY file: %s" % path)
    if len(buf) < len(MAGIC) + 4:
        raise NpyFormatError("header length: file truncated before header: %s" % path)
    version = (buf[6], buf[7])
    if version != VERSION:
        raise NpyFormatError("version: expected 1.0, found %d.%d" % version)
    (hlen,) = struct.unpack_from("<H", buf, 8)
    start = 10 + hlen
    if len(buf) < start:
        raise NpyFormatError("header length: header extends past end of file")
    header = buf[10:start]
    if not header.endswith(b"\n"):
        raise NpyFormatError("header terminator: header does not end with newline")
    try:
        fields = ast.literal_eval(header.decode("ascii"))
    except (ValueError, SyntaxError, UnicodeDecodeError) as e:
        raise NpyFormatError("header dict: cannot parse header (%s)" % e) from None
    if not isinstance(fields, dict):
        raise NpyFormatError("header dict: header is not a dict literal")
    expected_keys = {"descr", "fortran_order", "shape"}
    if set(fields) != expected_keys:
        raise NpyFormatError(
            "header keys: expected %s, found %s"
            % (sorted(expected_keys), sorted(fields))
        )
    if fields["fortran_order"] is not False:
        raise NpyFormatError("fortran_order: must be False (C-order)")
    shape = fields["shape"]
    if not (isinstance(shape, tuple) and all(isinstance(s, int) and s >= 0 for s in shape)):
        raise NpyFormatError("shape: not a tuple of non-negative integers: %r" % (shape,))
    if fields["descr"] != "<f4":
        raise FeatureShapeError(
            "element type must be little-endian float32 ('<f4'), found %r" % (fields["descr"],)
        )
    if len(shape) != ndim:
        raise FeatureShapeError("expected a %d-D array, found shape %r" % (ndim, shape))
    count = 1
    for s in shape:
        count *= s
    nbytes = count * 4
    if len(buf) - start != nbytes:
        raise NpyFormatError(
            "data size: expected %d bytes after header, found %d" % (nbytes, len(buf) - start)
        )
    arr = np.frombuffer(buf, dtype="<f4", count=count, offset=start)
    return arr.reshape(shape)
