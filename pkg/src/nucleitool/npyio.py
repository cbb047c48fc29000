"""Minimal NPY version 1.0 reader/writer for the dtypes the tools exchange."""

from __future__ import annotations

import ast
import os
import struct

import numpy as np

from .core import NucleiError

MAGIC = b"\x93NUMPY"
VERSION = (1, 0)
ALIGN = 64

SUPPORTED = {
    "|u1": np.dtype("u1"),
    "<u2": np.dtype("<u2"),
    "<i4": np.dtype("<i4"),
    "<f4": np.dtype("<f4"),
}


class NpyFormatError(NucleiError, ValueError):
    pass


class BadMagic(NpyFormatError):
    pass


class UnsupportedDtype(NpyFormatError):
    pass


class TruncatedFile(NpyFormatError):
    pass


def _descr(dtype: np.dtype) -> str:
    dtype = np.dtype(dtype)
    if dtype.kind == "u" and dtype.itemsize == 1:
        return "|u1"
    key = "<" + dtype.kind + str(dtype.itemsize)
    if key not in SUPPORTED:
        raise UnsupportedDtype(f"dtype {dtype} is not one of u1, u2, i4, f4")
    return key


def header_bytes(dtype, shape: tuple[int, ...]) -> bytes:
    shape_repr = repr(tuple(int(d) for d in shape))
    text = f"{{'descr': '{_descr(dtype)}', 'fortran_order': False, 'shape': {shape_repr}, }}"
    # magic(6) + version(2) + length(2) + header + '\n' padded to ALIGN
    fixed = len(MAGIC) + 2 + 2
    total = fixed + len(text) + 1
    pad = (-total) % ALIGN
    text = text + " " * pad + "\n"
    if len(text) > 0xFFFF:
        raise NpyFormatError("header too long for NPY 1.0")
    return MAGIC + bytes(VERSION) + struct.pack("<H", len(text)) + text.encode("latin1")


def write_array(path, array: np.ndarray) -> None:
    """Write ``array`` as a C-ordered, little-endian NPY 1.0 file."""
    array = np.asarray(array)
    descr = _descr(array.dtype)
    data = np.asarray(array, dtype=SUPPORTED[descr], order="C")
    with open(path, "wb") as fh:
        fh.write(header_bytes(data.dtype, data.shape))
        fh.write(data.tobytes(order="C"))


def parse_header(raw: bytes) -> tuple[np.dtype, tuple[int, ...], int]:
    """Decode an NPY 1.0 preamble.

    Returns:
        (dtype, shape, offset of the first data byte).
    """
    if len(raw) < len(MAGIC) or raw[:len(MAGIC)] != MAGIC:
        raise BadMagic("not an NPY file (bad magic string)")
    if len(raw) < 10:
        raise TruncatedFile("file ends inside the NPY preamble")
    version = (raw[6], raw[7])
    if version != VERSION:
        raise BadMagic(f"NPY version {version[0]}.{version[1]} is not supported, need 1.0")
    (hlen,) = struct.unpack("<H", raw[8:10])
    if len(raw) < 10 + hlen:
        raise TruncatedFile("file ends inside the NPY header")
    try:
        header = ast.literal_eval(raw[10:10 + hlen].decode("latin1"))
        descr = header["descr"]
        fortran = header["fortran_order"]
        shape = tuple(int(d) for d in header["shape"])
    except (ValueError, SyntaxError, KeyError, TypeError) as exc:
        raise NpyFormatError(f"malformed NPY header: {exc}") from None
    if fortran:
        raise NpyFormatError("fortran-ordered arrays are not supported")
    if descr not in SUPPORTED:
        raise UnsupportedDtype(f"dtype {descr!r} is not one of u1, u2, i4, f4")
    return SUPPORTED[descr], shape, 10 + hlen


def read_array(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    dtype, shape, offset = parse_header(raw)
    count = int(np.prod(shape, dtype=np.int64))
    nbytes = count * dtype.itemsize
    if len(raw) - offset < nbytes:
        raise TruncatedFile(
            f"{os.fspath(path)}: expected {nbytes} data bytes, found {len(raw) - offset}")
    return np.frombuffer(raw, dtype=dtype, count=count, offset=offset).reshape(shape).copy()
