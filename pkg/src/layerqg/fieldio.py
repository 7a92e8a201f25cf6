"""Binary layer-field files.

Layout (little-endian):
    bytes 0..3   magic  b"LQG1"
    u32          format version (currently 1)
    u32          nx  (first array dimension)
    u32          ny  (second array dimension)
    u32          layer count (always 3)
    u32          representation flag: 0 spectral, 1 grid
    f64 payload  row-major, layer by layer, 3*nx*ny values

Round-trips are bit-exact.  For grid representation nx/ny hold the grid
dimensions (Gx+2, Gy+2).
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import FieldFormatError, FieldLengthError, ShapeError
from .spectral import LayerField, N_LAYERS, SpectralBasis

MAGIC = b"LQG1"
VERSION = 1
_HEADER = struct.Struct("<4sIIIII")


def write_field(path, field: LayerField):
    if field.coeffs is not None:
        arr, flag = field.coeffs, 0
    else:
        arr, flag = field.grid, 1
    nx, ny = arr.shape[1], arr.shape[2]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, nx, ny, N_LAYERS, flag))
        fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_field(path, basis: SpectralBasis) -> LayerField:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise FieldLengthError(f"{path}: truncated header")
        magic, version, nx, ny, layers, flag = _HEADER.unpack(header)
        if magic != MAGIC:
            raise FieldFormatError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise FieldFormatError(f"{path}: unsupported version {version}")
        if layers != N_LAYERS:
            raise FieldFormatError(f"{path}: layer count {layers} != 3")
        if flag not in (0, 1):
            raise FieldFormatError(f"{path}: bad representation flag {flag}")
        expected = N_LAYERS * nx * ny * 8
        payload = fh.read(expected + 1)
        if len(payload) != expected:
            raise FieldLengthError(
                f"{path}: payload {len(payload)} bytes, header declares "
                f"{expected}")
    arr = np.frombuffer(payload, dtype="<f8").reshape(N_LAYERS, nx, ny).copy()
    if flag == 0:
        if (nx, ny) != basis.spectral_shape:
            raise ShapeError(
                f"{path}: spectral dims {(nx, ny)} != {basis.spectral_shape}")
        return LayerField.from_coeffs(basis, arr)
    if (nx, ny) != basis.grid_shape:
        raise ShapeError(f"{path}: grid dims {(nx, ny)} != {basis.grid_shape}")
    return LayerField.from_grid(basis, arr)
