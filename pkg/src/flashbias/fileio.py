"""Binary file formats for dense matrices and factored biases.

DBM1 (dense matrix): magic ``DBM1``, u8 dtype code (0 = f64, 1 = f32),
u64 rows, u64 cols, then the row-major little-endian payload.

FBF1 (factored bias): magic ``FBF1``, u8 dtype code, u8 origin tag
(0 = exact, 1 = svd, 2 = neural), u64 N, u64 M, u64 R, then the fq payload
followed by the fk payload, each row-major little-endian.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .bias import FactoredBias
from .core import as_matrix
from .errors import ValidationError

_DTYPE_CODES = {"f64": 0, "f32": 1}
_CODE_DTYPES = {0: "<f8", 1: "<f4"}
_ORIGIN_CODES = {"exact": 0, "svd": 1, "neural": 2}
_CODE_ORIGINS = {v: k for k, v in _ORIGIN_CODES.items()}


def _dtype_code(dtype: str) -> int:
    if dtype not in _DTYPE_CODES:
        raise ValidationError(f"dtype must be one of {sorted(_DTYPE_CODES)}")
    return _DTYPE_CODES[dtype]


def _payload(a: np.ndarray, code: int) -> bytes:
    return np.ascontiguousarray(a, dtype=_CODE_DTYPES[code]).tobytes()


def _read_exact(f, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise ValidationError(f"truncated file while reading {what}")
    return data


def write_dbm1(path, a, dtype: str = "f64") -> None:
    a = as_matrix(a, "matrix")
    code = _dtype_code(dtype)
    with open(path, "wb") as f:
        f.write(b"DBM1")
        f.write(struct.pack("<BQQ", code, a.shape[0], a.shape[1]))
        f.write(_payload(a, code))


def read_dbm1(path) -> np.ndarray:
    with open(Path(path), "rb") as f:
        if _read_exact(f, 4, "magic") != b"DBM1":
            raise ValidationError(f"{path}: not a DBM1 file")
        code, rows, cols = struct.unpack("<BQQ", _read_exact(f, 17, "header"))
        if code not in _CODE_DTYPES:
            raise ValidationError(f"{path}: unknown dtype code {code}")
        dt = np.dtype(_CODE_DTYPES[code])
        raw = _read_exact(f, rows * cols * dt.itemsize, "payload")
    return np.frombuffer(raw, dtype=dt).reshape(rows, cols).astype(dt.newbyteorder("="))


def write_fbf1(path, fb: FactoredBias, dtype: str = "f64") -> None:
    code = _dtype_code(dtype)
    n, r = fb.fq.shape
    m = fb.fk.shape[0]
    with open(path, "wb") as f:
        f.write(b"FBF1")
        f.write(struct.pack("<BBQQQ", code, _ORIGIN_CODES[fb.origin], n, m, r))
        f.write(_payload(fb.fq, code))
        f.write(_payload(fb.fk, code))


def read_fbf1(path) -> FactoredBias:
    with open(Path(path), "rb") as f:
        if _read_exact(f, 4, "magic") != b"FBF1":
            raise ValidationError(f"{path}: not an FBF1 file")
        code, origin, n, m, r = struct.unpack("<BBQQQ", _read_exact(f, 26, "header"))
        if code not in _CODE_DTYPES:
            raise ValidationError(f"{path}: unknown dtype code {code}")
        if origin not in _CODE_ORIGINS:
            raise ValidationError(f"{path}: unknown origin tag {origin}")
        dt = np.dtype(_CODE_DTYPES[code])
        fq = np.frombuffer(_read_exact(f, n * r * dt.itemsize, "fq"), dtype=dt)
        fk = np.frombuffer(_read_exact(f, m * r * dt.itemsize, "fk"), dtype=dt)
    return FactoredBias(fq.reshape(n, r), fk.reshape(m, r),
                        origin=_CODE_ORIGINS[origin])
