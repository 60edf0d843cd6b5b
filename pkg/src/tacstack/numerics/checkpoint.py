"""Parameter checkpoint file.

Layout: magic ``TKPT``, u32 version, u32 count, name table (u16 length +
utf-8 bytes each), then per parameter in table order: u8 dtype code, u8 ndim,
u32 dims, raw little-endian scalars. Round-trips are bit-exact for float64.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import DataValidationError
from .optim import ParameterSet

MAGIC = b"TKPT"
VERSION = 1
_DTYPES = {0: "<f8", 1: "<f4"}
_CODES = {"float64": 0, "float32": 1}


def save_params(path, params: ParameterSet, extra: dict | None = None) -> None:
    """Write parameters (and optionally optimizer state as reserved names)."""
    entries: list[tuple[str, np.ndarray]] = [(n, t.data) for n, t in params.items()]
    if extra:
        entries.extend((f"__extra__/{k}", np.asarray(v, dtype=np.float64)) for k, v in extra.items())
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<II", VERSION, len(entries))
    for name, _ in entries:
        nb = name.encode("utf-8")
        buf += struct.pack("<H", len(nb)) + nb
    for _, arr in entries:
        code = _CODES[str(arr.dtype)]
        buf += struct.pack("<BB", code, arr.ndim)
        for d in arr.shape:
            buf += struct.pack("<I", d)
        buf += np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes()
    Path(path).write_bytes(bytes(buf))


def load_arrays(path) -> dict[str, np.ndarray]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise DataValidationError(f"{path}: bad checkpoint magic")
    version, count = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise DataValidationError(f"{path}: unsupported checkpoint version {version}")
    off = 12
    names = []
    for _ in range(count):
        (ln,) = struct.unpack_from("<H", raw, off)
        off += 2
        names.append(raw[off: off + ln].decode("utf-8"))
        off += ln
    out = {}
    for name in names:
        code, ndim = struct.unpack_from("<BB", raw, off)
        off += 2
        shape = struct.unpack_from(f"<{ndim}I", raw, off) if ndim else ()
        off += 4 * ndim
        dt = np.dtype(_DTYPES[code])
        n = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype=dt, count=n, offset=off).reshape(shape)
        off += n * dt.itemsize
        out[name] = arr.astype(np.float64) if code == 1 else arr.copy()
    return out


def load_params(path, params: ParameterSet) -> dict[str, np.ndarray]:
    """Fill an existing parameter set in place; returns any extra arrays."""
    arrays = load_arrays(path)
    extra = {}
    for name, arr in arrays.items():
        if name.startswith("__extra__/"):
            extra[name.split("/", 1)[1]] = arr
            continue
        if name not in params:
            raise DataValidationError(f"checkpoint has unknown parameter {name!r}")
        t = params[name]
        if t.data.shape != arr.shape:
            raise DataValidationError(
                f"checkpoint shape mismatch for {name!r}: {arr.shape} vs {t.data.shape}"
            )
        t.data = arr.astype(np.float64)
    missing = [n for n in params.names() if n not in arrays]
    if missing:
        raise DataValidationError(f"checkpoint missing parameters: {missing[:5]}")
    return extra
