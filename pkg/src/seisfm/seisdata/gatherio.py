"""Gather file I/O: the native SGTH container and a SEG-Y rev-1 subset.

SGTH layout (little-endian): magic "SGTH", version u8 = 1, dtype u8
(0 = float32, 1 = float64), H u32, W u32, row-major samples, then dt and
trace spacing as two trailing float32 fields.

The SEG-Y reader handles the classic big-endian layout: 3200-byte textual
header, 400-byte binary header, then fixed-length trace records. Sample
format codes 1 (IBM 4-byte float) and 5 (IEEE 4-byte float) are supported;
traces are grouped into gathers by the ensemble (CDP) number at trace-header
bytes 21-24.
"""

from __future__ import annotations

import struct

import numpy as np

from .types import Gather

_SGTH_MAGIC = b"SGTH"
_SGTH_VERSION = 1
_DTYPES = {0: np.float32, 1: np.float64}


class GatherFormatError(ValueError):
    """Malformed SGTH container."""


class SegyFormatError(ValueError):
    """Malformed or unsupported SEG-Y content; message carries the byte offset."""


def write_gather(path, g: Gather, dtype=np.float32):
    codes = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
    code = codes.get(np.dtype(dtype))
    if code is None:
        raise GatherFormatError(f"unsupported dtype {dtype}")
    h, w = g.samples.shape
    with open(path, "wb") as f:
        f.write(_SGTH_MAGIC)
        f.write(struct.pack("<BBII", _SGTH_VERSION, code, h, w))
        f.write(np.ascontiguousarray(g.samples, dtype=dtype).tobytes())
        f.write(struct.pack("<ff", g.dt, g.trace_spacing))


def read_gather(path) -> Gather:
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != _SGTH_MAGIC:
        raise GatherFormatError(f"bad magic {raw[:4]!r}, expected {_SGTH_MAGIC!r}")
    version, code, h, w = struct.unpack_from("<BBII", raw, 4)
    if version != _SGTH_VERSION:
        raise GatherFormatError(f"unsupported version {version}, expected {_SGTH_VERSION}")
    if code not in _DTYPES:
        raise GatherFormatError(f"unknown dtype code {code}")
    dtype = _DTYPES[code]
    n = h * w * np.dtype(dtype).itemsize
    start = 14
    if len(raw) != start + n + 8:
        raise GatherFormatError(f"expected {start + n + 8} bytes, file has {len(raw)}")
    samples = np.frombuffer(raw[start : start + n], dtype="<" + np.dtype(dtype).char).reshape(h, w)
    dt, spacing = struct.unpack_from("<ff", raw, start + n)
    return Gather(samples.astype(np.float64), dt=float(dt), trace_spacing=float(spacing))


# -- IBM 4-byte floats ---------------------------------------------------------


def ibm_to_float(u):
    """Decode big-endian IBM System/360 floats given as uint32 values."""
    u = np.asarray(u, dtype=np.uint64)
    sign = 1.0 - 2.0 * ((u >> 31) & 1).astype(np.float64)
    exponent = ((u >> 24) & 0x7F).astype(np.float64)
    fraction = (u & 0x00FFFFFF).astype(np.float64) / float(1 << 24)
    return sign * fraction * 16.0 ** (exponent - 64.0)


def float_to_ibm(x):
    """Encode floats as big-endian IBM uint32 values (round-to-nearest mantissa)."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros(x.shape, dtype=np.uint32)
    nz = x != 0.0
    if not nz.any():
        return out
    m = np.abs(x[nz])
    # 16^(e-64) scaling with mantissa in [1/16, 1)
    e = np.floor(np.log2(m) / 4.0).astype(np.int64) + 1 + 64
    frac = np.rint(m / np.power(16.0, (e - 64).astype(np.float64)) * (1 << 24)).astype(np.int64)
    bump = frac >= (1 << 24)
    frac[bump] >>= 4
    e[bump] += 1
    e = np.clip(e, 0, 127)
    sign = (x[nz] < 0).astype(np.uint32) << 31
    out[nz] = sign | (e.astype(np.uint32) << 24) | frac.astype(np.uint32)
    return out


# -- SEG-Y ----------------------------------------------------------------------

_TEXT_LEN = 3200
_BIN_LEN = 400
_TRACE_HEADER_LEN = 240
_SUPPORTED_FORMATS = {1: "ibm", 5: "ieee"}


def read_segy(path):
    """Parse a SEG-Y file; returns (gathers, header).

    `gathers` is one Gather per ensemble number, traces in file order as
    columns. `header` carries dt (seconds), ns, the format code, and the
    textual header bytes.
    """
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _TEXT_LEN + _BIN_LEN:
        raise SegyFormatError(
            f"file too short for SEG-Y headers: {len(raw)} bytes < {_TEXT_LEN + _BIN_LEN}"
        )
    text = raw[:_TEXT_LEN]
    dt_us, = struct.unpack_from(">H", raw, _TEXT_LEN + 16)
    ns, = struct.unpack_from(">H", raw, _TEXT_LEN + 20)
    fmt, = struct.unpack_from(">h", raw, _TEXT_LEN + 24)
    if fmt not in _SUPPORTED_FORMATS:
        raise SegyFormatError(
            f"unsupported sample format code {fmt} at byte offset {_TEXT_LEN + 24}"
        )
    if ns == 0:
        raise SegyFormatError(f"binary header declares 0 samples per trace at byte offset {_TEXT_LEN + 20}")

    trace_bytes = _TRACE_HEADER_LEN + 4 * ns
    pos = _TEXT_LEN + _BIN_LEN
    ensembles: dict[int, list[np.ndarray]] = {}
    order: list[int] = []
    while pos < len(raw):
        if pos + trace_bytes > len(raw):
            raise SegyFormatError(
                f"truncated trace record at byte offset {pos}: "
                f"{len(raw) - pos} bytes left, {trace_bytes} needed"
            )
        ens, = struct.unpack_from(">i", raw, pos + 20)
        tns, = struct.unpack_from(">H", raw, pos + 114)
        if tns and tns != ns:
            raise SegyFormatError(
                f"trace at byte offset {pos} declares {tns} samples, binary header says {ns}"
            )
        data = raw[pos + _TRACE_HEADER_LEN : pos + trace_bytes]
        if fmt == 5:
            trace = np.frombuffer(data, dtype=">f4").astype(np.float64)
        else:
            words = np.frombuffer(data, dtype=">u4")
            trace = ibm_to_float(words)
        if ens not in ensembles:
            ensembles[ens] = []
            order.append(ens)
        ensembles[ens].append(trace)
        pos += trace_bytes

    dt = (dt_us or 4000) * 1e-6
    gathers = [Gather(np.stack(ensembles[e], axis=1), dt=dt) for e in order]
    header = {"dt": dt, "ns": int(ns), "format": int(fmt), "text": text, "ensembles": order}
    return gathers, header


def write_segy(path, gathers, dt=0.004, format_code=5):
    """Write gathers as one SEG-Y ensemble each (testing and interchange aid)."""
    if format_code not in _SUPPORTED_FORMATS:
        raise SegyFormatError(f"unsupported sample format code {format_code}")
    ns_set = {g.samples.shape[0] for g in gathers}
    if len(ns_set) > 1:
        raise SegyFormatError(f"all gathers must share a trace length, got {sorted(ns_set)}")
    ns = ns_set.pop() if ns_set else 0
    with open(path, "wb") as f:
        f.write(b" " * _TEXT_LEN)
        binary = bytearray(_BIN_LEN)
        struct.pack_into(">H", binary, 16, int(round(dt * 1e6)))
        struct.pack_into(">H", binary, 20, ns)
        struct.pack_into(">h", binary, 24, format_code)
        f.write(bytes(binary))
        for i, g in enumerate(gathers):
            for j in range(g.samples.shape[1]):
                th = bytearray(_TRACE_HEADER_LEN)
                struct.pack_into(">i", th, 20, i + 1)
                struct.pack_into(">H", th, 114, ns)
                struct.pack_into(">H", th, 116, int(round(dt * 1e6)))
                f.write(bytes(th))
                col = g.samples[:, j]
                if format_code == 5:
                    f.write(col.astype(">f4").tobytes())
                else:
                    f.write(float_to_ibm(col).astype(">u4").tobytes())
