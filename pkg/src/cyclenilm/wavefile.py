"""Waveform files: a little-endian binary container and a one-column CSV.

Binary layout::

    magic   4 bytes  b"CSWF"
    version u32      1
    kind    u8       0 = current, 1 = voltage
    rate    f64      samples per second
    count   u64      number of samples
    data    count x f64

The CSV form has a header row ``sample_rate=<hz>,kind=<current|voltage>``
followed by one sample per line.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from cyclenilm.errors import FormatError
from cyclenilm.waveform import KINDS, Waveform

MAGIC = b"CSWF"
VERSION = 1
_HEADER = struct.Struct("<4sIBdQ")


def write_waveform(path: str | Path, wave: Waveform) -> None:
    header = _HEADER.pack(MAGIC, VERSION, KINDS.index(wave.kind),
                          float(wave.sample_rate), wave.samples.size)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(wave.samples.astype("<f8").tobytes())


def read_waveform(path: str | Path) -> Waveform:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return read_waveform_csv(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, kind, rate, count = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if kind >= len(KINDS):
        raise FormatError(f"{path}: unknown kind code {kind}")
    body = raw[_HEADER.size:]
    if len(body) != 8 * count:
        raise FormatError(f"{path}: expected {count} samples, found {len(body) // 8}")
    samples = np.frombuffer(body, dtype="<f8").astype(np.float64)
    return Waveform(samples, rate, KINDS[kind])


def write_waveform_csv(path: str | Path, wave: Waveform) -> None:
    with open(path, "w") as fh:
        fh.write(f"sample_rate={wave.sample_rate:.17g},kind={wave.kind}\n")
        np.savetxt(fh, wave.samples, fmt="%.17g")


def read_waveform_csv(path: str | Path) -> Waveform:
    with open(path) as fh:
        header = fh.readline().strip()
        fields = dict(part.split("=", 1) for part in header.split(",") if "=" in part)
        if "sample_rate" not in fields:
            raise FormatError(f"{path}: header must start with sample_rate=<hz>")
        samples = np.loadtxt(fh, dtype=np.float64, ndmin=1)
    return Waveform(samples, float(fields["sample_rate"]), fields.get("kind", "current"))
