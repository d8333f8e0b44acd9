"""File formats: canonical event files, PGM images, grids and flat configs.

Canonical event file ("EVST"): a 16-byte header followed by 16-byte
little-endian records.

    header: magic "EVST" | version u16 | width u16 | height u16 | 6 reserved
    record: t u64 (microseconds) | x u16 | y u16 | polarity u8 | 3 pad

A plain-text CSV variant (``t,x,y,p`` with a header line) is accepted
for fixtures.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .events import EVENT_DTYPE

EVST_MAGIC = b"EVST"
EVST_VERSION = 1
_HEADER = struct.Struct("<4sHHH6x")
_RECORD_DTYPE = np.dtype(
    [("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "u1"), ("pad", "u1", 3)]
)


class FormatError(ValueError):
    """Raised on malformed input files."""


def write_events(path, events: np.ndarray, width: int, height: int) -> None:
    """Write an EVENT_DTYPE array as a canonical binary event file."""
    recs = np.zeros(len(events), dtype=_RECORD_DTYPE)
    for f in ("t", "x", "y", "p"):
        recs[f] = events[f]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(EVST_MAGIC, EVST_VERSION, width, height))
        fh.write(recs.tobytes())


def read_events(path) -> tuple[np.ndarray, int, int]:
    """Read a canonical event file (binary or CSV). Returns (events, w, h).

    CSV files carry no geometry; width/height are inferred as the
    smallest power-of-two grid containing all coordinates, minimum 128.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if head[:4] == EVST_MAGIC:
            if len(head) < _HEADER.size:
                raise FormatError("truncated header")
            _, version, width, height = _HEADER.unpack(head)
            if version != EVST_VERSION:
                raise FormatError(f"unsupported version {version}")
            body = fh.read()
            if len(body) % _RECORD_DTYPE.itemsize:
                raise FormatError("truncated record")
            recs = np.frombuffer(body, dtype=_RECORD_DTYPE)
            events = np.empty(len(recs), dtype=EVENT_DTYPE)
            for f in ("t", "x", "y", "p"):
                events[f] = recs[f]
            return events, width, height
    # fall through: try the CSV fixture variant
    try:
        text = path.read_text()
    except UnicodeDecodeError as exc:
        raise FormatError("bad magic and not a CSV file") from exc
    return _parse_csv(text)


def _parse_csv(text: str) -> tuple[np.ndarray, int, int]:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].replace(" ", "") != "t,x,y,p":
        raise FormatError("expected 't,x,y,p' header line")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 4:
            raise FormatError(f"bad CSV row: {ln!r}")
        rows.append(tuple(int(p) for p in parts))
    events = np.array(rows, dtype=[("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "u1")]) if rows else np.empty(0, dtype=EVENT_DTYPE)
    events = events.astype(EVENT_DTYPE)
    if len(events):
        side = 128
        while side <= int(max(events["x"].max(), events["y"].max())):
            side *= 2
    else:
        side = 128
    return events, side, side


def write_pgm(path, image: np.ndarray, maxval: int = 255) -> None:
    """Write a 2-D array as binary PGM (P5), linearly scaled to 0..maxval."""
    img = np.asarray(image, dtype=np.float64)
    lo, hi = img.min(), img.max()
    if hi > lo:
        img = (img - lo) / (hi - lo)
    else:
        img = np.zeros_like(img)
    data = np.round(img * maxval).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n{maxval}\n".encode())
        fh.write(data.tobytes())


def write_mask_pgm(path, mask: np.ndarray) -> None:
    """Write a binary mask as a two-level PGM (0 / 255)."""
    data = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{mask.shape[1]} {mask.shape[0]}\n255\n".encode())
        fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM (P5) into a uint8/uint16 array."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise FormatError("not a binary PGM")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    dtype = np.uint8 if maxval < 256 else ">u2"
    return np.frombuffer(data, dtype=dtype, count=width * height, offset=pos).reshape(
        height, width
    )


def dump_grid(path, grid: np.ndarray) -> None:
    """Dump a 2-D grid as plain text, row-major, 9 significant digits."""
    np.savetxt(path, np.asarray(grid, dtype=np.float64), fmt="%.8e")


def load_grid(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path))


def write_config(path, values: dict) -> None:
    """Write a flat key/value config, one ``key = value`` per line."""
    with open(path, "w") as fh:
        for k, v in values.items():
            fh.write(f"{k} = {v}\n")


def read_config(path) -> dict[str, str]:
    """Read a flat key/value config. '#' starts a comment."""
    values: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"expected 'key = value', got {raw!r}")
        k, v = line.split("=", 1)
        values[k.strip()] = v.strip()
    return values
