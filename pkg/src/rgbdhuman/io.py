"""Netpbm rasters and JSON-lines records."""
from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np


class FormatError(ValueError):
    pass


_HEADER_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _parse_header(buf: bytes, n_fields: int):
    pos = 0
    fields = []
    for _ in range(n_fields):
        m = _HEADER_TOKEN.match(buf, pos)
        if not m:
            raise FormatError("truncated header")
        fields.append(m.group(1))
        pos = m.end()
    # exactly one whitespace byte separates the header from the raster
    if pos >= len(buf) or not buf[pos:pos + 1].isspace():
        raise FormatError("missing raster after header")
    return fields, pos + 1


def _read_pnm(path, magic: bytes, channels: int) -> np.ndarray:
    path = Path(path)
    buf = path.read_bytes()
    try:
        fields, start = _parse_header(buf, 4)
        if fields[0] != magic:
            raise FormatError(f"expected magic {magic.decode()}, found {fields[0][:8]!r}")
        try:
            w, h, maxval = (int(f) for f in fields[1:])
        except ValueError:
            raise FormatError("non-numeric header field") from None
        if w <= 0 or h <= 0 or not 0 < maxval < 65536:
            raise FormatError(f"bad dimensions or maxval ({w}x{h}, maxval {maxval})")
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        n = w * h * channels
        if len(buf) - start < n * dtype.itemsize:
            raise FormatError(f"raster truncated: need {n * dtype.itemsize} bytes, "
                              f"have {len(buf) - start}")
    except FormatError as e:
        raise FormatError(f"{path}: {e}") from None
    data = np.frombuffer(buf, dtype=dtype, count=n, offset=start)
    shape = (h, w) if channels == 1 else (h, w, channels)
    return data.reshape(shape).astype(np.uint16 if maxval > 255 else np.uint8)


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) PGM; 16-bit rasters come back as ``uint16``."""
    return _read_pnm(path, b"P5", 1)


def read_ppm(path) -> np.ndarray:
    return _read_pnm(path, b"P6", 3)


def write_pgm(path, img) -> None:
    """Write a 2-D integer array as binary PGM, 16-bit when it needs it."""
    a = np.asarray(img)
    if a.ndim != 2:
        raise ValueError(f"PGM needs a 2-D array, got shape {a.shape}")
    if a.size and (a.min() < 0 or a.max() > 65535):
        raise ValueError("PGM values must lie in 0..65535")
    wide = a.dtype.itemsize > 1 or (a.size and a.max() > 255)
    maxval = 65535 if wide else 255
    raster = a.astype(">u2" if wide else "u1").tobytes()
    h, w = a.shape
    Path(path).write_bytes(b"P5\n%d %d\n%d\n" % (w, h, maxval) + raster)


def write_ppm(path, rgb) -> None:
    a = np.asarray(rgb)
    if a.ndim != 3 or a.shape[2] != 3 or a.dtype != np.uint8:
        raise ValueError(f"PPM needs a (h, w, 3) uint8 array, got {a.shape} {a.dtype}")
    h, w, _ = a.shape
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (w, h) + a.tobytes())


def read_jsonl(path) -> Iterator[dict]:
    """Yield the JSON objects of a JSON-lines file, skipping blank lines."""
    path = Path(path)
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"{path}:{lineno}: {e.msg}") from None
            if not isinstance(rec, dict):
                raise FormatError(f"{path}:{lineno}: expected a JSON object")
            yield rec


def write_jsonl(path, records: Iterable[dict]) -> None:
    with open(Path(path), "w") as f:
        for r in records:
            f.write(json.dumps(r) + "\n")


def frame_files(directory, suffix: str = ".pgm") -> list[tuple[int, Path]]:
    """Frames of a sequence directory: numeric file stems, sorted by frame id."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"{directory} is not a directory")
    frames = []
    for p in directory.iterdir():
        if p.suffix == suffix and p.stem.isdigit():
            frames.append((int(p.stem), p))
    return sorted(frames)


def frame_name(frame: int, suffix: str = ".pgm", width: int = 6) -> str:
    return f"{frame:0{width}d}{suffix}"
