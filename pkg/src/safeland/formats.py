"""Binary PGM images and plain-text key=value files.

PGM (P5) conventions used throughout:
  - depth images: 16-bit, millimeters, value 0 = invalid;
  - label images: 8-bit, pixel value = class id;
  - map images:   8-bit, 0 = Safe, 128 = Unsafe, 255 = Unknown (64 marks a
    selected landing cell in annotated maps).
16-bit samples are big-endian, per the format specification.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np


class ParseError(ValueError):
    """Malformed file content (bad syntax, wrong magic, out-of-range values)."""


def write_pgm_bytes(image: np.ndarray) -> bytes:
    """Encode a 2D uint8 or uint16 array as binary PGM."""
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise ValueError("PGM image must be a 2D array")
    if arr.dtype == np.uint8:
        maxval, payload = 255, arr.tobytes()
    elif arr.dtype == np.uint16:
        maxval, payload = 65535, arr.astype(">u2").tobytes()
    else:
        raise ValueError(f"unsupported PGM dtype: {arr.dtype}")
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n{maxval}\n"
    return header.encode("ascii") + payload


def read_pgm_bytes(data: bytes, source: str = "<bytes>") -> np.ndarray:
    """Decode a binary PGM; returns uint8 (maxval <= 255) or uint16."""
    pos = 0

    def token() -> bytes:
        nonlocal pos
        while pos < len(data):
            ch = data[pos : pos + 1]
            if ch == b"#":  # comment runs to end of line
                while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            elif ch.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError(f"{source}: truncated PGM header")
        return data[start:pos]

    if token() != b"P5":
        raise ParseError(f"{source}: not a binary PGM (missing P5 magic)")
    try:
        width, height, maxval = int(token()), int(token()), int(token())
    except ValueError as exc:
        raise ParseError(f"{source}: bad PGM header field") from exc
    if width < 0 or height < 0 or not 0 < maxval < 65536:
        raise ParseError(f"{source}: invalid PGM dimensions or maxval")
    pos += 1  # single whitespace byte after maxval
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    count = width * height
    payload = data[pos : pos + count * dtype.itemsize]
    if len(payload) != count * dtype.itemsize:
        raise ParseError(f"{source}: PGM payload shorter than header promises")
    arr = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    return arr.astype(np.uint16) if maxval > 255 else arr.copy()


def write_pgm(path: str | os.PathLike, image: np.ndarray) -> None:
    Path(path).write_bytes(write_pgm_bytes(image))


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    return read_pgm_bytes(Path(path).read_bytes(), source=str(path))


def read_kv_lines(path: str | os.PathLike) -> list[tuple[int, str, str]]:
    """Parse a key=value file into (line_number, key, value) triples.

    Blank lines and '#' comments are skipped; keys may repeat. A line without
    '=' raises ParseError naming the offending line.
    """
    out = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key:
            raise ParseError(f"{path}:{lineno}: empty key")
        out.append((lineno, key, value))
    return out


def read_kv(path: str | os.PathLike) -> dict[str, str]:
    """key=value file as a dict; later duplicates override earlier ones."""
    return {key: value for _, key, value in read_kv_lines(path)}


def write_kv(path: str | os.PathLike, items: dict[str, str]) -> None:
    Path(path).write_text("".join(f"{k}={v}\n" for k, v in items.items()))


def fmt(value: float) -> str:
    """Fixed 6-decimal formatting used for all numeric text output."""
    return f"{value:.6f}"
