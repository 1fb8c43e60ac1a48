"""Binary PGM (P5) reading and writing.

Frames and object rasters travel as 16-bit big-endian P5 files with
``#`` comment lines in the header.  Signed difference images are stored
after an affine shift of +32768 that is recorded in a comment.
"""

import re
from pathlib import Path

import numpy as np

SIGNED_OFFSET = 32768


def write_pgm16(path, values, comments=()):
    """Write a 2D array as a 16-bit big-endian P5 file.

    Values are rounded and clipped to [0, 65535].
    """
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise ValueError("PGM payload must be 2D")
    data = np.clip(np.rint(arr), 0, 65535).astype(">u2")
    header = ["P5"]
    for c in comments:
        text = str(c)
        if "\n" in text:
            raise ValueError("PGM comments must be single lines")
        header.append(f"# {text}")
    header.append(f"{arr.shape[1]} {arr.shape[0]}")
    header.append("65535")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(data.tobytes())


def write_signed_pgm16(path, values, comments=()):
    """Write a signed 2D array, shifted by +32768 so it fits a P5 file."""
    comments = list(comments) + [f"offset={SIGNED_OFFSET}"]
    write_pgm16(path, np.asarray(values, dtype=np.float64) + SIGNED_OFFSET, comments)


def read_pgm(path):
    """Read a binary P5 file.

    Returns (array, comments).  8-bit files are accepted for convenience;
    everything this package writes is 16-bit.
    """
    raw = Path(path).read_bytes()
    if not raw.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    comments = []
    fields = []
    pos = 2
    while len(fields) < 3:
        if pos >= len(raw):
            raise ValueError(f"{path}: truncated PGM header")
        ch = raw[pos:pos + 1]
        if ch == b"#":
            end = raw.index(b"\n", pos)
            comments.append(raw[pos + 1:end].decode("ascii", "replace").strip())
            pos = end + 1
        elif ch.isspace():
            pos += 1
        else:
            m = re.match(rb"\d+", raw[pos:])
            if not m:
                raise ValueError(f"{path}: malformed PGM header")
            fields.append(int(m.group()))
            pos += m.end()
    pos += 1  # single whitespace byte after maxval
    width, height, maxval = fields
    if maxval > 255:
        dtype, itemsize = ">u2", 2
    else:
        dtype, itemsize = "u1", 1
    need = width * height * itemsize
    payload = raw[pos:pos + need]
    if len(payload) != need:
        raise ValueError(f"{path}: truncated PGM payload")
    arr = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    return arr.astype(np.uint16), comments


def read_signed_pgm(path):
    """Read a difference image written by :func:`write_signed_pgm16`."""
    arr, comments = read_pgm(path)
    offset = SIGNED_OFFSET
    for c in comments:
        if c.startswith("offset="):
            offset = int(c.split("=", 1)[1])
    return arr.astype(np.int64) - offset, comments
