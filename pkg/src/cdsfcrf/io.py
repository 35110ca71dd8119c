"""On-disk formats.

``CDKS`` k-space and ``CDIM`` image files share one header layout::

    magic   4 bytes   b"CDKS" or b"CDIM"
    version u32 LE    1
    width   u32 LE
    height  u32 LE

followed by ``width * height`` row-major samples: complex values as
little-endian f64 ``(re, im)`` pairs for CDKS (DC-centred), one
little-endian f64 per pixel for CDIM.

Masks are binary PBM (``P4``) bitmaps with 1 = acquired. Preview images are
16-bit binary PGM (``P5``, maxval 65535) linearly rescaled from
``[min, max]``; the two bounds go to a sidecar ``<name>.pgm.txt``.

Config, spec and manifest text files are flat ``key = value`` lines; ``#``
starts a comment.
"""

import os
import struct
import tempfile

import numpy as np

from .errors import FormatError
from .transform import as_image, as_kspace, as_mask

VERSION = 1
_HEADER = struct.Struct("<4sIII")


def atomic_write_bytes(path, data):
    """Write `data` to `path` via a temp file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


def _pack(magic, arr, payload):
    height, width = arr.shape
    return _HEADER.pack(magic, VERSION, width, height) + payload


def _unpack(path, magic, itemsize):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    got, version, width, height = _HEADER.unpack_from(raw)
    if got != magic:
        raise FormatError(f"{path}: bad magic {got!r}, expected {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    body = raw[_HEADER.size:]
    if width == 0 or height == 0 or len(body) != width * height * itemsize:
        raise FormatError(f"{path}: payload size {len(body)} does not match {width}x{height}")
    return width, height, body


def write_kspace(path, ks):
    ks = as_kspace(ks)
    pairs = np.empty(ks.shape + (2,), dtype="<f8")
    pairs[..., 0] = ks.real
    pairs[..., 1] = ks.imag
    atomic_write_bytes(path, _pack(b"CDKS", ks, pairs.tobytes()))


def read_kspace(path):
    width, height, body = _unpack(path, b"CDKS", 16)
    pairs = np.frombuffer(body, dtype="<f8").reshape(height, width, 2)
    return pairs[..., 0] + 1j * pairs[..., 1]


def write_image(path, img):
    img = as_image(img)
    atomic_write_bytes(path, _pack(b"CDIM", img, img.astype("<f8").tobytes()))


def read_image(path):
    width, height, body = _unpack(path, b"CDIM", 8)
    return np.frombuffer(body, dtype="<f8").reshape(height, width).astype(np.float64)


def write_pbm(path, mask):
    mask = as_mask(mask)
    height, width = mask.shape
    header = f"P4\n{width} {height}\n".encode("ascii")
    atomic_write_bytes(path, header + np.packbits(mask, axis=1).tobytes())


def _pnm_header(raw, path):
    # Magic, then whitespace-separated integers; '#' comments run to EOL.
    tokens, pos = [], 0
    want = 3 if raw[:2] == b"P4" else 4
    while len(tokens) < want:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PNM header")
        tokens.append(raw[start:pos])
    return tokens, pos + 1


def read_pbm(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] != b"P4":
        raise FormatError(f"{path}: not a binary PBM (P4) file")
    tokens, pos = _pnm_header(raw, path)
    try:
        width, height = int(tokens[1]), int(tokens[2])
    except ValueError as exc:
        raise FormatError(f"{path}: bad PBM size") from exc
    row_bytes = (width + 7) // 8
    body = raw[pos:pos + row_bytes * height]
    if len(body) != row_bytes * height:
        raise FormatError(f"{path}: truncated PBM data")
    bits = np.unpackbits(np.frombuffer(body, dtype=np.uint8).reshape(height, row_bytes), axis=1)
    return bits[:, :width].astype(bool)


def write_pgm(path, img):
    """16-bit PGM preview plus ``<path>.txt`` holding the rescale bounds."""
    img = as_image(img)
    lo, hi = float(img.min()), float(img.max())
    scale = (img - lo) / (hi - lo) if hi > lo else np.zeros_like(img)
    levels = np.rint(scale * 65535).astype(">u2")
    height, width = img.shape
    atomic_write_bytes(path, f"P5\n{width} {height}\n65535\n".encode("ascii") + levels.tobytes())
    write_kv(os.fspath(path) + ".txt", {"min": repr(lo), "max": repr(hi)})


def read_pgm(path):
    """Read a 16-bit PGM and undo the rescale when the sidecar exists."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (P5) file")
    tokens, pos = _pnm_header(raw, path)
    width, height, maxval = (int(t) for t in tokens[1:4])
    dtype = ">u2" if maxval > 255 else "u1"
    count = width * height
    levels = np.frombuffer(raw[pos:], dtype=dtype, count=count).reshape(height, width)
    out = levels.astype(np.float64) / maxval
    sidecar = os.fspath(path) + ".txt"
    if os.path.exists(sidecar):
        bounds = read_kv(sidecar)
        lo, hi = float(bounds["min"]), float(bounds["max"])
        out = lo + out * (hi - lo)
    return out


def write_kv(path, mapping):
    lines = [f"{k} = {v}" for k, v in mapping.items()]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_kv(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out
