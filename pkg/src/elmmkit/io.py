"""On-disk formats.

* cube: ``<stem>.json`` header ``{lines, samples, bands, dtype: "f32le",
  interleave: "bsq"}`` plus ``<stem>.bin``, raw little-endian float32,
  band-sequential (band-major, row-major within a band).
* matrix: CSV, one matrix row per line, optional first line ``# rows cols``.
* map: binary PGM (P5), 8-bit.
* report: ``key=value`` lines.
"""

import json
from pathlib import Path

import numpy as np

from .core import SpectralCube

HEADER_KEYS = ("lines", "samples", "bands", "dtype", "interleave")


class FormatError(ValueError):
    """Malformed or missing input file; the message names file and field."""


def _paths(path):
    p = Path(path)
    if p.suffix in (".json", ".bin"):
        p = p.with_suffix("")
    return p.with_suffix(".json"), p.with_suffix(".bin")


def write_cube(path, cube):
    hdr, payload = _paths(path)
    hdr.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "lines": int(cube.lines),
        "samples": int(cube.samples),
        "bands": int(cube.bands),
        "dtype": "f32le",
        "interleave": "bsq",
    }
    hdr.write_text(json.dumps(header, indent=2) + "\n")
    np.ascontiguousarray(cube.data, dtype="<f4").tofile(payload)
    return hdr


def read_cube(path):
    hdr, payload = _paths(path)
    if not hdr.is_file():
        raise FormatError(f"{hdr}: header file not found")
    try:
        header = json.loads(hdr.read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"{hdr}: invalid JSON ({e})") from None
    for key in HEADER_KEYS:
        if key not in header:
            raise FormatError(f"{hdr}: missing field '{key}'")
    for key in ("lines", "samples", "bands"):
        v = header[key]
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise FormatError(f"{hdr}: field '{key}' must be a positive integer")
    if header["dtype"] != "f32le":
        raise FormatError(f"{hdr}: field 'dtype' must be \"f32le\"")
    if header["interleave"] != "bsq":
        raise FormatError(f"{hdr}: field 'interleave' must be \"bsq\"")
    lines, samples, bands = header["lines"], header["samples"], header["bands"]
    if not payload.is_file():
        raise FormatError(f"{payload}: payload file not found")
    expected = 4 * lines * samples * bands
    size = payload.stat().st_size
    if size != expected:
        raise FormatError(f"{payload}: payload is {size} bytes, header implies {expected}")
    data = np.fromfile(payload, dtype="<f4").reshape(bands, lines * samples)
    if not np.all(np.isfinite(data)):
        raise FormatError(f"{payload}: payload contains non-finite values")
    return SpectralCube(data.astype(np.float64), lines, samples)


def write_matrix(path, M, header=True):
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        if header:
            fh.write(f"# {M.shape[0]} {M.shape[1]}\n")
        np.savetxt(fh, M, fmt="%.17g", delimiter=",")
    return path


def read_matrix(path):
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"{path}: matrix file not found")
    lines = path.read_text().splitlines()
    dims = None
    rows = []
    for i, line in enumerate(lines, 1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            if dims is None and not rows:
                parts = s[1:].split()
                if len(parts) == 2 and all(p.isdigit() for p in parts):
                    dims = (int(parts[0]), int(parts[1]))
            continue
        try:
            rows.append([float(v) for v in s.split(",")])
        except ValueError:
            raise FormatError(f"{path}: line {i} is not a comma-separated list of numbers") from None
    if not rows:
        raise FormatError(f"{path}: no matrix rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise FormatError(f"{path}: rows have different lengths")
    M = np.array(rows)
    if not np.all(np.isfinite(M)):
        raise FormatError(f"{path}: non-finite entries")
    if dims is not None and M.shape != dims:
        raise FormatError(f"{path}: header says {dims[0]} x {dims[1]}, found {M.shape[0]} x {M.shape[1]}")
    return M


def to_gray(values, vmax):
    """round(255 * clamp(v, 0, vmax) / vmax) as uint8 (all zero if vmax <= 0)."""
    v = np.asarray(values, dtype=np.float64)
    if not vmax > 0:
        return np.zeros(v.shape, dtype=np.uint8)
    return np.round(255.0 * np.clip(v, 0.0, vmax) / vmax).astype(np.uint8)


def write_pgm(path, image):
    img = np.asarray(image, dtype=np.uint8)
    h, w = img.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())
    return path


def read_pgm(path):
    raw = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos].decode("ascii"))
    if tokens[0] != "P5":
        raise FormatError(f"{path}: not a binary PGM")
    w, h = int(tokens[1]), int(tokens[2])
    pos += 1
    return np.frombuffer(raw[pos:pos + w * h], dtype=np.uint8).reshape(h, w)


def write_report(path, values):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for k, v in values.items():
            if isinstance(v, float):
                v = f"{v:.10g}"
            elif isinstance(v, (list, tuple)):
                v = " ".join(str(x) for x in v)
            fh.write(f"{k}={v}\n")
    return path


def read_report(path):
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"{path}: report file not found")
    out = {}
    for line in path.read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out
