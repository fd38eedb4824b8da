"""Binary file formats, image codecs, manifests and CSV writers.

All binary formats are little-endian:

LAT1  latent code
    b"LAT1" | u16 version=1 | u32 L | u32 D | L*D f32, row-major

DIR1  attribute direction
    b"DIR1" | u16 version=1 | u32 L | u32 D | L*D f32 | f32 bias
    | u16 name length | UTF-8 name
    The direction is renormalised in float64 on load.

GEN1  synthetic generator world
    b"GEN1" | u16 version=1 | u8 kind (0 linear, 1 mlp) | u32 seed | u32 L
    | u32 D | u32 n | u32 C | u32 hidden | parameter arrays as f32
    Linear arrays: d (L*D), A (n*n*C x L*D), c (n*n*C).
    MLP arrays: d, W1 (hidden x L*D), b1, W2 (n*n*C x hidden), b2.

IMF1  raw float image
    b"IMF1" | u16 version=1 | u32 H | u32 W | u32 C | C planes of H*W f32

8-bit images use binary PGM (P5, one channel) or PPM (P6, three channels).
"""

from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .directions import AttributeDirection
from .errors import FormatError
from .generator import KIND_TAGS, GENERATORS, SyntheticGenerator, f32_unit
from .imaging import as_image

VERSION = 1

_PARAM_ORDER = {"linear": ("d", "A", "c"), "mlp": ("d", "W1", "b1", "W2", "b2")}


class _Reader:
    def __init__(self, data: bytes, what: str):
        self.data = data
        self.pos = 0
        self.what = what

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise FormatError(f"truncated {self.what} file")
        out = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return out

    def f32(self, count: int) -> np.ndarray:
        size = 4 * count
        if self.pos + size > len(self.data):
            raise FormatError(f"truncated {self.what} file")
        arr = np.frombuffer(self.data, dtype="<f4", count=count, offset=self.pos)
        self.pos += size
        return arr.astype(np.float64)

    def header(self, magic: bytes):
        got = self.take("<4sH")
        if got[0] != magic:
            raise FormatError(f"bad magic {got[0]!r}, expected {magic!r}")
        if got[1] != VERSION:
            raise FormatError(f"unsupported {self.what} version {got[1]}")

    def done(self):
        if self.pos != len(self.data):
            raise FormatError(f"trailing bytes in {self.what} file")


def _f32_bytes(a) -> bytes:
    return np.ascontiguousarray(a, dtype="<f4").tobytes()


# --- latent codes ----------------------------------------------------------------

def latent_bytes(w) -> bytes:
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2:
        raise FormatError(f"latent must be 2-D, got shape {w.shape}")
    return struct.pack("<4sHII", b"LAT1", VERSION, *w.shape) + _f32_bytes(w)


def latent_from_bytes(data: bytes) -> np.ndarray:
    r = _Reader(data, "LAT1")
    r.header(b"LAT1")
    n_layers, dim = r.take("<II")
    w = r.f32(n_layers * dim).reshape(n_layers, dim)
    r.done()
    return w


def quantize_latent(w) -> np.ndarray:
    """The float64 code that a LAT1 round trip yields."""
    return np.asarray(w, dtype=np.float32).astype(np.float64)


def save_latent(path, w) -> None:
    Path(path).write_bytes(latent_bytes(w))


def load_latent(path) -> np.ndarray:
    return latent_from_bytes(Path(path).read_bytes())


# --- directions -------------------------------------------------------------------

def quantize_direction(d: AttributeDirection) -> AttributeDirection:
    """The direction exactly as a DIR1 round trip reproduces it."""
    a = f32_unit(d.a.reshape(-1)).reshape(d.a.shape)
    b = float(np.float32(d.b))
    return AttributeDirection(a, b, d.name, d.train_accuracy)


def direction_bytes(d: AttributeDirection) -> bytes:
    if d.a.ndim != 2:
        raise FormatError("direction must be 2-D")
    q = quantize_direction(d)
    name = d.name.encode("utf-8")
    if len(name) > 0xFFFF:
        raise FormatError("direction name too long")
    return (struct.pack("<4sHII", b"DIR1", VERSION, *q.a.shape) + _f32_bytes(q.a)
            + struct.pack("<fH", q.b, len(name)) + name)


def direction_from_bytes(data: bytes) -> AttributeDirection:
    r = _Reader(data, "DIR1")
    r.header(b"DIR1")
    n_layers, dim = r.take("<II")
    a = r.f32(n_layers * dim)
    (b, n_name) = r.take("<fH")
    if r.pos + n_name > len(data):
        raise FormatError("truncated DIR1 file")
    name = data[r.pos: r.pos + n_name].decode("utf-8")
    r.pos += n_name
    r.done()
    if not np.linalg.norm(a) > 0:
        raise FormatError("DIR1 direction has zero norm")
    return AttributeDirection(f32_unit(a).reshape(n_layers, dim), float(b), name)


def save_direction(path, d: AttributeDirection) -> None:
    Path(path).write_bytes(direction_bytes(d))


def load_direction(path) -> AttributeDirection:
    return direction_from_bytes(Path(path).read_bytes())


# --- generator worlds ---------------------------------------------------------------

def generator_bytes(gen: SyntheticGenerator) -> bytes:
    head = struct.pack("<4sHBIIIIII", b"GEN1", VERSION, KIND_TAGS[gen.kind], gen.seed,
                       *gen.latent_shape, gen.out_size, gen.channels, gen.hidden)
    return head + b"".join(_f32_bytes(gen.params[k]) for k in _PARAM_ORDER[gen.kind])


def generator_from_bytes(data: bytes) -> SyntheticGenerator:
    r = _Reader(data, "GEN1")
    r.header(b"GEN1")
    (tag,) = r.take("<B")
    kinds = {v: k for k, v in KIND_TAGS.items()}
    if tag not in kinds:
        raise FormatError(f"unknown generator kind tag {tag}")
    kind = kinds[tag]
    seed, n_layers, dim, n, c, hidden = r.take("<IIIIII")
    n_lat, n_px = n_layers * dim, n * n * c
    sizes = {"d": n_lat, "A": n_px * n_lat, "c": n_px, "W1": hidden * n_lat,
             "b1": hidden, "W2": n_px * hidden, "b2": n_px}
    shapes = {"A": (n_px, n_lat), "W1": (hidden, n_lat), "W2": (n_px, hidden)}
    params = {}
    for key in _PARAM_ORDER[kind]:
        arr = r.f32(sizes[key])
        params[key] = arr.reshape(shapes[key]) if key in shapes else arr
    r.done()
    return GENERATORS[kind](seed, (n_layers, dim), n, c, hidden, params=params)


def save_generator(path, gen: SyntheticGenerator) -> None:
    Path(path).write_bytes(generator_bytes(gen))


def load_generator(path) -> SyntheticGenerator:
    return generator_from_bytes(Path(path).read_bytes())


# --- images ------------------------------------------------------------------------

def to_uint8(img) -> np.ndarray:
    return np.round(as_image(img) * 255.0).astype(np.uint8)


def write_pnm(path, img) -> None:
    """Binary PGM/PPM chosen by channel count."""
    px = to_uint8(img)
    h, w, c = px.shape
    magic = b"P5" if c == 1 else b"P6"
    Path(path).write_bytes(magic + b"\n%d %d\n255\n" % (w, h) + px.tobytes())


def _pnm_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PNM header")
        tokens.append(data[start:pos])
    return tokens, pos + 1


def read_pnm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    (magic, w, h, maxval), pos = _pnm_tokens(data, 4)
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"unsupported PNM magic {magic!r}")
    w, h, maxval = int(w), int(h), int(maxval)
    if maxval != 255:
        raise FormatError("only 8-bit PNM files are supported")
    c = 1 if magic == b"P5" else 3
    if len(data) - pos < w * h * c:
        raise FormatError("truncated PNM pixel data")
    raw = np.frombuffer(data, dtype=np.uint8, count=w * h * c, offset=pos)
    return raw.reshape(h, w, c).astype(np.float64) / 255.0


def write_f32_image(path, img) -> None:
    img = as_image(img)
    h, w, c = img.shape
    planar = np.moveaxis(img, 2, 0)
    Path(path).write_bytes(struct.pack("<4sHIII", b"IMF1", VERSION, h, w, c) + _f32_bytes(planar))


def read_f32_image(path) -> np.ndarray:
    r = _Reader(Path(path).read_bytes(), "IMF1")
    r.header(b"IMF1")
    h, w, c = r.take("<III")
    planar = r.f32(h * w * c).reshape(c, h, w)
    r.done()
    return as_image(np.moveaxis(planar, 0, 2))


def read_image(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() in (".f32", ".imf"):
        return read_f32_image(path)
    return read_pnm(path)


def write_image(path, img) -> None:
    path = Path(path)
    if path.suffix.lower() in (".f32", ".imf"):
        write_f32_image(path, img)
    else:
        write_pnm(path, img)


# --- manifests and CSV --------------------------------------------------------------

def load_manifest(path, kind: str) -> dict:
    """Load a versioned JSON manifest and resolve its relative paths.

    ``kind`` is ``"images"`` (entries: image, boxes, landmarks, eye_left,
    eye_right, label), ``"latents"`` (entries: latent, label) or ``"pairs"``
    (pairs: id, a, b).
    """
    path = Path(path)
    doc = json.loads(path.read_text())
    if doc.get("version") != VERSION:
        raise FormatError(f"unsupported manifest version {doc.get('version')!r}")
    base = path.parent
    key, fields = {"images": ("entries", ("image",)),
                   "latents": ("entries", ("latent",)),
                   "pairs": ("pairs", ("a", "b"))}[kind]
    items = doc.get(key)
    if not isinstance(items, list):
        raise FormatError(f"manifest needs a '{key}' list")
    seen = set()
    for item in items:
        for f in fields:
            if f not in item:
                raise FormatError(f"manifest entry missing '{f}'")
            item[f] = str((base / item[f]).resolve()) if not Path(item[f]).is_absolute() else item[f]
        ident = tuple(item[f] for f in fields) if kind != "pairs" else item.get("id")
        if ident in seen:
            raise FormatError(f"duplicate manifest entry {ident}")
        seen.add(ident)
        if "label" in item and item["label"] not in (0, 1):
            raise FormatError(f"label must be 0 or 1, got {item['label']!r}")
    return doc


def fmt_float(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([fmt_float(v) if isinstance(v, float) or v is None else v for v in row])


def write_loss_trace(path, trace) -> None:
    write_csv(path, ("iteration", "loss"), ((i, float(v)) for i, v in enumerate(trace)))
