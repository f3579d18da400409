"""Image and report serialization.

Images travel in two families of formats:

* portable graymaps, ASCII (P2) and binary (P5).  Writes clamp to [0, 1]
  and quantize to maxval 255, so they are display formats; reads rescale
  by 1/maxval (two-byte big-endian samples for maxval > 255).
* a raw float container for unclamped observed images: the ASCII magic
  line ``F64IMG1``, a ``width height`` line, then width*height
  little-endian float64 values row-major.  Round trips are bit exact.

Run reports serialize to canonical JSON (sorted keys), so
serialize -> parse -> serialize is a fixed point.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import as_image

__all__ = [
    "ImageFormatError",
    "read_image",
    "write_image",
    "RunReport",
    "report_to_json",
    "report_from_json",
    "BenchRecord",
]

_F64_MAGIC = b"F64IMG1\n"


class ImageFormatError(ValueError):
    """Malformed or unsupported image file content."""


def _tokens(data: bytes):
    """Whitespace-separated header tokens with # comments stripped."""
    pos = 0
    while pos < len(data):
        ch = data[pos:pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
        else:
            end = pos
            while end < len(data) and not data[end:end + 1].isspace():
                end += 1
            yield pos, data[pos:end]
            pos = end


def _read_pgm(data: bytes) -> np.ndarray:
    toks = _tokens(data)
    try:
        _, magic = next(toks)
        hdr = [next(toks) for _ in range(3)]
    except StopIteration:
        raise ImageFormatError("truncated graymap header") from None
    try:
        width, height, maxval = (int(t) for _, t in hdr)
    except ValueError:
        raise ImageFormatError("graymap header fields must be integers") from None
    if width < 1 or height < 1:
        raise ImageFormatError("graymap dimensions must be positive")
    if not 0 < maxval < 65536:
        raise ImageFormatError(f"graymap maxval {maxval} out of range")
    if magic == b"P2":
        vals = []
        for _, tok in toks:
            try:
                vals.append(int(tok))
            except ValueError:
                raise ImageFormatError(f"bad sample {tok!r}") from None
        if len(vals) != width * height:
            raise ImageFormatError(
                f"expected {width * height} samples, found {len(vals)}"
            )
        arr = np.array(vals, dtype=np.float64)
    else:  # P5: exactly one whitespace byte after maxval, then raw samples
        maxval_pos, maxval_tok = hdr[2]
        payload = data[maxval_pos + len(maxval_tok) + 1:]
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        expect = width * height * dtype.itemsize
        if len(payload) != expect:
            raise ImageFormatError(
                f"expected {expect} payload bytes, found {len(payload)}"
            )
        arr = np.frombuffer(payload, dtype=dtype).astype(np.float64)
    if np.any(arr < 0) or np.any(arr > maxval):
        raise ImageFormatError("graymap samples exceed maxval")
    return (arr / maxval).reshape(height, width)


def _read_f64(data: bytes) -> np.ndarray:
    body = data[len(_F64_MAGIC):]
    nl = body.find(b"\n")
    if nl < 0:
        raise ImageFormatError("missing dimensions line")
    try:
        width, height = (int(t) for t in body[:nl].split())
    except ValueError:
        raise ImageFormatError("bad dimensions line") from None
    if width < 1 or height < 1:
        raise ImageFormatError("dimensions must be positive")
    payload = body[nl + 1:]
    expect = width * height * 8
    if len(payload) < expect:
        raise ImageFormatError("truncated payload")
    if len(payload) > expect:
        raise ImageFormatError("trailing bytes after payload")
    arr = np.frombuffer(payload, dtype="<f8").reshape(height, width)
    return arr.astype(np.float64)


def read_image(path) -> np.ndarray:
    """Read a graymap or raw float image; the format is sniffed by magic."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data.startswith(_F64_MAGIC):
        return _read_f64(data)
    if data[:2] in (b"P2", b"P5"):
        return _read_pgm(data)
    raise ImageFormatError(f"unrecognized image magic {data[:8]!r}")


def write_image(path, img, fmt: str | None = None) -> None:
    """Write ``img`` as "p2", "p5", or "f64".

    When ``fmt`` is omitted, ``.pgm`` paths get binary graymaps and
    everything else the raw float container.
    """
    img = as_image(img)
    if fmt is None:
        fmt = "p5" if str(path).lower().endswith(".pgm") else "f64"
    fmt = fmt.lower()
    height, width = img.shape
    if fmt == "f64":
        arr = np.ascontiguousarray(img, dtype="<f8")
        with open(path, "wb") as fh:
            fh.write(_F64_MAGIC)
            fh.write(f"{width} {height}\n".encode("ascii"))
            fh.write(arr.tobytes(order="C"))
        return
    quant = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    if fmt == "p5":
        with open(path, "wb") as fh:
            fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
            fh.write(quant.tobytes(order="C"))
    elif fmt == "p2":
        lines = [f"P2\n{width} {height}\n255"]
        lines.extend(" ".join(str(v) for v in row) for row in quant)
        with open(path, "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")
    else:
        raise ValueError(f"unknown image format {fmt!r}")


@dataclass
class RunReport:
    """One segmentation run: configuration echo, trace, and outcomes."""

    config: dict
    mode: str
    sweeps: list = field(default_factory=list)
    final_distance: float = 0.0
    dsc: float | None = None
    elapsed_seconds: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def report_to_json(report: RunReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"


def report_from_json(text: str) -> RunReport:
    obj = json.loads(text)
    return RunReport(
        config=obj["config"],
        mode=obj["mode"],
        sweeps=obj["sweeps"],
        final_distance=obj["final_distance"],
        dsc=obj["dsc"],
        elapsed_seconds=obj["elapsed_seconds"],
    )


@dataclass(frozen=True)
class BenchRecord:
    """One benchmark cell: total seconds for a patch-wise pass.

    Derived columns (per-window time and its ratios to powers of the
    patch length) are recomputed from ``total_seconds`` and ``windows``,
    never stored.  ``windows_timed`` records how many windows were
    actually measured when subsampling; the total is extrapolated.
    """

    mode: str
    patch_len: int
    total_seconds: float
    windows: int
    windows_timed: int

    @property
    def per_window(self) -> float:
        return self.total_seconds / self.windows

    def ratio(self, power: int) -> float:
        return self.per_window / self.patch_len**power

    def csv_row(self) -> list:
        t1 = self.per_window / 1e-5  # per-window time in 1e-5 s units
        return [
            self.mode,
            self.patch_len,
            f"{self.total_seconds:.6f}",
            self.windows,
            f"{t1:.3f}",
            f"{t1 / self.patch_len:.3f}",
            f"{t1 / self.patch_len**2:.4f}",
            f"{t1 / self.patch_len**3:.5f}",
            f"{t1 / self.patch_len**4:.6f}",
        ]


BENCH_CSV_HEADER = ["mode", "L", "T", "N", "T1", "T1/L", "T1/L2", "T1/L3",
                    "T1/L4"]
