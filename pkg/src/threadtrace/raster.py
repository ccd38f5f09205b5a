"""Core raster types and bit-exact file I/O.

Conventions used throughout the package: row-major arrays indexed [y, x],
top-left origin, x rightward, y downward. Gradient maps hold values in
[0, 1]; a value of 0 means background. The thread arclength parameter
s in [0, 1] is stored affinely remapped to [0.1, 1.0] so that 0 stays an
unambiguous background sentinel.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import MapFormatError

# Remap of the thread parameter into stored gradient-map values.
PARAM_OFFSET = 0.1
PARAM_SCALE = 0.9

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def remap_param(s):
    """Map a thread parameter s in [0,1] to its stored gradient value."""
    return PARAM_OFFSET + PARAM_SCALE * np.asarray(s, dtype=np.float64)


def unremap_value(v):
    """Invert :func:`remap_param`. Not meaningful on background pixels."""
    return (np.asarray(v, dtype=np.float64) - PARAM_OFFSET) / PARAM_SCALE


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class GradientMap:
    """Scalar raster in [0,1]; thread pixels carry the remapped parameter."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"gradient map must be a non-empty 2-D field, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("gradient map contains non-finite values")
        if v.min() < 0.0 or v.max() > 1.0:
            raise ValueError(
                f"gradient map values must lie in [0,1], got range [{v.min()}, {v.max()}]"
            )
        object.__setattr__(self, "values", _freeze(v))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


class OverlapLabel(IntEnum):
    BACKGROUND = 0
    NON_OVERLAP = 1
    OVERLAP = 2


@dataclass(frozen=True)
class OverlapMap:
    """Three-class raster: background / single-pass thread / overlapping thread."""

    labels: np.ndarray

    def __post_init__(self):
        lab = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if lab.ndim != 2:
            raise ValueError(f"overlap map must be 2-D, got shape {lab.shape}")
        if lab.max(initial=0) > 2:
            raise ValueError("overlap labels must be in {0, 1, 2}")
        object.__setattr__(self, "labels", _freeze(lab))

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]


@dataclass(frozen=True)
class BinaryMask:
    bits: np.ndarray

    def __post_init__(self):
        b = np.ascontiguousarray(self.bits, dtype=bool)
        if b.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {b.shape}")
        object.__setattr__(self, "bits", _freeze(b))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]


@dataclass(frozen=True)
class Polyline:
    """Ordered sub-pixel points, optionally carrying a per-point parameter."""

    points: np.ndarray
    params: np.ndarray | None = None

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64).reshape(-1, 2)
        if not np.all(np.isfinite(pts)):
            raise ValueError("polyline coordinates must be finite")
        object.__setattr__(self, "points", _freeze(pts))
        if self.params is not None:
            par = np.ascontiguousarray(self.params, dtype=np.float64)
            if par.shape != (len(pts),):
                raise ValueError("one parameter per point required")
            object.__setattr__(self, "params", _freeze(par))

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class SceneGroundTruth:
    """Exact ground truth for one synthetic scene."""

    control_points: np.ndarray
    occluded_flags: np.ndarray
    gradient: GradientMap
    overlap: OverlapMap
    mask: BinaryMask
    centerline: Polyline
    thread_width: float = field(default=4.0)

    def __post_init__(self):
        cp = np.ascontiguousarray(self.control_points, dtype=np.float64).reshape(-1, 2)
        occ = np.ascontiguousarray(self.occluded_flags, dtype=bool)
        if occ.shape != (len(cp),):
            raise ValueError("one occlusion flag per control point required")
        if self.centerline.params is None:
            raise ValueError("centerline must carry per-point parameters")
        if len(self.centerline) and not np.all(np.diff(self.centerline.params) > 0):
            raise ValueError("centerline parameters must be strictly increasing")
        dims = (self.gradient.height, self.gradient.width)
        if (self.overlap.height, self.overlap.width) != dims or (self.mask.height, self.mask.width) != dims:
            raise ValueError("gradient/overlap/mask dimensions must agree")
        object.__setattr__(self, "control_points", _freeze(cp))
        object.__setattr__(self, "occluded_flags", _freeze(occ))


def _check_png_header(data: bytes, bit_depth: int, kind: str) -> None:
    if len(data) < 26 or data[:8] != _PNG_SIGNATURE:
        raise MapFormatError(f"{kind} file is not a PNG image")
    if data[24] != bit_depth:
        raise MapFormatError(
            f"{kind} file must be {bit_depth}-bit, got bit depth {data[24]}"
        )
    if data[25] != 0:
        raise MapFormatError(
            f"{kind} file must be single-channel grayscale, got PNG color type {data[25]}"
        )


def decode_gradient_map(data: bytes) -> GradientMap:
    """Decode a 16-bit single-channel PNG into a GradientMap.

    The stored integer k maps to the value k / 65535 exactly.
    """
    _check_png_header(data, 16, "gradient map")
    try:
        img = Image.open(io.BytesIO(data))
        raw = np.array(img)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise MapFormatError(f"gradient map PNG could not be decoded: {exc}") from exc
    return GradientMap(raw.astype(np.float64) / 65535.0)


def encode_gradient_map(gmap: GradientMap) -> bytes:
    """Encode a GradientMap as a canonical 16-bit grayscale PNG.

    Values are quantized to the nearest 16-bit integer; decoding the result
    reproduces each value within 1/65535, and re-encoding a decoded file
    reproduces it byte-exactly.
    """
    stored = np.rint(gmap.values * 65535.0).astype(np.uint16)
    buf = io.BytesIO()
    Image.fromarray(stored).save(buf, format="PNG")
    return buf.getvalue()


def decode_overlap_map(data: bytes) -> OverlapMap:
    """Decode an 8-bit single-channel PNG with values {0,1,2}."""
    _check_png_header(data, 8, "overlap map")
    try:
        raw = np.array(Image.open(io.BytesIO(data)))
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise MapFormatError(f"overlap map PNG could not be decoded: {exc}") from exc
    if raw.max(initial=0) > 2:
        raise MapFormatError(
            f"overlap map values must be in {{0,1,2}}, got maximum {int(raw.max())}"
        )
    return OverlapMap(raw.astype(np.uint8))


def encode_overlap_map(omap: OverlapMap) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(omap.labels.astype(np.uint8)).save(buf, format="PNG")
    return buf.getvalue()


def resize_bilinear(values: np.ndarray, target_w: int, target_h: int) -> np.ndarray:
    """Resize a scalar field with corner-aligned bilinear interpolation.

    Identical dimensions return the input unchanged; the output range never
    leaves [min(input), max(input)].
    """
    if target_w <= 0 or target_h <= 0:
        raise ValueError(f"target dimensions must be positive, got {target_w}x{target_h}")
    src = np.asarray(values, dtype=np.float64)
    h, w = src.shape
    if (w, h) == (target_w, target_h):
        return src.copy()

    def axis_coords(n_src: int, n_dst: int) -> np.ndarray:
        if n_dst == 1:
            return np.full(1, (n_src - 1) / 2.0)
        return np.arange(n_dst) * (n_src - 1) / (n_dst - 1)

    xs = axis_coords(w, target_w)
    ys = axis_coords(h, target_h)
    x0 = np.clip(np.floor(xs).astype(int), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(ys).astype(int), 0, max(h - 2, 0))
    fx = xs - x0
    fy = ys - y0
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)

    top = src[np.ix_(y0, x0)] * (1 - fx) + src[np.ix_(y0, x1)] * fx
    bot = src[np.ix_(y1, x0)] * (1 - fx) + src[np.ix_(y1, x1)] * fx
    return top * (1 - fy[:, None]) + bot * fy[:, None]


def ground_truth_to_json(gt: SceneGroundTruth) -> str:
    """Serialize ground truth to its JSON schema (deterministic formatting)."""
    doc = {
        "width": gt.gradient.width,
        "height": gt.gradient.height,
        "control_points": [[float(x), float(y)] for x, y in gt.control_points],
        "occluded": [bool(f) for f in gt.occluded_flags],
        "centerline": [
            [float(x), float(y), float(s)]
            for (x, y), s in zip(gt.centerline.points, gt.centerline.params)
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def ground_truth_from_json(
    text: str,
    gradient: GradientMap,
    overlap: OverlapMap,
    mask: BinaryMask,
    thread_width: float,
) -> SceneGroundTruth:
    doc = json.loads(text)
    centerline = np.asarray(doc["centerline"], dtype=np.float64).reshape(-1, 3)
    return SceneGroundTruth(
        control_points=np.asarray(doc["control_points"], dtype=np.float64).reshape(-1, 2),
        occluded_flags=np.asarray(doc["occluded"], dtype=bool),
        gradient=gradient,
        overlap=overlap,
        mask=mask,
        centerline=Polyline(centerline[:, :2], centerline[:, 2]),
        thread_width=thread_width,
    )


def read_gradient_map(path: str | Path) -> GradientMap:
    return decode_gradient_map(Path(path).read_bytes())


def write_gradient_map(path: str | Path, gmap: GradientMap) -> None:
    Path(path).write_bytes(encode_gradient_map(gmap))


def read_overlap_map(path: str | Path) -> OverlapMap:
    return decode_overlap_map(Path(path).read_bytes())


def write_overlap_map(path: str | Path, omap: OverlapMap) -> None:
    Path(path).write_bytes(encode_overlap_map(omap))
