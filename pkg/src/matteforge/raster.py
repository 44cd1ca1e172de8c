"""Core raster types, the compositing equation and PNG I/O.

Raster values travel as float64 numpy arrays:

* ``ImageRGB``   -- shape (H, W, 3), channel values in [0, 1]
* ``AlphaMatte`` -- shape (H, W), values in [0, 1]
* ``BinaryMask`` -- shape (H, W), dtype bool
* ``Trimap`` / ``GuidanceMap`` -- shape (H, W), values in {0, 0.5, 1}
  (background / unknown / foreground)

On disk everything is 8-bit PNG: grayscale for mattes and three-valued
maps (palette {0, 128, 255} for trimaps and guidance), RGB for images.
Reals become bytes with round-half-up, ``floor(v * 255 + 0.5)``; bytes
become reals as ``v / 255`` except that the trimap palette decodes to
exact {0, 0.5, 1}.
"""

import io
import os
import tempfile

import numpy as np
from PIL import Image

from .errors import FormatError, PaletteError, ShapeMismatchError

TRIMAP_PALETTE = (0, 128, 255)

__all__ = [
    "TRIMAP_PALETTE",
    "as_alpha",
    "as_image",
    "as_mask",
    "as_trimap",
    "composite",
    "byte_quantize",
    "decode_map",
    "encode_map",
    "decode_image",
    "encode_image",
    "read_map",
    "write_map",
    "read_image",
    "write_image",
    "atomic_write_bytes",
]


def as_alpha(data) -> np.ndarray:
    """Validate and return a (H, W) float64 alpha matte in [0, 1]."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise FormatError(f"alpha matte must be 2-D, got shape {arr.shape}")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise FormatError("alpha matte values must lie in [0, 1]")
    return arr


def as_image(data) -> np.ndarray:
    """Validate and return a (H, W, 3) float64 RGB image in [0, 1]."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise FormatError(f"RGB image must have shape (H, W, 3), got {arr.shape}")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise FormatError("image channel values must lie in [0, 1]")
    return arr


def as_mask(data) -> np.ndarray:
    """Validate and return a (H, W) boolean mask."""
    arr = np.asarray(data)
    if arr.ndim != 2:
        raise FormatError(f"binary mask must be 2-D, got shape {arr.shape}")
    if arr.dtype != np.bool_:
        vals = np.unique(arr)
        if not np.all(np.isin(vals, (0, 1))):
            raise FormatError("binary mask values must be in {0, 1}")
        arr = arr.astype(bool)
    return arr


def as_trimap(data) -> np.ndarray:
    """Validate a three-valued {0, 0.5, 1} map; report the first offender."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise FormatError(f"trimap must be 2-D, got shape {arr.shape}")
    bad = (arr != 0.0) & (arr != 0.5) & (arr != 1.0)
    if bad.any():
        flat = int(np.flatnonzero(bad)[0])
        y, x = divmod(flat, arr.shape[1])
        raise PaletteError(x, y, float(arr[y, x]))
    return arr


def _require_same_shape(name, reference, candidate):
    if reference.shape[:2] != candidate.shape[:2]:
        raise ShapeMismatchError(name, reference.shape[:2], candidate.shape[:2])


_SPLITTER = 134217729.0  # 2**27 + 1, Dekker splitting constant


def _two_prod(x, y):
    """x * y as (rounded product, exact residual), Dekker's algorithm."""
    p = x * y
    cx = _SPLITTER * x
    xh = cx - (cx - x)
    xl = x - xh
    cy = _SPLITTER * y
    yh = cy - (cy - y)
    yl = y - yh
    e = ((xh * yh - p) + xh * yl + xl * yh) + xl * yl
    return p, e


def _two_sum(x, y):
    """x + y as (rounded sum, exact residual), Knuth's branch-free form."""
    s = x + y
    b = s - x
    e = (x - (s - b)) + (y - b)
    return s, e


def composite(fg, bg, alpha) -> np.ndarray:
    """Blend foreground over background through an alpha matte.

    Per pixel and channel: ``out = alpha * fg + (1 - alpha) * bg``,
    clamped to [0, 1]. Evaluated as ``alpha*fg + bg - alpha*bg`` with
    compensated float64 products and sums, so each output pixel is
    within 1 ulp of the exact real-arithmetic result on any platform.
    """
    fg = as_image(fg)
    bg = as_image(bg)
    alpha = as_alpha(alpha)
    _require_same_shape("bg", fg, bg)
    _require_same_shape("alpha", fg, alpha)
    a = np.broadcast_to(alpha[..., None], fg.shape)
    p1, e1 = _two_prod(a, fg)
    p2, e2 = _two_prod(a, bg)
    s, c = _two_sum(p1, bg)
    for term in (-p2, e1, -e2):
        s, e = _two_sum(s, term)
        c = c + e
    return np.clip(s + c, 0.0, 1.0)


def byte_quantize(arr) -> np.ndarray:
    """Map reals in [0, 1] to uint8 with round-half-up."""
    return np.floor(np.asarray(arr, dtype=np.float64) * 255.0 + 0.5).astype(np.uint8)


def _open_png(data) -> Image.Image:
    if isinstance(data, (bytes, bytearray)):
        return Image.open(io.BytesIO(data))
    return Image.open(data)


def decode_map(data, kind: str = "alpha") -> np.ndarray:
    """Decode an 8-bit grayscale PNG into a matte or trimap.

    kind="alpha": byte v maps to v / 255.
    kind="trimap": bytes must be in {0, 128, 255}, mapped to {0, 0.5, 1};
    anything else raises :class:`PaletteError` naming the first bad pixel.
    """
    img = _open_png(data)
    if img.mode != "L":
        raise FormatError(f"expected 8-bit grayscale PNG, got mode {img.mode!r}")
    arr = np.asarray(img, dtype=np.uint8)
    if kind == "alpha":
        return arr.astype(np.float64) / 255.0
    if kind == "trimap":
        bad = (arr != 0) & (arr != 128) & (arr != 255)
        if bad.any():
            flat = int(np.flatnonzero(bad)[0])
            y, x = divmod(flat, arr.shape[1])
            raise PaletteError(x, y, int(arr[y, x]))
        out = np.empty(arr.shape, dtype=np.float64)
        out[arr == 0] = 0.0
        out[arr == 128] = 0.5
        out[arr == 255] = 1.0
        return out
    raise ValueError(f"unknown map kind {kind!r}")


def encode_map(arr) -> bytes:
    """Encode a matte / trimap / guidance map as 8-bit grayscale PNG bytes."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise FormatError(f"map must be 2-D, got shape {arr.shape}")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise FormatError("map values must lie in [0, 1]")
    buf = io.BytesIO()
    Image.fromarray(byte_quantize(arr), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def decode_image(data) -> np.ndarray:
    """Decode an 8-bit RGB PNG into a (H, W, 3) float64 image in [0, 1]."""
    img = _open_png(data)
    if img.mode != "RGB":
        raise FormatError(f"expected 8-bit RGB PNG, got mode {img.mode!r}")
    return np.asarray(img, dtype=np.uint8).astype(np.float64) / 255.0


def encode_image(arr) -> bytes:
    """Encode a (H, W, 3) image in [0, 1] as 8-bit RGB PNG bytes."""
    arr = as_image(arr)
    buf = io.BytesIO()
    Image.fromarray(byte_quantize(arr), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def atomic_write_bytes(path, payload: bytes) -> None:
    """Write bytes via a temp file and rename, so failures leave no partial file."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_map(path, kind: str = "alpha") -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_map(fh.read(), kind=kind)


def write_map(path, arr) -> None:
    atomic_write_bytes(path, encode_map(arr))


def read_image(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_image(fh.read())


def write_image(path, arr) -> None:
    atomic_write_bytes(path, encode_image(arr))
