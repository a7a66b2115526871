"""Binary PPM (P6) / PGM (P5) frame files."""

import re

import cv2
import numpy as np

from strl.utils.errors import FrameLoadError

_HEADER = re.compile(rb'^(P[56])\s+(?:#[^\n]*\s+)*(\d+)\s+(?:#[^\n]*\s+)*(\d+)\s+(?:#[^\n]*\s+)*(\d+)\s')


def read_pixmap(path):
    """
    Read a binary 8-bit pixmap.

    Args:
        path: File path (P6 colour or P5 gray, maxval 255)

    Returns:
        np.ndarray: uint8 array of shape (H, W, 3) in RGB order; gray files
        are replicated to three channels

    Raises:
        FrameLoadError: Malformed header or payload size mismatch
    """
    try:
        with open(path, 'rb') as f:
            raw = f.read()
    except OSError as e:
        raise FrameLoadError(f"{path}: cannot read frame ({e})") from None

    match = _HEADER.match(raw)
    if not match:
        raise FrameLoadError(f"{path}: malformed pixmap header")

    magic, width, height, maxval = match.group(1), *(int(g) for g in match.groups()[1:])
    if maxval != 255:
        raise FrameLoadError(f"{path}: only maxval 255 is supported, got {maxval}")
    if width <= 0 or height <= 0:
        raise FrameLoadError(f"{path}: invalid size {width}x{height}")

    channels = 3 if magic == b'P6' else 1
    payload = len(raw) - match.end()
    expected = width * height * channels
    if payload != expected:
        raise FrameLoadError(
            f"{path}: header declares {width}x{height}x{channels} ({expected} bytes) "
            f"but payload has {payload} bytes"
        )

    image = cv2.imdecode(np.frombuffer(raw, dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if image is None:
        raise FrameLoadError(f"{path}: could not decode pixmap")

    if image.ndim == 2:
        return np.repeat(image[:, :, None], 3, axis=2)
    return cv2.cvtColor(image, cv2.COLOR_BGR2RGB)


def write_pixmap(path, image):
    """
    Write an 8-bit image as binary PPM (3 channels) or PGM (2-D).

    Args:
        path: Destination ending in .ppm or .pgm
        image: uint8 array (H, W, 3) RGB or (H, W)
    """
    image = np.ascontiguousarray(image, dtype=np.uint8)
    if image.ndim == 3:
        ext, data = '.ppm', cv2.cvtColor(image, cv2.COLOR_RGB2BGR)
    else:
        ext, data = '.pgm', image

    ok, encoded = cv2.imencode(ext, data, [cv2.IMWRITE_PXM_BINARY, 1])
    if not ok:
        raise FrameLoadError(f"{path}: could not encode pixmap")
    with open(path, 'wb') as f:
        f.write(encoded.tobytes())
