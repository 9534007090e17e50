"""Pin compositing: stamp a numbered marker onto a screen frame at a
comment's coordinates.

Rendering is a pure function of its inputs. The numeral is drawn with a
tiny built-in pixel font (no system fonts involved), so identical inputs
produce byte-identical PNG output on every run. The numeral sits in the
upper half of the marker, which keeps the exact anchor pixel in the fill
colour: that pixel is the coordinate being pointed at.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

from PIL import Image, ImageDraw

PIN_RADIUS = 12
PIN_BORDER_WIDTH = 2
PIN_FILL = (230, 57, 70, 255)
PIN_BORDER = (255, 255, 255, 255)
PIN_TEXT = (255, 255, 255, 255)

# 3x5 digit bitmaps, row-major, one string per row.
_DIGITS = {
    "0": ("111", "101", "101", "101", "111"),
    "1": ("010", "110", "010", "010", "111"),
    "2": ("111", "001", "111", "100", "111"),
    "3": ("111", "001", "111", "001", "111"),
    "4": ("101", "101", "111", "001", "001"),
    "5": ("111", "100", "111", "001", "111"),
    "6": ("111", "100", "111", "101", "111"),
    "7": ("111", "001", "010", "010", "010"),
    "8": ("111", "101", "111", "101", "111"),
    "9": ("111", "101", "111", "001", "111"),
}
_DIGIT_W = 3
_DIGIT_H = 5


@dataclass
class RenderedPinImage:
    pixels: Image.Image
    pin_center: tuple[int, int]
    clamped: bool
    index: int

    def png_bytes(self) -> bytes:
        buf = io.BytesIO()
        self.pixels.save(buf, format="PNG")
        return buf.getvalue()


def clamp_coordinate(x: float, y: float, width: int, height: int) -> tuple[tuple[int, int], bool]:
    """Snap (x, y) to the nearest in-bounds pixel.

    The flag reports whether the original coordinate fell outside
    [0, width) x [0, height); design tools allow comments off-frame.
    """
    clamped = not (0 <= x < width and 0 <= y < height)
    cx = min(max(int(round(x)), 0), width - 1)
    cy = min(max(int(round(y)), 0), height - 1)
    return (cx, cy), clamped


def _draw_numeral(img: Image.Image, cx: int, cy: int, index: int) -> None:
    text = str(index)
    total_w = len(text) * (_DIGIT_W + 1) - 1
    x0 = cx - total_w // 2
    y0 = cy - 9  # rows cy-9 .. cy-5, always above the anchor pixel
    px = img.load()
    w, h = img.size
    for pos, ch in enumerate(text):
        rows = _DIGITS[ch]
        for dy, row in enumerate(rows):
            for dx, bit in enumerate(row):
                if bit != "1":
                    continue
                x = x0 + pos * (_DIGIT_W + 1) + dx
                y = y0 + dy
                if 0 <= x < w and 0 <= y < h:
                    px[x, y] = PIN_TEXT


def render_pin(frame_image: Image.Image, x: float, y: float, index: int) -> RenderedPinImage:
    """Composite pin number ``index`` onto a copy of ``frame_image``.

    The marker is a filled circle (radius 12 px, 2 px contrasting border)
    centred on the clamped coordinate, with the index numeral inside it.
    """
    if index < 1:
        raise ValueError("pin index is 1-based")
    w, h = frame_image.size
    if w < 1 or h < 1:
        raise ValueError("frame image must be at least 1x1")

    img = frame_image.convert("RGBA")
    (cx, cy), clamped = clamp_coordinate(x, y, w, h)

    draw = ImageDraw.Draw(img)
    draw.ellipse(
        [cx - PIN_RADIUS, cy - PIN_RADIUS, cx + PIN_RADIUS, cy + PIN_RADIUS],
        fill=PIN_FILL,
        outline=PIN_BORDER,
        width=PIN_BORDER_WIDTH,
    )
    _draw_numeral(img, cx, cy, index)

    return RenderedPinImage(pixels=img, pin_center=(cx, cy), clamped=clamped, index=index)
