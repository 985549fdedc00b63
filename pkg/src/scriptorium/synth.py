"""Synthetic handwritten-ish line image generator.

Each character is stamped from a built-in bitmap glyph after a small
random affine distortion (rotation, shear), with baseline wobble along
the line and Gaussian pixel noise on the final image. Every line is a
pure function of (line text, style seed, style), so datasets are
reproducible byte for byte.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np

from .errors import UnknownSymbol
from .fonts import GLYPH_HEIGHT, GLYPH_WIDTH, GLYPHS


@dataclass(frozen=True)
class SynthStyle:
    rotation_deg: float = 5.0    # per-character rotation bound
    shear: float = 0.15          # per-character shear bound
    wobble_px: float = 2.0       # baseline drift amplitude
    noise_sigma: float = 0.03    # Gaussian pixel noise, <= 0.05
    ink_low: float = 0.75        # per-character ink darkness range
    ink_high: float = 1.0

    def clean(self) -> "SynthStyle":
        return replace(self, rotation_deg=0.0, shear=0.0, wobble_px=0.0, noise_sigma=0.0)


def line_seed(text: str, style_seed: int) -> int:
    digest = hashlib.sha256(f"{style_seed}|{text}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def _affine_sample(glyph: np.ndarray, rotation: float, shear: float) -> np.ndarray:
    """Inverse-mapped bilinear affine warp around the glyph center."""
    h, w = glyph.shape
    cos, sin = np.cos(rotation), np.sin(rotation)
    # forward map: rotate then shear x by y
    fwd = np.array([[cos, -sin], [sin, cos]]) @ np.array([[1.0, shear], [0.0, 1.0]])
    inv = np.linalg.inv(fwd)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    ys, xs = np.mgrid[0:h, 0:w]
    rel = np.stack([ys - cy, xs - cx])  # (2, h, w), row/col order
    src = np.tensordot(inv, rel, axes=(1, 0))
    sy, sx = src[0] + cy, src[1] + cx
    y0 = np.floor(sy).astype(int)
    x0 = np.floor(sx).astype(int)
    fy, fx = sy - y0, sx - x0

    def at(yy, xx):
        valid = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        return np.where(valid, glyph[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)], 0.0)

    return ((1 - fy) * (1 - fx) * at(y0, x0) + (1 - fy) * fx * at(y0, x0 + 1)
            + fy * (1 - fx) * at(y0 + 1, x0) + fy * fx * at(y0 + 1, x0 + 1))


def char_cell_width(height: int) -> int:
    scale = max(1, height // 16)
    return (GLYPH_WIDTH + 1) * scale


def line_width(text: str, height: int) -> int:
    return 2 * _margin(height) + max(1, len(text)) * char_cell_width(height)


def _margin(height: int) -> int:
    return height // 8


def render_line(
    text: str,
    style_seed: int,
    height: int = 64,
    style: SynthStyle = SynthStyle(),
) -> np.ndarray:
    """Render one text line to a grayscale image (white 1.0, ink dark).

    Deterministic for a given (text, style_seed, height, style).
    """
    for pos, char in enumerate(text):
        if char not in GLYPHS:
            raise UnknownSymbol(char, pos)
    rng = np.random.default_rng(line_seed(text, style_seed))
    scale = max(1, height // 16)
    cell = char_cell_width(height)
    margin = _margin(height)
    width = line_width(text, height)
    ink = np.zeros((height, width))

    glyph_h = GLYPH_HEIGHT * scale
    top = (height - glyph_h) // 2
    phase = rng.uniform(0, 2 * np.pi)
    for pos, char in enumerate(text):
        glyph = np.kron(GLYPHS[char], np.ones((scale, scale)))
        rotation = np.deg2rad(rng.uniform(-style.rotation_deg, style.rotation_deg))
        shear = rng.uniform(-style.shear, style.shear)
        if rotation or shear:
            glyph = _affine_sample(glyph, rotation, shear)
        darkness = rng.uniform(style.ink_low, style.ink_high)
        wobble = style.wobble_px * np.sin(phase + 0.7 * pos) + rng.uniform(-0.5, 0.5)
        y = int(round(top + wobble))
        y = max(0, min(height - glyph_h, y))
        x = margin + pos * cell
        region = ink[y:y + glyph_h, x:x + glyph.shape[1]]
        np.maximum(region, glyph[: region.shape[0], : region.shape[1]] * darkness, out=region)

    image = 1.0 - ink
    if style.noise_sigma > 0:
        image = image + rng.normal(0.0, style.noise_sigma, size=image.shape)
    return np.clip(image, 0.0, 1.0)


def save_png(image: np.ndarray, path) -> None:
    from PIL import Image

    data = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path, format="PNG")


def load_png(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as img:
        return np.asarray(img.convert("L"), dtype=np.float64) / 255.0
