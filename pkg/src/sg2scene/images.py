"""PNG encoding helpers; all encodes are byte-deterministic."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image

from .config import ToyWorldConfig
from .vocab import ClassVocab


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.clip(np.asarray(image) * 255.0 + 0.5, 0, 255).astype(np.uint8)


def png_bytes(image: np.ndarray) -> bytes:
    """8-bit RGB PNG of an (H, W, 3) float image in [0, 1]."""
    buf = io.BytesIO()
    Image.fromarray(to_uint8(image), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def save_png(path: str | Path, image: np.ndarray) -> None:
    Path(path).write_bytes(png_bytes(image))


def load_png(path: str | Path) -> np.ndarray:
    arr = np.asarray(Image.open(path).convert("RGB"), dtype=np.float64)
    return arr / 255.0


def class_palette(cv: ClassVocab, toy_cfg: ToyWorldConfig = ToyWorldConfig()) -> np.ndarray:
    """Static class->RGB palette (uint8), shared by service and reports."""
    toy_cfg.require_classes(cv.classes)
    return to_uint8(np.array([toy_cfg.colors[name] for name in cv.classes]))


def indexed_png_bytes(class_map: np.ndarray, palette: np.ndarray) -> bytes:
    """8-bit indexed PNG of an (H, W) class-id map under the given palette."""
    img = Image.fromarray(class_map.astype(np.uint8), mode="P")
    pal = np.zeros((256, 3), dtype=np.uint8)
    pal[: len(palette)] = palette
    img.putpalette(pal.ravel().tolist())
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def image_grid(rows: list[list[np.ndarray]], pad: int = 2) -> np.ndarray:
    """Stack equally sized (H, W, 3) panels into one grid image."""
    h, w = rows[0][0].shape[:2]
    grid_h = len(rows) * (h + pad) - pad
    grid_w = len(rows[0]) * (w + pad) - pad
    out = np.ones((grid_h, grid_w, 3))
    for r, row in enumerate(rows):
        for c, panel in enumerate(row):
            y, x = r * (h + pad), c * (w + pad)
            out[y : y + h, x : x + w] = panel
    return out
