"""Deterministic toy target domain.

Stands in for real street imagery: a renderer that turns a semantic map into
an image of per-class base colors plus mild procedural texture and seeded
noise, and the matching nearest-color "oracle segmenter" that inverts it at
well over 99% pixel accuracy. Also defines the deterministic per-node box and
mask targets used to train the processor at desk scale; object box size is a
fixed decreasing function of the depth bin, which is what makes the
nearer-is-bigger manipulation measurable.
"""

from __future__ import annotations

import numpy as np

from .compose import compose_layout
from .config import ToyWorldConfig
from .derivation import DerivedTargets
from .graph import SceneGraph
from .validation import check_image_batch, check_semantic_map
from .vocab import ClassVocab, GridSpec

OBJECT_SIZE_MIN = 0.08
OBJECT_SIZE_MAX = 0.42
OBJECT_ASPECT = {
    "person": (0.40, 1.35),
    "car": (1.55, 0.80),
    "bus": (1.95, 1.05),
    "truck": (1.80, 1.15),
}
BACKGROUND_BOXES = {
    "sky": (0.5, 0.21, 1.0, 0.42),
    "road": (0.5, 0.78, 1.0, 0.44),
    "sidewalk": (0.5, 0.60, 1.0, 0.12),
}


def render_toy_target(semantic_map: np.ndarray, cfg: ToyWorldConfig, cv: ClassVocab) -> np.ndarray:
    """(H, W) class map -> (H, W, 3) image in [0, 1]; bytes depend only on
    the map, the config, and the config seed."""
    cfg.require_classes(cv.classes)
    sem = check_semantic_map(semantic_map, len(cv))
    h, w = sem.shape
    colors = np.array([cfg.colors[name] for name in cv.classes], dtype=np.float64)
    freqs = np.array([cfg.textures[name][0] for name in cv.classes], dtype=np.float64)
    amps = np.array([cfg.textures[name][1] for name in cv.classes], dtype=np.float64)

    ys, xs = np.mgrid[0:h, 0:w]
    xn = (xs + 0.5) / w
    yn = (ys + 0.5) / h
    freq = freqs[sem]
    texture = np.sin(2 * np.pi * freq * xn) * np.sin(2 * np.pi * freq * yn)
    image = colors[sem] + (amps[sem] * texture)[:, :, None]
    noise = np.random.default_rng(cfg.seed).normal(0.0, cfg.noise_scale, size=(h, w, 3))
    return np.clip(image + noise, 0.0, 1.0)


def oracle_segment(image: np.ndarray, cfg: ToyWorldConfig, cv: ClassVocab) -> np.ndarray:
    """Nearest-base-color class of every pixel."""
    cfg.require_classes(cv.classes)
    img = check_image_batch(image[None] if image.ndim == 3 else image)[0]
    colors = np.array([cfg.colors[name] for name in cv.classes], dtype=np.float64)
    dists = ((img[:, :, None, :] - colors[None, None, :, :]) ** 2).sum(axis=3)
    return dists.argmin(axis=2).astype(np.int64)


def oracle_pixel_accuracy(image: np.ndarray, semantic_map: np.ndarray, cfg: ToyWorldConfig, cv: ClassVocab) -> float:
    pred = oracle_segment(image, cfg, cv)
    return float((pred == semantic_map).mean())


def object_size(depth_bin: int, total_bins: int) -> float:
    """Nearer objects (lower bins) get larger boxes, linearly."""
    span = max(total_bins - 1, 1)
    return OBJECT_SIZE_MIN + (OBJECT_SIZE_MAX - OBJECT_SIZE_MIN) * (span - depth_bin) / span


def _ellipse_mask(size: int) -> np.ndarray:
    ys, xs = np.mgrid[0:size, 0:size]
    cx = cy = (size - 1) / 2
    r = size / 2 - 0.5
    return (((xs - cx) / r) ** 2 + ((ys - cy) / r) ** 2 <= 1.0).astype(np.float32)


def _disc_mask(size: int) -> np.ndarray:
    ys, xs = np.mgrid[0:size, 0:size]
    cx = cy = (size - 1) / 2
    r = 0.42 * size
    return (((xs - cx) ** 2 + (ys - cy) ** 2) <= r * r).astype(np.float32)


def toy_targets(graph: SceneGraph, cv: ClassVocab, grid: GridSpec, mask_size: int = 32) -> DerivedTargets:
    """Deterministic per-node training targets from node attributes alone."""
    boxes = np.zeros((len(graph.nodes), 4), dtype=np.float32)
    masks = np.zeros((len(graph.nodes), mask_size, mask_size), dtype=np.float32)
    for i, node in enumerate(graph.nodes):
        name = cv.class_name(node.object_class)
        cx, cy = grid.cell_center(node.cell)
        if name in BACKGROUND_BOXES:
            boxes[i] = BACKGROUND_BOXES[name]
            masks[i] = 1.0
        elif name == "tree":
            boxes[i] = (cx, 0.42, 0.24, 0.46)
            masks[i] = _disc_mask(mask_size)
        elif name == "building":
            boxes[i] = (cx, 0.34, 0.30, 0.52)
            masks[i] = 1.0
        else:
            s = object_size(node.depth_bin, grid.depth_bins)
            w_mult, h_mult = OBJECT_ASPECT[name]
            boxes[i] = (cx, cy, s * w_mult, s * h_mult)
            masks[i] = _ellipse_mask(mask_size)
    return DerivedTargets(boxes=boxes, masks=masks)


def toy_semantic_map(
    graph: SceneGraph, cv: ClassVocab, grid: GridSpec, height: int, width: int, mask_size: int = 32
) -> np.ndarray:
    """Ground-truth semantic map: argmax of the hard-composed toy targets."""
    targets = toy_targets(graph, cv, grid, mask_size)
    layout = compose_layout(graph, targets.boxes, targets.masks, height, width, cv, grid, mode="hard")
    return layout.argmax(axis=2).astype(np.int64)
