"""Scene layout composition.

Per-node masks are bilinearly warped into their boxes and painted into an
H x W x C class map. Hard mode runs a painter's algorithm: nodes paint
farthest-first (background before objects at equal depth), each writing its
warped mask value into its class channel and clearing the others wherever the
warped value exceeds 0.5. Soft mode replaces the overwrite with a per-pixel
normalized weighting of warped mask times a nearness factor, which keeps the
output differentiable with respect to masks and boxes.

The paint order breaks depth ties by node content (class, box, mask bytes),
never by list position, so composition is invariant under node permutation.
"""

from __future__ import annotations

import numpy as np
import torch

from .graph import SceneGraph
from .vocab import ClassVocab, GridSpec

WARP_EPS = 1e-8


def bilinear_warp(masks: torch.Tensor, corners: torch.Tensor, height: int, width: int) -> torch.Tensor:
    """Sample each M x M mask over its box, zero outside; (N, H, W) output.

    Mask pixel (0, 0) covers the box corner; sampling clamps at mask edges.
    Differentiable in both ``masks`` and ``corners``.
    """
    n, m, _ = masks.shape
    dtype = masks.dtype
    xs = (torch.arange(width, dtype=dtype) + 0.5) / width
    ys = (torch.arange(height, dtype=dtype) + 0.5) / height
    x0, y0, x1, y1 = corners[:, 0], corners[:, 1], corners[:, 2], corners[:, 3]
    w = torch.clamp(x1 - x0, min=WARP_EPS)
    h = torch.clamp(y1 - y0, min=WARP_EPS)

    u = (xs[None, None, :] - x0[:, None, None]) / w[:, None, None]
    v = (ys[None, :, None] - y0[:, None, None]) / h[:, None, None]
    inside = (u >= 0) & (u <= 1) & (v >= 0) & (v <= 1)

    mu = u * m - 0.5
    mv = v * m - 0.5
    iu = torch.floor(mu)
    iv = torch.floor(mv)
    fu = mu - iu  # (N, 1, W)
    fv = mv - iv  # (N, H, 1)
    iu0 = iu.long().clamp(0, m - 1)
    iv0 = iv.long().clamp(0, m - 1)
    iu1 = (iu.long() + 1).clamp(0, m - 1)
    iv1 = (iv.long() + 1).clamp(0, m - 1)

    flat = masks.reshape(n, -1)

    def take(jv, ju):
        idx = jv * m + ju  # broadcasts to (N, H, W)
        return flat.gather(1, idx.reshape(n, -1)).reshape(n, height, width)

    value = (
        take(iv0, iu0) * (1 - fu) * (1 - fv)
        + take(iv0, iu1) * fu * (1 - fv)
        + take(iv1, iu0) * (1 - fu) * fv
        + take(iv1, iu1) * fu * fv
    )
    return value * inside.to(dtype)


def paint_order(
    classes: np.ndarray,
    depth_bins: np.ndarray,
    is_background: np.ndarray,
    corners: np.ndarray,
    masks: np.ndarray,
) -> list[int]:
    """Farthest-first paint order with content-based (order-free) tie-breaks."""
    keys = []
    for i in range(len(classes)):
        keys.append(
            (
                -int(depth_bins[i]),
                0 if is_background[i] else 1,
                int(classes[i]),
                tuple(float(c) for c in corners[i]),
                np.asarray(masks[i]).tobytes(),
                i,
            )
        )
    return [k[-1] for k in sorted(keys, key=lambda k: k[:-1])]


def compose_hard(
    classes: np.ndarray,
    depth_bins: np.ndarray,
    is_background: np.ndarray,
    corners: torch.Tensor,
    masks: torch.Tensor,
    height: int,
    width: int,
    num_classes: int,
) -> torch.Tensor:
    """Painter's-algorithm layout; at most one channel above 0.5 per pixel.

    A pixel belongs to the nearest node in paint order whose warped mask
    exceeds 0.5 there; that node's warped value lands in its class channel.
    """
    dtype = masks.dtype if len(masks) else torch.float32
    if len(classes) == 0:
        return torch.zeros(height, width, num_classes, dtype=dtype)
    warped = bilinear_warp(masks, corners, height, width)
    order = paint_order(classes, depth_bins, is_background, corners.detach().numpy(), masks.detach().numpy())
    claimed = torch.zeros(height, width, dtype=torch.bool)
    contribs: list[torch.Tensor | None] = [None] * len(classes)
    for i in reversed(order):
        covered = warped[i].detach() > 0.5
        own = covered & ~claimed
        contribs[i] = warped[i] * own.to(dtype)
        claimed |= covered
    class_onehot = torch.zeros(len(classes), num_classes, dtype=dtype)
    class_onehot[torch.arange(len(classes)), torch.as_tensor(classes)] = 1.0
    return torch.einsum("nhw,nc->hwc", torch.stack(contribs), class_onehot)


def compose_soft(
    classes: np.ndarray,
    depth_bins: np.ndarray,
    is_background: np.ndarray,
    corners: torch.Tensor,
    masks: torch.Tensor,
    height: int,
    width: int,
    num_classes: int,
    total_bins: int,
    nearness: float = 4.0,
    eps: float = 1e-6,
) -> torch.Tensor:
    """Differentiable composition: per-pixel softmax-style weighting of
    warped masks by nearness (lower depth bin wins, objects over background)."""
    dtype = masks.dtype if len(masks) else torch.float32
    if len(classes) == 0:
        return torch.zeros(height, width, num_classes, dtype=dtype)
    warped = bilinear_warp(masks, corners, height, width)
    scale = max(total_bins, 1)
    score = torch.tensor(
        [
            (total_bins - 1 - int(z) + (0.0 if bg else 0.5)) / scale
            for z, bg in zip(depth_bins, is_background)
        ],
        dtype=dtype,
    )
    weights = warped * torch.exp(nearness * score)[:, None, None]
    normalized = weights / (weights.sum(dim=0) + eps)
    class_onehot = torch.zeros(len(classes), num_classes, dtype=dtype)
    class_onehot[torch.arange(len(classes)), torch.as_tensor(classes)] = 1.0
    return torch.einsum("nhw,nc->hwc", normalized, class_onehot)


def compose_layout(
    graph: SceneGraph,
    boxes_cxcywh: np.ndarray | torch.Tensor,
    masks: np.ndarray | torch.Tensor,
    height: int,
    width: int,
    cv: ClassVocab,
    grid: GridSpec = GridSpec(),
    mode: str = "hard",
) -> np.ndarray:
    """Compose a graph's per-node boxes/masks into an (H, W, C) layout array."""
    if len(graph.nodes) != len(boxes_cxcywh) or len(graph.nodes) != len(masks):
        raise ValueError(
            f"graph has {len(graph.nodes)} nodes but got {len(boxes_cxcywh)} boxes and {len(masks)} masks"
        )
    boxes_t = torch.as_tensor(np.asarray(boxes_cxcywh), dtype=torch.float64)
    masks_t = torch.as_tensor(np.asarray(masks), dtype=torch.float64)
    corners = boxes_to_corners_t(boxes_t)
    classes = np.array([n.object_class for n in graph.nodes], dtype=np.int64)
    zbins = np.array([n.depth_bin for n in graph.nodes], dtype=np.int64)
    is_bg = np.array([cv.is_background(c) for c in classes], dtype=bool)
    if mode == "hard":
        out = compose_hard(classes, zbins, is_bg, corners, masks_t, height, width, len(cv))
    elif mode == "soft":
        out = compose_soft(
            classes, zbins, is_bg, corners, masks_t, height, width, len(cv), grid.depth_bins
        )
    else:
        raise ValueError(f"unknown compose mode {mode!r}")
    return out.numpy()


def boxes_to_corners_t(boxes: torch.Tensor) -> torch.Tensor:
    """Torch twin of boxes.cxcywh_to_corners, differentiable."""
    cx, cy, w, h = boxes[:, 0], boxes[:, 1], boxes[:, 2], boxes[:, 3]
    x0 = torch.clamp(cx - w / 2, 0.0, 1.0)
    y0 = torch.clamp(cy - h / 2, 0.0, 1.0)
    x1 = torch.clamp(cx + w / 2, 0.0, 1.0)
    y1 = torch.clamp(cy + h / 2, 0.0, 1.0)
    return torch.stack([x0, y0, x1, y1], dim=1)
