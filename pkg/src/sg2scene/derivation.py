"""Derive scene graphs from simulation-style annotations.

An annotation record carries 3D boxes plus semantic and instance maps, the
same ingredients the big synthetic driving sets expose. Objects become nodes
with grid cell and depth bin read off the annotation; background classes
covering enough pixels become nodes too, with geometry taken from their
semantic region. Edges come from simple spatial predicates with configurable
gaps, pruned to the nearest pairs, and are stored in canonical dual form.

Converter stubs for specific dataset layouts can be registered in
``CONVERTERS``: a converter maps a dataset-specific directory to an
:class:`AnnotationRecord`. The neutral on-disk format handled here is one
directory per record with ``semantic.png``, ``instance.png`` and
``objects.json``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from PIL import Image

from .boxes import corners_to_cxcywh
from .config import DerivationConfig
from .graph import SceneEdge, SceneGraph, SceneNode
from .vocab import ClassVocab, GridSpec, RelationVocab


class RecordError(ValueError):
    """Raised for structurally invalid annotation records."""


@dataclass(frozen=True)
class Box3D:
    """One annotated object: camera-frame 3D box plus its image-plane box."""

    class_index: int
    center: tuple[float, float, float]
    extent: tuple[float, float, float]
    box2d: tuple[float, float, float, float]
    instance_id: int


@dataclass(frozen=True)
class AnnotationRecord:
    boxes3d: tuple[Box3D, ...]
    semantic_map: np.ndarray
    instance_map: np.ndarray
    record_id: str = ""

    def validate(self, cv: ClassVocab) -> None:
        if self.semantic_map.ndim != 2 or self.instance_map.ndim != 2:
            raise RecordError("semantic and instance maps must be 2-D")
        if self.semantic_map.shape != self.instance_map.shape:
            raise RecordError(
                f"map shapes differ: semantic {self.semantic_map.shape} vs instance {self.instance_map.shape}"
            )
        if self.semantic_map.size and int(self.semantic_map.max()) >= len(cv):
            raise RecordError("semantic map holds class ids outside the vocabulary")
        present = set(np.unique(self.instance_map).tolist())
        for k, box in enumerate(self.boxes3d):
            x0, y0, x1, y1 = box.box2d
            if not (0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1):
                raise RecordError(f"boxes3d[{k}]: 2D box {box.box2d} is not an ordered box in [0,1]")
            if not 0 <= box.class_index < len(cv):
                raise RecordError(f"boxes3d[{k}]: class index {box.class_index} out of range")
            if box.instance_id not in present:
                raise RecordError(f"boxes3d[{k}]: instance id {box.instance_id} absent from instance map")

    def instance_mask(self, instance_id: int) -> np.ndarray:
        return self.instance_map == instance_id


@dataclass(frozen=True)
class DerivedTargets:
    """Per-node training targets: boxes as (cx, cy, w, h), masks at M x M."""

    boxes: np.ndarray
    masks: np.ndarray


def quantize_depth(z_meters: float, cfg: DerivationConfig) -> int:
    """Depth bin of a camera-frame z value; clamped to the last bin."""
    if z_meters < 0:
        raise ValueError(f"depth must be >= 0, got {z_meters}")
    z_bins = cfg.grid.depth_bins
    bin_width = cfg.z_max / z_bins
    return min(int(math.floor(z_meters / bin_width)), z_bins - 1)


def grid_cell(
    box: tuple[float, float, float, float] | None = None,
    mask: np.ndarray | None = None,
    grid_size: int = 8,
) -> int:
    """Row-major grid cell of a box center or mask centroid."""
    if box is not None:
        cx = (box[0] + box[2]) / 2
        cy = (box[1] + box[3]) / 2
    elif mask is not None:
        rows, cols = np.nonzero(mask)
        if rows.size == 0:
            raise ValueError("cannot take the grid cell of an empty mask")
        h, w = mask.shape
        cx = (cols.mean() + 0.5) / w
        cy = (rows.mean() + 0.5) / h
    else:
        raise ValueError("grid_cell needs a box or a mask")
    col = min(int(cx * grid_size), grid_size - 1)
    row = min(int(cy * grid_size), grid_size - 1)
    return row * grid_size + col


def pairwise_relation(a: Box3D, b: Box3D, cfg: DerivationConfig) -> frozenset[str]:
    """Spatial relations that hold for the ordered pair (a, b).

    Image-plane predicates use 2D box centers with a minimum gap; depth uses
    camera-frame z where smaller z is nearer the ego vehicle. Dual relations
    are mutually exclusive by construction.
    """
    acx, acy = (a.box2d[0] + a.box2d[2]) / 2, (a.box2d[1] + a.box2d[3]) / 2
    bcx, bcy = (b.box2d[0] + b.box2d[2]) / 2, (b.box2d[1] + b.box2d[3]) / 2
    rels = set()
    if acx + cfg.lateral_gap_min < bcx:
        rels.add("left_of")
    elif bcx + cfg.lateral_gap_min < acx:
        rels.add("right_of")
    if acy + cfg.vertical_gap_min < bcy:
        rels.add("above")
    elif bcy + cfg.vertical_gap_min < acy:
        rels.add("below")
    if b.center[2] - a.center[2] > cfg.depth_gap_min:
        rels.add("in_front_of")
    elif a.center[2] - b.center[2] > cfg.depth_gap_min:
        rels.add("behind")
    return frozenset(rels)


def canonical_edges(i: int, j: int, relations: frozenset[str], rv: RelationVocab) -> list[SceneEdge]:
    """Turn directed relation facts about (i, j) into canonically stored edges."""
    edges = []
    for rel in sorted(relations):
        if rv.is_canonical(rel):
            edges.append(SceneEdge(subject=i, relation=rv.index(rel), obj=j))
        else:
            edges.append(SceneEdge(subject=j, relation=rv.index(rv.canonical(rel)), obj=i))
    return edges


def _resize_mask(mask: np.ndarray, size: int) -> np.ndarray:
    """Nearest-neighbor resize of a binary mask to size x size."""
    h, w = mask.shape
    rows = np.minimum(((np.arange(size) + 0.5) * h / size).astype(np.int64), h - 1)
    cols = np.minimum(((np.arange(size) + 0.5) * w / size).astype(np.int64), w - 1)
    return mask[np.ix_(rows, cols)].astype(np.float32)


def _tight_box(mask: np.ndarray) -> tuple[float, float, float, float]:
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        raise RecordError("region mask is empty")
    h, w = mask.shape
    return (cols.min() / w, rows.min() / h, (cols.max() + 1) / w, (rows.max() + 1) / h)


def _crop(mask: np.ndarray, box: tuple[float, float, float, float]) -> np.ndarray:
    h, w = mask.shape
    x0 = int(box[0] * w)
    y0 = int(box[1] * h)
    x1 = max(int(math.ceil(box[2] * w)), x0 + 1)
    y1 = max(int(math.ceil(box[3] * h)), y0 + 1)
    return mask[y0:y1, x0:x1]


def derive_graph(
    rec: AnnotationRecord,
    cfg: DerivationConfig,
    cv: ClassVocab,
    rv: RelationVocab,
    mask_size: int = 32,
) -> tuple[SceneGraph, DerivedTargets]:
    """Read a scene graph plus per-node training targets out of one record.

    Deterministic: identical records produce identical serialized graphs.
    """
    rec.validate(cv)
    grid = cfg.grid
    nodes: list[SceneNode] = []
    boxes: list[np.ndarray] = []
    masks: list[np.ndarray] = []

    for box in rec.boxes3d:
        inst_mask = rec.instance_mask(box.instance_id)
        if not inst_mask.any():
            raise RecordError(f"instance {box.instance_id} has no pixels")
        tight = _tight_box(inst_mask)
        nodes.append(
            SceneNode(
                object_class=box.class_index,
                cell=grid_cell(box=box.box2d, grid_size=grid.grid_size),
                depth_bin=quantize_depth(box.center[2], cfg),
            )
        )
        boxes.append(corners_to_cxcywh(np.asarray(tight)))
        masks.append(_resize_mask(_crop(inst_mask, tight), mask_size))

    total_pixels = rec.semantic_map.size
    sky_bin = grid.depth_bins - 1
    mid_bin = grid.depth_bins // 2
    for idx in range(len(cv.background_classes)):
        region = rec.semantic_map == idx
        if total_pixels == 0 or region.sum() / total_pixels <= cfg.min_background_area:
            continue
        tight = _tight_box(region)
        name = cv.class_name(idx)
        nodes.append(
            SceneNode(
                object_class=idx,
                cell=grid_cell(mask=region, grid_size=grid.grid_size),
                depth_bin=sky_bin if name == "sky" else mid_bin,
            )
        )
        boxes.append(corners_to_cxcywh(np.asarray(tight)))
        masks.append(_resize_mask(_crop(region, tight), mask_size))

    edges = _pruned_object_edges(rec, cfg, rv)

    graph = SceneGraph(
        nodes=tuple(nodes),
        edges=tuple(edges),
        meta={"source": rec.record_id} if rec.record_id else {},
        classes=cv.name,
    )
    targets = DerivedTargets(
        boxes=np.stack(boxes).astype(np.float32) if boxes else np.zeros((0, 4), np.float32),
        masks=np.stack(masks).astype(np.float32) if masks else np.zeros((0, mask_size, mask_size), np.float32),
    )
    return graph, targets


def _pruned_object_edges(rec: AnnotationRecord, cfg: DerivationConfig, rv: RelationVocab) -> list[SceneEdge]:
    """Relations over object pairs, greedily kept nearest-first under a
    per-node neighbor cap. Objects occupy node indices 0..len(boxes3d)-1."""
    candidates = []
    for i in range(len(rec.boxes3d)):
        for j in range(i + 1, len(rec.boxes3d)):
            rels = pairwise_relation(rec.boxes3d[i], rec.boxes3d[j], cfg)
            if not rels:
                continue
            a, b = rec.boxes3d[i].box2d, rec.boxes3d[j].box2d
            dist = math.hypot(
                (a[0] + a[2]) / 2 - (b[0] + b[2]) / 2,
                (a[1] + a[3]) / 2 - (b[1] + b[3]) / 2,
            )
            candidates.append((dist, i, j, rels))
    candidates.sort(key=lambda c: (c[0], c[1], c[2]))

    degree: dict[int, int] = {}
    edges: list[SceneEdge] = []
    for _, i, j, rels in candidates:
        if degree.get(i, 0) >= cfg.max_edges_per_node or degree.get(j, 0) >= cfg.max_edges_per_node:
            continue
        degree[i] = degree.get(i, 0) + 1
        degree[j] = degree.get(j, 0) + 1
        edges.extend(canonical_edges(i, j, rels, rv))
    return edges


def save_record(rec: AnnotationRecord, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    Image.fromarray(rec.semantic_map.astype(np.uint8), mode="L").save(directory / "semantic.png")
    Image.fromarray(rec.instance_map.astype(np.uint16)).save(directory / "instance.png")
    objects = [
        {
            "class": b.class_index,
            "center": list(b.center),
            "extent": list(b.extent),
            "box2d": list(b.box2d),
            "instance_id": b.instance_id,
        }
        for b in rec.boxes3d
    ]
    (directory / "objects.json").write_text(json.dumps(objects, sort_keys=True, indent=1), encoding="utf-8")


def load_record(directory: str | Path) -> AnnotationRecord:
    directory = Path(directory)
    for fname in ("semantic.png", "instance.png", "objects.json"):
        if not (directory / fname).exists():
            raise RecordError(f"record {directory} lacks {fname}")
    semantic = np.asarray(Image.open(directory / "semantic.png")).astype(np.int64)
    instance = np.asarray(Image.open(directory / "instance.png")).astype(np.int64)
    raw = json.loads((directory / "objects.json").read_text(encoding="utf-8"))
    boxes = []
    for k, entry in enumerate(raw):
        try:
            boxes.append(
                Box3D(
                    class_index=int(entry["class"]),
                    center=tuple(float(v) for v in entry["center"]),
                    extent=tuple(float(v) for v in entry["extent"]),
                    box2d=tuple(float(v) for v in entry["box2d"]),
                    instance_id=int(entry["instance_id"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise RecordError(f"objects.json entry {k}: {exc}") from None
    return AnnotationRecord(
        boxes3d=tuple(boxes),
        semantic_map=semantic,
        instance_map=instance,
        record_id=directory.name,
    )


def iter_record_dirs(root: str | Path) -> list[Path]:
    """Record directories under ``root``; ``root`` itself if it is a record."""
    root = Path(root)
    if (root / "objects.json").exists():
        return [root]
    return sorted(d for d in root.iterdir() if d.is_dir() and (d / "objects.json").exists())


# Dataset-specific loaders (PfB, Synscapes, ...) can be plugged in here; each
# converter maps its dataset's per-frame layout onto an AnnotationRecord.
CONVERTERS: dict[str, Callable[[Path], AnnotationRecord]] = {
    "neutral": load_record,
}


def save_targets_npz(path: str | Path, targets: list[DerivedTargets]) -> None:
    arrays = {}
    for i, t in enumerate(targets):
        arrays[f"boxes_{i}"] = np.asarray(t.boxes, dtype=np.float32)
        arrays[f"masks_{i}"] = np.asarray(t.masks, dtype=np.float32)
    np.savez_compressed(path, count=np.int64(len(targets)), **arrays)


def load_targets_npz(path: str | Path) -> list[DerivedTargets]:
    data = np.load(path)
    count = int(data["count"])
    return [DerivedTargets(boxes=data[f"boxes_{i}"], masks=data[f"masks_{i}"]) for i in range(count)]
