"""Procedural scene-graph sampling.

Sampled graphs always contain road and sky, place background classes in
plausible rows of the location grid, and only emit relation edges that agree
with the sampled cells and depth bins, so every sampled graph validates and
satisfies the attribute-consistency invariant by construction. The RNG is an
explicit argument; there is no global sampler state.
"""

from __future__ import annotations

import numpy as np

from .config import SamplerConfig
from .derivation import canonical_edges
from .graph import SceneEdge, SceneGraph, SceneNode
from .vocab import ClassVocab, GridSpec, RelationVocab


def _row_band(grid_size: int, lo_frac: float, hi_frac: float) -> tuple[int, int]:
    lo = int(grid_size * lo_frac)
    hi = max(int(grid_size * hi_frac), lo + 1)
    return lo, min(hi, grid_size)


def _sample_cell(rng: np.random.Generator, grid: GridSpec, band: tuple[int, int]) -> int:
    row = int(rng.integers(band[0], band[1]))
    col = int(rng.integers(0, grid.grid_size))
    return grid.cell_index(row, col)


def sample_graph(
    cfg: SamplerConfig,
    rng: np.random.Generator,
    cv: ClassVocab,
    rv: RelationVocab,
    grid: GridSpec = GridSpec(),
) -> SceneGraph:
    """Draw one random scene graph; reproducible from the generator state."""
    z_bins = grid.depth_bins
    lo, hi = cfg.node_count_range
    n_total = int(rng.integers(lo, hi + 1))

    chosen: list[tuple[str, int, int]] = []  # (class name, cell, z bin)
    sky_band = _row_band(grid.grid_size, 0.0, 0.375)
    road_band = _row_band(grid.grid_size, 0.625, 1.0)
    bg_band = _row_band(grid.grid_size, 0.25, 0.75)
    obj_band = _row_band(grid.grid_size, 0.375, 0.875)

    chosen.append(("sky", _sample_cell(rng, grid, sky_band), z_bins - 1))
    chosen.append(("road", _sample_cell(rng, grid, road_band), max(z_bins - 2, 0)))

    for name in cv.background_classes:
        if name in ("sky", "road") or len(chosen) >= n_total:
            continue
        prob = cfg.background_probs.get(name, 0.0)
        if rng.uniform() < prob:
            z = int(rng.integers(z_bins // 2, z_bins))
            chosen.append((name, _sample_cell(rng, grid, bg_band), z))

    names = [n for n, w in cfg.class_weights.items() if w > 0]
    weights = np.array([cfg.class_weights[n] for n in names], dtype=np.float64)
    weights /= weights.sum()
    first_object = len(chosen)
    while len(chosen) < n_total:
        name = names[int(rng.choice(len(names), p=weights))]
        z = int(rng.integers(0, z_bins))
        chosen.append((name, _sample_cell(rng, grid, obj_band), z))

    nodes = tuple(
        SceneNode(object_class=cv.index(name), cell=cell, depth_bin=z) for name, cell, z in chosen
    )

    edges: list[SceneEdge] = []
    for i in range(first_object, len(nodes)):
        for j in range(i + 1, len(nodes)):
            if rng.uniform() >= cfg.relation_density:
                continue
            rel = _attribute_relation(nodes[i], nodes[j], grid, rng)
            if rel is None:
                continue
            edges.extend(canonical_edges(i, j, frozenset([rel]), rv))

    return SceneGraph(nodes=nodes, edges=tuple(edges), meta={}, classes=cv.name)


def _attribute_relation(
    a: SceneNode, b: SceneNode, grid: GridSpec, rng: np.random.Generator
) -> str | None:
    """One relation fact about (a, b) consistent with their cells and bins."""
    row_a, col_a = grid.cell_row_col(a.cell)
    row_b, col_b = grid.cell_row_col(b.cell)
    options: list[str] = []
    if col_a < col_b:
        options.append("left_of")
    elif col_a > col_b:
        options.append("right_of")
    if row_a < row_b:
        options.append("above")
    elif row_a > row_b:
        options.append("below")
    if a.depth_bin < b.depth_bin:
        options.append("in_front_of")
    elif a.depth_bin > b.depth_bin:
        options.append("behind")
    if not options:
        return None
    return options[int(rng.integers(0, len(options)))]


def sample_corpus(
    cfg: SamplerConfig,
    n: int,
    seed: int,
    cv: ClassVocab,
    rv: RelationVocab,
    grid: GridSpec = GridSpec(),
) -> list[SceneGraph]:
    """Sample ``n`` graphs from one seeded stream, tagging provenance."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        g = sample_graph(cfg, rng, cv, rv, grid)
        out.append(
            SceneGraph(
                nodes=g.nodes,
                edges=g.edges,
                meta={"sampler_seed": seed, "sample_index": i},
                classes=g.classes,
            )
        )
    return out
