"""Scene-graph data model, validation, and edit operations.

Nodes store class/cell/depth as active indices; the one-hot encodings the
networks consume are materialized only at the tensor boundary (see
:func:`onehot` / :func:`onehot_index`). All types are immutable and all
operations return new graphs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Sequence

import numpy as np

from .vocab import ClassVocab, GridSpec, RelationVocab

EDIT_KINDS = (
    "add_node",
    "remove_node",
    "set_class",
    "set_depth_bin",
    "set_location",
    "add_edge",
    "remove_edge",
    "set_relation",
)


class EditError(ValueError):
    """Raised when a GraphEdit cannot be applied."""


@dataclass(frozen=True)
class SceneNode:
    object_class: int
    cell: int
    depth_bin: int


@dataclass(frozen=True)
class SceneEdge:
    subject: int
    relation: int
    obj: int


@dataclass(frozen=True)
class SceneGraph:
    nodes: tuple[SceneNode, ...] = ()
    edges: tuple[SceneEdge, ...] = ()
    meta: dict[str, Any] = field(default_factory=dict)
    classes: str = "default"

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))


@dataclass(frozen=True)
class GraphEdit:
    """One graph manipulation; payload fields depend on ``kind``."""

    kind: str
    node: SceneNode | None = None
    index: int | None = None
    object_class: int | None = None
    depth_bin: int | None = None
    cell: int | None = None
    edge: SceneEdge | None = None
    relation: int | None = None


@dataclass(frozen=True)
class Violation:
    kind: str
    where: str
    message: str


def onehot(index: int, length: int) -> np.ndarray:
    vec = np.zeros(length, dtype=np.float32)
    vec[index] = 1.0
    return vec


def onehot_index(vec: Sequence[float] | np.ndarray) -> int:
    """Active index of a one-hot vector; rejects zero or multiple hot entries."""
    arr = np.asarray(vec)
    active = np.flatnonzero(arr == 1)
    if active.size != 1 or not np.all((arr == 0) | (arr == 1)):
        raise ValueError(
            f"expected exactly one active entry, found {active.size} in vector of length {arr.size}"
        )
    return int(active[0])


def validate_graph(
    g: SceneGraph,
    cv: ClassVocab,
    rv: RelationVocab,
    grid: GridSpec = GridSpec(),
) -> list[Violation]:
    """Collect every invariant violation; an empty list means the graph is valid."""
    out: list[Violation] = []
    n = len(g.nodes)
    for i, node in enumerate(g.nodes):
        if not 0 <= node.object_class < len(cv):
            out.append(Violation("class_range", f"nodes[{i}]", f"class index {node.object_class} out of range 0..{len(cv) - 1}"))
        if not 0 <= node.cell < grid.cells:
            out.append(Violation("cell_range", f"nodes[{i}]", f"cell {node.cell} out of range 0..{grid.cells - 1}"))
        if not 0 <= node.depth_bin < grid.depth_bins:
            out.append(Violation("depth_range", f"nodes[{i}]", f"depth bin {node.depth_bin} out of range 0..{grid.depth_bins - 1}"))

    seen: set[tuple[int, int, int]] = set()
    axis_seen: dict[tuple[int, int, frozenset[str]], int] = {}
    for k, edge in enumerate(g.edges):
        where = f"edges[{k}]"
        if not 0 <= edge.subject < n or not 0 <= edge.obj < n:
            out.append(Violation("endpoint_range", where, f"edge ({edge.subject},{edge.relation},{edge.obj}) references a missing node"))
            continue
        if edge.subject == edge.obj:
            out.append(Violation("self_edge", where, f"edge at node {edge.subject} relates a node to itself"))
        if not 0 <= edge.relation < len(rv):
            out.append(Violation("relation_range", where, f"relation index {edge.relation} out of range"))
            continue
        key = (edge.subject, edge.relation, edge.obj)
        if key in seen:
            out.append(Violation("duplicate_edge", where, f"duplicate edge {key}"))
        seen.add(key)
        rel = rv.relation_name(edge.relation)
        pair = (min(edge.subject, edge.obj), max(edge.subject, edge.obj))
        axis_key = (pair[0], pair[1], rv.axis(rel))
        if axis_key in axis_seen:
            out.append(
                Violation(
                    "axis_conflict",
                    where,
                    f"edges[{axis_seen[axis_key]}] and edges[{k}] both relate nodes {pair} on the {'/'.join(sorted(rv.axis(rel)))} axis",
                )
            )
        else:
            axis_seen[axis_key] = k
    return out


def _check_node_index(g: SceneGraph, index: int | None) -> int:
    if index is None or not 0 <= index < len(g.nodes):
        raise EditError(f"node index {index} does not exist")
    return index


def _check_edge_index(g: SceneGraph, index: int | None) -> int:
    if index is None or not 0 <= index < len(g.edges):
        raise EditError(f"edge index {index} does not exist")
    return index


def _check_new_edge(g: SceneGraph, edge: SceneEdge, rv: RelationVocab | None, skip: int | None = None) -> None:
    if not 0 <= edge.subject < len(g.nodes) or not 0 <= edge.obj < len(g.nodes):
        raise EditError(f"edge ({edge.subject},{edge.relation},{edge.obj}) references a missing node")
    if edge.subject == edge.obj:
        raise EditError(f"edge may not relate node {edge.subject} to itself")
    for k, other in enumerate(g.edges):
        if k == skip:
            continue
        if (other.subject, other.relation, other.obj) == (edge.subject, edge.relation, edge.obj):
            raise EditError(f"edge ({edge.subject},{edge.relation},{edge.obj}) already present")
        if rv is not None:
            pair = {other.subject, other.obj}
            if pair == {edge.subject, edge.obj} and rv.axis(rv.relation_name(other.relation)) == rv.axis(
                rv.relation_name(edge.relation)
            ):
                raise EditError(
                    f"nodes {tuple(sorted(pair))} already related on the "
                    f"{'/'.join(sorted(rv.axis(rv.relation_name(edge.relation))))} axis"
                )


def apply_edit(g: SceneGraph, edit: GraphEdit, rv: RelationVocab | None = None) -> SceneGraph:
    """Apply one edit, returning a new graph; untouched entities are preserved.

    When ``rv`` is given, edge edits also enforce the one-edge-per-axis rule.
    """
    kind = edit.kind
    if kind not in EDIT_KINDS:
        raise EditError(f"unknown edit kind {kind!r}")

    if kind == "add_node":
        if edit.node is None:
            raise EditError("add_node requires a node payload")
        return replace(g, nodes=g.nodes + (edit.node,))

    if kind == "remove_node":
        i = _check_node_index(g, edit.index)
        nodes = g.nodes[:i] + g.nodes[i + 1 :]
        edges = []
        for e in g.edges:
            if i in (e.subject, e.obj):
                continue
            edges.append(
                SceneEdge(
                    subject=e.subject - (e.subject > i),
                    relation=e.relation,
                    obj=e.obj - (e.obj > i),
                )
            )
        return replace(g, nodes=nodes, edges=tuple(edges))

    if kind in ("set_class", "set_depth_bin", "set_location"):
        i = _check_node_index(g, edit.index)
        node = g.nodes[i]
        if kind == "set_class":
            if edit.object_class is None:
                raise EditError("set_class requires object_class")
            node = replace(node, object_class=edit.object_class)
        elif kind == "set_depth_bin":
            if edit.depth_bin is None:
                raise EditError("set_depth_bin requires depth_bin")
            node = replace(node, depth_bin=edit.depth_bin)
        else:
            if edit.cell is None:
                raise EditError("set_location requires cell")
            node = replace(node, cell=edit.cell)
        return replace(g, nodes=g.nodes[:i] + (node,) + g.nodes[i + 1 :])

    if kind == "add_edge":
        if edit.edge is None:
            raise EditError("add_edge requires an edge payload")
        _check_new_edge(g, edit.edge, rv)
        return replace(g, edges=g.edges + (edit.edge,))

    if kind == "remove_edge":
        k = _check_edge_index(g, edit.index)
        return replace(g, edges=g.edges[:k] + g.edges[k + 1 :])

    # set_relation
    k = _check_edge_index(g, edit.index)
    if edit.relation is None:
        raise EditError("set_relation requires relation")
    new_edge = replace(g.edges[k], relation=edit.relation)
    _check_new_edge(g, new_edge, rv, skip=k)
    return replace(g, edges=g.edges[:k] + (new_edge,) + g.edges[k + 1 :])


def permute_nodes(g: SceneGraph, perm: Sequence[int]) -> SceneGraph:
    """Reorder nodes so node ``i`` moves to position ``perm[i]``."""
    n = len(g.nodes)
    if sorted(perm) != list(range(n)):
        raise ValueError(f"perm {list(perm)} is not a bijection on 0..{n - 1}")
    nodes: list[SceneNode | None] = [None] * n
    for i, node in enumerate(g.nodes):
        nodes[perm[i]] = node
    edges = tuple(
        SceneEdge(subject=perm[e.subject], relation=e.relation, obj=perm[e.obj]) for e in g.edges
    )
    return replace(g, nodes=tuple(nodes), edges=edges)


def class_histogram(g: SceneGraph, cv: ClassVocab) -> np.ndarray:
    """Per-class node counts; sums to the node count."""
    counts = np.zeros(len(cv), dtype=np.int64)
    for node in g.nodes:
        counts[node.object_class] += 1
    return counts


def has_relation(g: SceneGraph, subject: int, relation: str, obj: int, rv: RelationVocab) -> bool:
    """True if the relation holds between the nodes, in either stored direction."""
    r = rv.index(relation)
    r_dual = rv.dual_index(r)
    for e in g.edges:
        if (e.subject, e.relation, e.obj) == (subject, r, obj):
            return True
        if (e.subject, e.relation, e.obj) == (obj, r_dual, subject):
            return True
    return False


def edges_of(g: SceneGraph, node: int) -> list[int]:
    return [k for k, e in enumerate(g.edges) if node in (e.subject, e.obj)]
