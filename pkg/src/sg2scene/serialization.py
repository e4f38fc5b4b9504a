"""Canonical scene-graph documents.

One graph is one JSON object with exactly the fields ``version`` (=1),
``classes`` (vocabulary name), ``nodes``, ``edges`` and ``meta``. Keys are
sorted, arrays follow index order, and integers are unpadded decimals, so
serialization is byte-deterministic. The same format is the wire format of
the service and, line-delimited, the corpus file format.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Iterator

from .graph import SceneEdge, SceneGraph, SceneNode
from .vocab import DEFAULT_RELATIONS, RelationVocab, VocabError, get_class_vocab

FORMAT_VERSION = 1


class ParseError(ValueError):
    """Malformed or out-of-vocabulary document; ``where`` locates the problem."""

    def __init__(self, message: str, where: str = "$"):
        super().__init__(f"{where}: {message}")
        self.where = where
        self.message = message


def canonical_json(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), allow_nan=False)


def graph_to_dict(g: SceneGraph, rv: RelationVocab = DEFAULT_RELATIONS) -> dict[str, Any]:
    cv = get_class_vocab(g.classes)
    return {
        "version": FORMAT_VERSION,
        "classes": g.classes,
        "nodes": [
            {"class": cv.class_name(n.object_class), "cell": n.cell, "z": n.depth_bin}
            for n in g.nodes
        ],
        "edges": [
            {"s": e.subject, "r": rv.relation_name(e.relation), "o": e.obj} for e in g.edges
        ],
        "meta": dict(g.meta),
    }


def serialize_graph(g: SceneGraph, rv: RelationVocab = DEFAULT_RELATIONS) -> str:
    return canonical_json(graph_to_dict(g, rv))


def _expect(mapping: Any, key: str, where: str) -> Any:
    if not isinstance(mapping, dict):
        raise ParseError(f"expected an object, got {type(mapping).__name__}", where)
    if key not in mapping:
        raise ParseError(f"missing required field {key!r}", where)
    return mapping[key]


def _expect_int(value: Any, where: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise ParseError(f"expected an integer, got {value!r}", where)
    return value


def graph_from_dict(doc: Any, rv: RelationVocab = DEFAULT_RELATIONS) -> SceneGraph:
    version = _expect(doc, "version", "$")
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported version {version!r}", "$.version")
    unknown = set(doc) - {"version", "classes", "nodes", "edges", "meta"}
    if unknown:
        raise ParseError(f"unknown fields {sorted(unknown)}", "$")

    classes = _expect(doc, "classes", "$")
    try:
        cv = get_class_vocab(classes)
    except VocabError as exc:
        raise ParseError(str(exc), "$.classes") from None

    raw_nodes = _expect(doc, "nodes", "$")
    if not isinstance(raw_nodes, list):
        raise ParseError("nodes must be an array", "$.nodes")
    nodes = []
    for i, raw in enumerate(raw_nodes):
        where = f"$.nodes[{i}]"
        name = _expect(raw, "class", where)
        try:
            cls = cv.index(name)
        except VocabError as exc:
            raise ParseError(str(exc), f"{where}.class") from None
        cell = _expect_int(_expect(raw, "cell", where), f"{where}.cell")
        z = _expect_int(_expect(raw, "z", where), f"{where}.z")
        extra = set(raw) - {"class", "cell", "z"}
        if extra:
            raise ParseError(f"unknown fields {sorted(extra)}", where)
        nodes.append(SceneNode(object_class=cls, cell=cell, depth_bin=z))

    raw_edges = _expect(doc, "edges", "$")
    if not isinstance(raw_edges, list):
        raise ParseError("edges must be an array", "$.edges")
    edges = []
    for k, raw in enumerate(raw_edges):
        where = f"$.edges[{k}]"
        s = _expect_int(_expect(raw, "s", where), f"{where}.s")
        o = _expect_int(_expect(raw, "o", where), f"{where}.o")
        rel_name = _expect(raw, "r", where)
        try:
            r = rv.index(rel_name)
        except VocabError as exc:
            raise ParseError(str(exc), f"{where}.r") from None
        extra = set(raw) - {"s", "r", "o"}
        if extra:
            raise ParseError(f"unknown fields {sorted(extra)}", where)
        if not 0 <= s < len(nodes) or not 0 <= o < len(nodes):
            raise ParseError(f"edge endpoints ({s},{o}) out of range for {len(nodes)} nodes", where)
        edges.append(SceneEdge(subject=s, relation=r, obj=o))

    meta = _expect(doc, "meta", "$")
    if not isinstance(meta, dict):
        raise ParseError("meta must be an object", "$.meta")

    return SceneGraph(nodes=tuple(nodes), edges=tuple(edges), meta=dict(meta), classes=classes)


def parse_graph(text: str, rv: RelationVocab = DEFAULT_RELATIONS) -> SceneGraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", f"offset {exc.pos}") from None
    return graph_from_dict(doc, rv)


def write_corpus(graphs: Iterable[SceneGraph], path: str | Path, rv: RelationVocab = DEFAULT_RELATIONS) -> int:
    """Write one canonical document per line; returns the number written."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for g in graphs:
            fh.write(serialize_graph(g, rv))
            fh.write("\n")
            count += 1
    return count


def iter_corpus(path: str | Path, rv: RelationVocab = DEFAULT_RELATIONS) -> Iterator[SceneGraph]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield parse_graph(line, rv)
            except ParseError as exc:
                raise ParseError(exc.message, f"line {lineno} {exc.where}") from None


def read_corpus(path: str | Path, rv: RelationVocab = DEFAULT_RELATIONS) -> list[SceneGraph]:
    return list(iter_corpus(path, rv))
