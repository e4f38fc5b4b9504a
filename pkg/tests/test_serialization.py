import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sg2scene.graph import SceneEdge, SceneGraph, SceneNode, validate_graph
from sg2scene.serialization import (
    ParseError,
    parse_graph,
    read_corpus,
    serialize_graph,
    write_corpus,
)
from sg2scene.vocab import DEFAULT_CLASSES, DEFAULT_RELATIONS, GridSpec

GRID = GridSpec()


@st.composite
def scene_graphs(draw):
    n = draw(st.integers(min_value=0, max_value=7))
    nodes = tuple(
        SceneNode(
            object_class=draw(st.integers(0, len(DEFAULT_CLASSES) - 1)),
            cell=draw(st.integers(0, GRID.cells - 1)),
            depth_bin=draw(st.integers(0, GRID.depth_bins - 1)),
        )
        for _ in range(n)
    )
    edges = []
    taken = set()
    if n >= 2:
        for _ in range(draw(st.integers(0, 6))):
            i = draw(st.integers(0, n - 1))
            j = draw(st.integers(0, n - 1))
            r = draw(st.integers(0, len(DEFAULT_RELATIONS) - 1))
            axis = (min(i, j), max(i, j), DEFAULT_RELATIONS.axis(DEFAULT_RELATIONS.relation_name(r)))
            if i == j or axis in taken:
                continue
            taken.add(axis)
            edges.append(SceneEdge(subject=i, relation=r, obj=j))
    meta = draw(
        st.dictionaries(
            st.text(st.characters(codec="ascii", categories=["L", "N"]), min_size=1, max_size=8),
            st.one_of(st.integers(-100, 100), st.booleans(), st.text(max_size=10)),
            max_size=3,
        )
    )
    return SceneGraph(nodes=nodes, edges=tuple(edges), meta=meta, classes="default")


@settings(max_examples=200, deadline=None)
@given(scene_graphs())
def test_roundtrip_property(g):
    assert parse_graph(serialize_graph(g)) == g


@settings(max_examples=50, deadline=None)
@given(scene_graphs())
def test_serialization_is_byte_deterministic(g):
    assert serialize_graph(g) == serialize_graph(g)
    assert serialize_graph(parse_graph(serialize_graph(g))) == serialize_graph(g)


def test_roundtrip_three_nodes_two_edges(rv):
    g = SceneGraph(
        nodes=(SceneNode(5, 36, 2), SceneNode(5, 44, 5), SceneNode(0, 3, 7)),
        edges=(SceneEdge(1, rv.index("behind"), 0), SceneEdge(0, rv.index("left_of"), 1)),
        meta={"source": "unit"},
    )
    assert parse_graph(serialize_graph(g)) == g


def test_document_shape_and_key_order():
    g = SceneGraph(nodes=(SceneNode(5, 36, 2),), meta={"b": 1, "a": 2})
    doc = serialize_graph(g)
    assert doc.index('"classes"') < doc.index('"edges"') < doc.index('"meta"')
    assert doc.index('"meta"') < doc.index('"nodes"') < doc.index('"version"')
    parsed = json.loads(doc)
    assert parsed["version"] == 1
    assert parsed["nodes"] == [{"class": "car", "cell": 36, "z": 2}]


def test_unknown_class_name_cites_token():
    doc = json.dumps(
        {
            "version": 1,
            "classes": "default",
            "nodes": [{"class": "bicycle", "cell": 0, "z": 0}],
            "edges": [],
            "meta": {},
        }
    )
    with pytest.raises(ParseError, match="bicycle") as err:
        parse_graph(doc)
    assert "nodes[0]" in str(err.value)


def test_vegetation_alias_parses_to_tree():
    doc = json.dumps(
        {
            "version": 1,
            "classes": "default",
            "nodes": [{"class": "vegetation", "cell": 0, "z": 0}],
            "edges": [],
            "meta": {},
        }
    )
    g = parse_graph(doc)
    assert g.nodes[0].object_class == DEFAULT_CLASSES.index("tree")


def test_malformed_json_reports_position():
    with pytest.raises(ParseError, match="offset"):
        parse_graph('{"version": 1,')


@pytest.mark.parametrize(
    "mutate, fragment",
    [
        (lambda d: d.update(version=2), "version"),
        (lambda d: d.update(classes="martian"), "martian"),
        (lambda d: d.update(extra=1), "unknown fields"),
        (lambda d: d.__setitem__("nodes", [{"class": "car", "cell": "x", "z": 0}]), "integer"),
        (lambda d: d.__setitem__("edges", [{"s": 0, "r": "orbits", "o": 1}]), "orbits"),
        (lambda d: d.__setitem__("edges", [{"s": 0, "r": "left_of", "o": 5}]), "out of range"),
        (lambda d: d.__setitem__("meta", []), "meta"),
        (lambda d: d.pop("nodes"), "missing"),
    ],
)
def test_malformed_documents_rejected(mutate, fragment):
    doc = {
        "version": 1,
        "classes": "default",
        "nodes": [{"class": "car", "cell": 0, "z": 0}, {"class": "sky", "cell": 1, "z": 7}],
        "edges": [],
        "meta": {},
    }
    mutate(doc)
    with pytest.raises(ParseError, match=fragment):
        parse_graph(json.dumps(doc))


def test_corpus_roundtrip(tmp_path, random_graph_factory):
    graphs = [random_graph_factory() for _ in range(10)]
    path = tmp_path / "corpus.jsonl"
    assert write_corpus(graphs, path) == 10
    assert read_corpus(path) == graphs


def test_corpus_parse_error_carries_line(tmp_path):
    path = tmp_path / "corpus.jsonl"
    path.write_text(serialize_graph(SceneGraph()) + "\n{bad\n")
    with pytest.raises(ParseError, match="line 2"):
        read_corpus(path)


@settings(max_examples=100, deadline=None)
@given(scene_graphs())
def test_generated_graphs_validate(g):
    assert validate_graph(g, DEFAULT_CLASSES, DEFAULT_RELATIONS, GRID) == []
