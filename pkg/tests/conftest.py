import numpy as np
import pytest

from sg2scene.graph import SceneEdge, SceneGraph, SceneNode
from sg2scene.vocab import DEFAULT_CLASSES, DEFAULT_RELATIONS, GridSpec


@pytest.fixture
def cv():
    return DEFAULT_CLASSES


@pytest.fixture
def rv():
    return DEFAULT_RELATIONS


@pytest.fixture
def grid():
    return GridSpec()


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def build_random_graph(rng, cv, rv, grid, max_nodes=8, allow_meta=True):
    """Random valid graph; edges avoid duplicates and axis conflicts."""
    n = int(rng.integers(0, max_nodes + 1))
    nodes = tuple(
        SceneNode(
            object_class=int(rng.integers(0, len(cv))),
            cell=int(rng.integers(0, grid.cells)),
            depth_bin=int(rng.integers(0, grid.depth_bins)),
        )
        for _ in range(n)
    )
    edges = []
    taken_axes = set()
    if n >= 2:
        for _ in range(int(rng.integers(0, 2 * n))):
            i, j = rng.choice(n, size=2, replace=False)
            r = int(rng.integers(0, len(rv)))
            axis = (min(i, j), max(i, j), rv.axis(rv.relation_name(r)))
            if axis in taken_axes:
                continue
            taken_axes.add(axis)
            edges.append(SceneEdge(subject=int(i), relation=r, obj=int(j)))
    meta = {}
    if allow_meta and rng.uniform() < 0.5:
        meta = {"source": f"test-{int(rng.integers(0, 1000))}", "flag": bool(rng.integers(0, 2))}
    return SceneGraph(nodes=nodes, edges=tuple(edges), meta=meta, classes=cv.name)


@pytest.fixture
def random_graph_factory(rng, cv, rv, grid):
    return lambda **kw: build_random_graph(rng, cv, rv, grid, **kw)
