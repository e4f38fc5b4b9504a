import numpy as np
import pytest

from sg2scene.graph import (
    EditError,
    GraphEdit,
    SceneEdge,
    SceneGraph,
    SceneNode,
    apply_edit,
    class_histogram,
    has_relation,
    onehot,
    onehot_index,
    permute_nodes,
    validate_graph,
)


def node(cls=5, cell=36, z=4):
    return SceneNode(object_class=cls, cell=cell, depth_bin=z)


@pytest.fixture
def three_node_graph(cv, rv):
    # car in front of car, person left of first car
    return SceneGraph(
        nodes=(node(5, 36, 2), node(5, 44, 5), node(4, 20, 3)),
        edges=(
            SceneEdge(subject=1, relation=rv.index("behind"), obj=0),
            SceneEdge(subject=2, relation=rv.index("left_of"), obj=0),
        ),
        classes="default",
    )


class TestValidateGraph:
    def test_empty_graph_is_valid(self, cv, rv):
        assert validate_graph(SceneGraph(), cv, rv) == []

    def test_valid_graph_has_no_violations(self, three_node_graph, cv, rv):
        assert validate_graph(three_node_graph, cv, rv) == []

    def test_self_edge_flagged(self, cv, rv):
        g = SceneGraph(nodes=(node(), node()), edges=(SceneEdge(0, 0, 0),))
        violations = validate_graph(g, cv, rv)
        assert len(violations) == 1
        assert violations[0].kind == "self_edge"
        assert violations[0].where == "edges[0]"

    def test_out_of_range_indices_flagged(self, cv, rv, grid):
        g = SceneGraph(nodes=(node(cls=99), node(cell=grid.cells), node(z=grid.depth_bins)))
        kinds = {v.kind for v in validate_graph(g, cv, rv, grid)}
        assert kinds == {"class_range", "cell_range", "depth_range"}

    def test_duplicate_edge_flagged(self, cv, rv):
        e = SceneEdge(0, 2, 1)
        g = SceneGraph(nodes=(node(), node()), edges=(e, e))
        assert any(v.kind == "duplicate_edge" for v in validate_graph(g, cv, rv))

    def test_dual_pair_on_same_axis_flagged(self, cv, rv):
        g = SceneGraph(
            nodes=(node(), node()),
            edges=(
                SceneEdge(0, rv.index("left_of"), 1),
                SceneEdge(1, rv.index("left_of"), 0),
            ),
        )
        assert any(v.kind == "axis_conflict" for v in validate_graph(g, cv, rv))

    def test_different_axes_between_same_pair_allowed(self, cv, rv):
        g = SceneGraph(
            nodes=(node(), node()),
            edges=(
                SceneEdge(0, rv.index("left_of"), 1),
                SceneEdge(0, rv.index("behind"), 1),
            ),
        )
        assert validate_graph(g, cv, rv) == []

    def test_dangling_endpoint_flagged(self, cv, rv):
        g = SceneGraph(nodes=(node(),), edges=(SceneEdge(0, 0, 5),))
        assert any(v.kind == "endpoint_range" for v in validate_graph(g, cv, rv))


class TestOnehot:
    def test_roundtrip(self):
        assert onehot_index(onehot(3, 8)) == 3

    def test_two_active_entries_rejected(self):
        vec = np.zeros(64)
        vec[3] = 1.0
        vec[17] = 1.0
        with pytest.raises(ValueError, match="exactly one"):
            onehot_index(vec)

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError):
            onehot_index(np.zeros(8))


class TestApplyEdit:
    def test_set_depth_bin_changes_only_that_field(self, three_node_graph):
        g5 = apply_edit(three_node_graph, GraphEdit("set_depth_bin", index=0, depth_bin=5))
        g2 = apply_edit(g5, GraphEdit("set_depth_bin", index=0, depth_bin=2))
        assert g5.nodes[0].depth_bin == 5
        assert g2.nodes[0].depth_bin == 2
        assert g2.nodes[1:] == three_node_graph.nodes[1:]
        assert g2.edges == three_node_graph.edges
        assert g2 == three_node_graph

    def test_set_relation_toggles_in_front_of_to_behind(self, three_node_graph, rv):
        g = apply_edit(
            three_node_graph, GraphEdit("set_relation", index=0, relation=rv.index("in_front_of")), rv
        )
        assert g.edges[0].relation == rv.index("in_front_of")
        assert g.edges[0].subject == 1 and g.edges[0].obj == 0
        assert g.edges[1] == three_node_graph.edges[1]

    def test_remove_node_cascades_incident_edges(self, cv, rv):
        g = SceneGraph(
            nodes=(node(), node(), node(), node()),
            edges=(
                SceneEdge(0, 0, 1),
                SceneEdge(2, 2, 1),
                SceneEdge(1, 4, 3),
                SceneEdge(0, 4, 3),
            ),
        )
        out = apply_edit(g, GraphEdit("remove_node", index=1))
        assert len(out.nodes) == 3
        # the three edges touching node 1 are gone, the survivor is reindexed
        assert out.edges == (SceneEdge(0, 4, 2),)
        assert validate_graph(out, cv, rv) == []

    def test_add_node_and_edge(self, three_node_graph, rv):
        g = apply_edit(three_node_graph, GraphEdit("add_node", node=node(6, 10, 1)))
        g = apply_edit(g, GraphEdit("add_edge", edge=SceneEdge(3, rv.index("above"), 0)), rv)
        assert len(g.nodes) == 4
        assert g.edges[-1] == SceneEdge(3, rv.index("above"), 0)

    def test_add_duplicate_edge_rejected(self, three_node_graph, rv):
        with pytest.raises(EditError, match="already present"):
            apply_edit(
                three_node_graph,
                GraphEdit("add_edge", edge=SceneEdge(1, rv.index("behind"), 0)),
                rv,
            )

    def test_add_edge_conflicting_axis_rejected(self, three_node_graph, rv):
        with pytest.raises(EditError, match="axis"):
            apply_edit(
                three_node_graph,
                GraphEdit("add_edge", edge=SceneEdge(0, rv.index("in_front_of"), 1)),
                rv,
            )

    def test_missing_reference_rejected(self, three_node_graph):
        with pytest.raises(EditError, match="node index 7"):
            apply_edit(three_node_graph, GraphEdit("set_class", index=7, object_class=1))
        with pytest.raises(EditError, match="edge index 9"):
            apply_edit(three_node_graph, GraphEdit("remove_edge", index=9))

    def test_self_edge_rejected(self, three_node_graph, rv):
        with pytest.raises(EditError, match="itself"):
            apply_edit(three_node_graph, GraphEdit("add_edge", edge=SceneEdge(1, 0, 1)), rv)

    def test_unknown_kind_rejected(self, three_node_graph):
        with pytest.raises(EditError, match="unknown edit kind"):
            apply_edit(three_node_graph, GraphEdit("paint_node"))


class TestPermuteNodes:
    def test_identity(self, three_node_graph):
        assert permute_nodes(three_node_graph, [0, 1, 2]) == three_node_graph

    def test_swap_remaps_edges(self, rv):
        g = SceneGraph(nodes=(node(1), node(2)), edges=(SceneEdge(0, rv.index("left_of"), 1),))
        out = permute_nodes(g, [1, 0])
        assert out.nodes == (g.nodes[1], g.nodes[0])
        assert out.edges == (SceneEdge(1, rv.index("left_of"), 0),)

    def test_inverse_restores(self, random_graph_factory, rng):
        for _ in range(20):
            g = random_graph_factory()
            n = len(g.nodes)
            perm = list(rng.permutation(n))
            inv = [0] * n
            for i, p in enumerate(perm):
                inv[p] = i
            assert permute_nodes(permute_nodes(g, perm), inv) == g

    def test_composition(self, random_graph_factory, rng):
        for _ in range(20):
            g = random_graph_factory()
            n = len(g.nodes)
            p = list(rng.permutation(n))
            q = list(rng.permutation(n))
            p_after_q = [p[q[i]] for i in range(n)]
            assert permute_nodes(g, p_after_q) == permute_nodes(permute_nodes(g, q), p)

    def test_non_bijection_rejected(self, three_node_graph):
        with pytest.raises(ValueError, match="bijection"):
            permute_nodes(three_node_graph, [0, 0, 1])


class TestClassHistogram:
    def test_counts(self, cv):
        g = SceneGraph(nodes=(node(5), node(5), node(1)))
        counts = class_histogram(g, cv)
        assert counts[5] == 2 and counts[1] == 1
        assert counts.sum() == 3

    def test_empty(self, cv):
        assert class_histogram(SceneGraph(), cv).sum() == 0

    def test_set_class_shifts_one_count(self, cv):
        g = SceneGraph(nodes=(node(5), node(5), node(1)))
        edited = apply_edit(g, GraphEdit("set_class", index=0, object_class=6))
        before = class_histogram(g, cv)
        after = class_histogram(edited, cv)
        assert before[5] - after[5] == 1
        assert after[6] - before[6] == 1
        assert (np.delete(before, [5, 6]) == np.delete(after, [5, 6])).all()


def test_has_relation_understands_duals(three_node_graph, rv):
    # stored as (1, behind, 0); queries in both spellings agree
    assert has_relation(three_node_graph, 1, "behind", 0, rv)
    assert has_relation(three_node_graph, 0, "in_front_of", 1, rv)
    assert not has_relation(three_node_graph, 1, "in_front_of", 0, rv)
