"""Topology families: adjacency, distances, edge-list parsing."""

import random

import pytest

from ccsim.errors import DomainError, EdgeListFormatError, GraphValidationError
from ccsim.graphs import FiniteGraph, Lattice, Tree, complete_graph, parse_edge_list


def test_z2_origin_neighbors_fixed_order():
    z2 = Lattice(2)
    assert z2.neighbors((0, 0)) == [(1, 0), (-1, 0), (0, 1), (0, -1)]


def test_tree_root_has_d_plus_1_children():
    t2 = Tree(2)
    assert t2.neighbors(()) == [(0,), (1,), (2,)]
    # non-root: parent first, then d children
    assert t2.neighbors((1,)) == [(), (1, 0), (1, 1)]
    assert len(t2.neighbors((2, 0, 1))) == 3


def test_k5_neighbors():
    k5 = complete_graph(5)
    assert k5.neighbors(0) == [1, 2, 3, 4]
    assert k5.vertices == (0, 1, 2, 3, 4)


def test_symmetry_exhaustive_on_finite():
    g = parse_edge_list("0 1\n1 2\n2 3\n3 0\n0 2")
    for u in g.vertices:
        for w in g.neighbors(u):
            assert u in g.neighbors(w)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_lattice_symmetry_and_regularity_sampled(d):
    rng = random.Random(4)
    lat = Lattice(d)
    for _ in range(200):
        v = tuple(rng.randint(-40, 40) for _ in range(d))
        nbrs = lat.neighbors(v)
        assert len(nbrs) == 2 * d
        assert len(set(nbrs)) == 2 * d
        for w in nbrs:
            assert v in lat.neighbors(w)


@pytest.mark.parametrize("d", [1, 2, 4])
def test_tree_symmetry_and_regularity_sampled(d):
    rng = random.Random(9)
    tree = Tree(d)
    for _ in range(200):
        depth = rng.randint(0, 8)
        v = ()
        if depth:
            v = (rng.randint(0, d),) + tuple(rng.randint(0, d - 1) for _ in range(depth - 1))
        nbrs = tree.neighbors(v)
        assert len(nbrs) == d + 1
        for w in nbrs:
            assert v in tree.neighbors(w)


def test_lattice_distance_is_l1():
    z2 = Lattice(2)
    assert z2.distance((0, 0), (2, -1)) == 3
    assert z2.distance((5, 5), (5, 5)) == 0


def test_tree_distance_via_common_prefix():
    t2 = Tree(2)
    assert t2.distance((0,), (1,)) == 2  # two children of the root
    assert t2.distance((), (1, 0, 1)) == 3
    assert t2.distance((2, 1), (2, 1)) == 0


def test_finite_distance_bfs():
    g = parse_edge_list("0 1\n1 2\n2 3")
    assert g.distance(0, 3) == 3
    assert g.distance(2, 0) == 2


def test_triangle_inequality_sampled():
    rng = random.Random(11)
    for topo, sample in [
        (Lattice(2), lambda: (rng.randint(-8, 8), rng.randint(-8, 8))),
        (Tree(2), lambda: (rng.randint(0, 2),) + tuple(rng.randint(0, 1) for _ in range(rng.randint(0, 5)))),
    ]:
        for _ in range(100):
            x, y, z = sample(), sample(), sample()
            assert topo.distance(x, z) <= topo.distance(x, y) + topo.distance(y, z)


def test_boxed_lattice_marks_offbox_neighbors():
    box = Lattice(2, box=(3, 3))
    nbrs = box.neighbors((0, 0))
    assert len(nbrs) == 4  # degree stays 2d
    inside = [w for w in nbrs if box.contains(w)]
    outside = [w for w in nbrs if not box.contains(w)]
    assert sorted(inside) == [(0, 1), (1, 0)]
    assert sorted(outside) == [(-1, 0), (0, -1)]
    assert box.origin() == (1, 1)
    with pytest.raises(DomainError):
        box.neighbors((5, 5))


def test_lattice_rejects_invalid_vertices():
    with pytest.raises(DomainError):
        Lattice(2).neighbors((0, 0, 0))
    with pytest.raises(DomainError):
        Lattice(0)


def test_parse_edge_list_basics():
    g = parse_edge_list("0 1\n1 2")
    assert g.vertices == (0, 1, 2)
    assert g.neighbors(1) == [0, 2]


def test_parse_edge_list_comments_and_duplicates():
    g = parse_edge_list("# a path\n0 1\n\n1 0\n1 2\n")
    assert g.neighbors(0) == [1]
    assert g.neighbors(1) == [0, 2]


def test_parse_edge_list_accepts_bytes_and_streams(tmp_path):
    assert parse_edge_list(b"0 1\n1 2").vertices == (0, 1, 2)
    path = tmp_path / "g.edges"
    path.write_text("0 1\n1 2\n")
    with open(path) as fh:
        assert parse_edge_list(fh).vertices == (0, 1, 2)


def test_parse_edge_list_rejects_self_loop():
    with pytest.raises(EdgeListFormatError):
        parse_edge_list("0 0")


def test_parse_edge_list_rejects_disconnected():
    with pytest.raises(GraphValidationError):
        parse_edge_list("0 1\n2 3")


def test_parse_edge_list_rejects_garbage():
    with pytest.raises(EdgeListFormatError):
        parse_edge_list("0 one")
    with pytest.raises(EdgeListFormatError):
        parse_edge_list("0 1 2")
    with pytest.raises(EdgeListFormatError):
        parse_edge_list("-1 0")
    with pytest.raises(EdgeListFormatError):
        parse_edge_list("# only comments\n")


def test_finite_graph_equality():
    assert parse_edge_list("0 1\n1 2") == parse_edge_list("1 2\n0 1")
    assert FiniteGraph([(0, 1)]) != FiniteGraph([(0, 2)])


def test_module_level_delegates():
    from ccsim.graphs import graph_distance, neighbors

    z2 = Lattice(2)
    assert neighbors(z2, (0, 0)) == z2.neighbors((0, 0))
    assert graph_distance(z2, (0, 0), (3, 4)) == 7
