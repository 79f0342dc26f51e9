import itertools
import random

import networkx as nx
import pytest

from hybnet.forests import (
    Forest,
    inheritance_graph,
    is_acyclic_agreement_forest,
    is_agreement_forest,
    is_forest_for,
    spanning_nodes,
    spanning_root,
)
from hybnet.trees import RHO, parse_newick, restrict


def nx_spanning_nodes(t, block):
    g = nx.Graph((t.parent[v], v) for v in range(t.n_nodes) if t.parent[v] is not None)
    g.add_nodes_from(range(t.n_nodes))
    nodes = [t.node(x) for x in block]
    keep = set()
    for a, b in itertools.combinations_with_replacement(nodes, 2):
        keep.update(nx.shortest_path(g, a, b))
    return keep


def ref_is_forest_for(t, blocks):
    sets = [nx_spanning_nodes(t, b) for b in blocks]
    return all(not (sets[i] & sets[j]) for i, j in itertools.combinations(range(len(sets)), 2))


TRIPLET = parse_newick("((a,b),c);")


def test_single_block_is_forest():
    f = Forest([TRIPLET.leaf_labels()])
    assert is_forest_for(f, TRIPLET)


def test_disjoint_blocks_on_triplet():
    f = Forest([{"a", "b"}, {"c", RHO}])
    assert is_forest_for(f, TRIPLET)
    assert ref_is_forest_for(TRIPLET, [{"a", "b"}, {"c", RHO}])


def test_overlapping_spanning_subtrees_rejected():
    f = Forest([{"a", "c"}, {"b", RHO}])
    assert not is_forest_for(f, TRIPLET)
    assert not ref_is_forest_for(TRIPLET, [{"a", "c"}, {"b", RHO}])


def test_spanning_nodes_matches_networkx_oracle():
    rng = random.Random(2)
    for _ in range(80):
        n = rng.randrange(3, 9)
        labels = [f"x{i}" for i in range(n)]
        rng.shuffle(labels)
        items = list(labels)
        while len(items) > 1:
            i = rng.randrange(len(items) - 1)
            items[i] = f"({items[i]},{items.pop(i + 1)})"
        t = parse_newick(items[0] + ";")
        pool = sorted(t.leaf_labels())
        block = rng.sample(pool, rng.randrange(1, n + 1))
        assert set(spanning_nodes(t, block)) == nx_spanning_nodes(t, block)
        r = spanning_root(t, block)
        assert all(t.is_ancestor(r, t.node(x)) for x in block)


def test_agreement_identical_trees_single_block():
    ts = [TRIPLET] * 3
    assert is_agreement_forest(Forest([TRIPLET.leaf_labels()]), ts)


def test_agreement_all_singletons_always():
    t1 = parse_newick("((a,b),(c,d));")
    t2 = parse_newick("((a,c),(b,d));")
    t3 = parse_newick("((a,d),(b,c));")
    f = Forest.singletons(t1.leaf_labels())
    assert is_agreement_forest(f, [t1, t2, t3])


def test_agreement_fails_when_restrictions_differ():
    t1 = parse_newick("(((a,b),c),d);")
    t2 = parse_newick("(((a,c),b),d);")  # b and c swapped
    f = Forest([{"a", "b", "c"}, {"d", RHO}])
    assert restrict(t1, {"a", "b", "c"}).canonical() != restrict(t2, {"a", "b", "c"}).canonical()
    assert not is_agreement_forest(f, [t1, t2, t1])


def test_inheritance_graph_single_block_no_edges():
    f = Forest([TRIPLET.leaf_labels()])
    ig = inheritance_graph(f, [TRIPLET] * 3)
    assert not ig.edges


def test_root_block_has_no_incoming_edges():
    t1 = parse_newick("((a,b),(c,d));")
    t2 = parse_newick("(((a,b),c),d);")
    f = Forest([{"a", "b"}, {"c", "d", RHO}])
    if is_agreement_forest(f, [t1, t2, t1]):
        ig = inheritance_graph(f, [t1, t2, t1])
        rho_block = f.root_block()
        assert all(b != rho_block for _, b in ig.edges)


def test_classic_cyclic_agreement_forest():
    # blocks {a,c} and {b,d} are an agreement forest of these two trees but
    # their inheritance graph has a 2-cycle
    t1 = parse_newick("((a,b),(c,d));")
    t2 = parse_newick("((c,b),(a,d));")
    f = Forest([{"a", "c"}, {"b", "d"}, {RHO}])
    ts = [t1, t2, t1]
    if is_agreement_forest(f, ts):
        ig = inheritance_graph(f, ts)
        ab = (frozenset({"a", "c"}), frozenset({"b", "d"}))
        ba = (ab[1], ab[0])
        assert ab in ig.edges and ba in ig.edges
        assert ig.has_cycle()
        assert not is_acyclic_agreement_forest(f, ts)


def test_cycle_detection_via_manual_check():
    rng = random.Random(9)
    for _ in range(40):
        n = rng.randrange(3, 7)
        labels = [f"x{i}" for i in range(n)]
        trees = []
        for _ in range(3):
            rng.shuffle(labels)
            items = list(labels)
            while len(items) > 1:
                i = rng.randrange(len(items) - 1)
                items[i] = f"({items[i]},{items.pop(i + 1)})"
            trees.append(parse_newick(items[0] + ";"))
        taxa = sorted(trees[0].leaf_labels())
        rng.shuffle(taxa)
        cut = rng.randrange(1, len(taxa))
        f = Forest([taxa[:cut], taxa[cut:]])
        if is_agreement_forest(f, trees):
            ig = inheritance_graph(f, trees)
            g = nx.DiGraph(list(ig.edges))
            g.add_nodes_from(ig.nodes)
            assert ig.has_cycle() == (not nx.is_directed_acyclic_graph(g))


def test_forest_json_roundtrip():
    f = Forest([{"b", "a"}, {RHO, "c"}])
    assert Forest.from_json(f.to_json()) == f
    assert f.to_json() == '[["a", "b"], ["c", "ρ"]]' or RHO in f.to_json()


from hypothesis import given, settings
from hypothesis import strategies as st


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(3, 8))
def test_singletons_always_acyclic_agreement_forest(seed, n):
    rng = random.Random(seed)
    trees = []
    for _ in range(3):
        labels = [f"x{i}" for i in range(n)]
        rng.shuffle(labels)
        items = list(labels)
        while len(items) > 1:
            i = rng.randrange(len(items) - 1)
            items[i] = f"({items[i]},{items.pop(i + 1)})"
        trees.append(parse_newick(items[0] + ";"))
    f = Forest.singletons(trees[0].leaf_labels())
    assert is_acyclic_agreement_forest(f, trees) == (
        not inheritance_graph(f, trees).has_cycle()
    )
    assert is_agreement_forest(f, trees)
