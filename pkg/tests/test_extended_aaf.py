import itertools

import pytest

from hybnet.extended_aaf import (
    ALL_COLOURS,
    AafRoot,
    Component,
    Description,
    ExtendedAAF,
    INode,
    RhoRoot,
    WiringGuess,
    dag_sources,
    descendant_dag,
    description_count,
    enumerate_descriptions,
    enumerate_wiring_guesses,
    invisible_nodes,
)
from hybnet.forests import Forest
from hybnet.trees import RHO, parse_newick

# the worked reconstruction fixture: three trees, AAF with four blocks,
# four invisible nodes (one red, two green, one blue)
RED = parse_newick("(((c,d),(b,a)),e);")
GREEN = parse_newick("(a,(((b,c),d),e));")
BLUE = parse_newick("(a,(b,((c,d),e)));")
FIXTURE_TREES = (RED, GREEN, BLUE)
FIXTURE_FOREST = Forest([{"b"}, {"c"}, {"d"}, {"a", "e", RHO}])


def brute_force_guesses(kind):
    """Independent enumeration: all ways to pick 1..3 pairwise-disjoint
    nonempty colour sets plus one split colour inside each."""
    out = set()
    colours = sorted(ALL_COLOURS)
    singles = [frozenset(s) for r in (1, 2, 3) for s in itertools.combinations(colours, r)]
    for count in (1, 2, 3):
        for sets in itertools.combinations(singles, count):
            union = frozenset().union(*sets)
            if sum(len(s) for s in sets) != len(union):
                continue  # overlapping
            if isinstance(kind, INode) and kind.tree not in union:
                continue
            if isinstance(kind, AafRoot) and union != ALL_COLOURS:
                continue
            for splits in itertools.product(*[sorted(s) for s in sets]):
                out.add(tuple(sorted(zip(sets, splits), key=lambda e: (tuple(sorted(e[0])), e[1]))))
    return out


def test_wiring_guess_counts_exact():
    assert len(enumerate_wiring_guesses(INode(0))) == 17
    assert len(enumerate_wiring_guesses(INode(1))) == 17
    assert len(enumerate_wiring_guesses(INode(2))) == 17
    assert len(enumerate_wiring_guesses(AafRoot())) == 10
    assert len(enumerate_wiring_guesses(RhoRoot())) == 1


def test_wiring_guess_decomposition_1_3_3_10():
    guesses = enumerate_wiring_guesses(INode(0))
    by_union = {}
    for g in guesses:
        by_union.setdefault(tuple(sorted(g.colour_union())), []).append(g)
    sizes = {u: len(gs) for u, gs in by_union.items()}
    assert sizes == {(0,): 1, (0, 1): 3, (0, 2): 3, (0, 1, 2): 10}


def test_wiring_guesses_match_brute_force():
    for kind in (INode(0), INode(1), INode(2), AafRoot()):
        ours = {g.edges for g in enumerate_wiring_guesses(kind)}
        assert ours == brute_force_guesses(kind)


def test_wiring_guess_invariants():
    for kind in (INode(0), AafRoot()):
        for g in enumerate_wiring_guesses(kind):
            assert 1 <= len(g.edges) <= 3
            seen = set()
            for colours, split in g.edges:
                assert colours and split in colours
                assert not (seen & colours)
                seen |= colours
    assert enumerate_wiring_guesses(RhoRoot())[0].edges == ()


def test_invisible_single_block_empty():
    t = parse_newick("((a,b),c);")
    f = Forest([t.leaf_labels()])
    assert invisible_nodes(t, f) == frozenset()


def test_invisible_all_singletons_internal_nodes():
    t = parse_newick("((a,b),c);")
    f = Forest.singletons(t.leaf_labels())
    inv = invisible_nodes(t, f)
    assert inv == frozenset(v for v in range(t.n_nodes)
                            if t.children[v] and t.label[v] is None)
    assert len(inv) == 2


def test_fixture_invisible_counts():
    fstar = ExtendedAAF(FIXTURE_FOREST, FIXTURE_TREES)
    assert fstar.n_invisible() == (1, 2, 1)
    assert sum(fstar.n_invisible()) == 4
    inodes = [c for c in fstar.components if c.kind == "inode"]
    clades = {(c.tree, tuple(sorted(c.clade))) for c in inodes}
    assert clades == {
        (0, ("c", "d")),
        (1, ("b", "c")),
        (1, ("b", "c", "d")),
        (2, ("c", "d")),
    }


def test_descendant_dag_single_component():
    t = parse_newick("((a,b),c);")
    fstar = ExtendedAAF(Forest([t.leaf_labels()]), (t, t, t))
    dag = descendant_dag(fstar)
    assert list(dag.values()) == [frozenset()]


def test_descendant_dag_fixture_sources_are_b_c_d():
    fstar = ExtendedAAF(FIXTURE_FOREST, FIXTURE_TREES)
    sources = {c.name() for c in dag_sources(fstar)}
    assert sources == {"{b}", "{c}", "{d}"}


def test_descendant_dag_nested_blocks():
    t1 = parse_newick("(((a,b),c),d);")
    f = Forest([{"a", "b"}, {"c", "d", RHO}])
    fstar = ExtendedAAF(f, (t1, t1, t1))
    dag = descendant_dag(fstar)
    inner = fstar.component_of_block({"a", "b"})
    outer = fstar.component_of_block({"c", "d", RHO})
    assert dag[inner] == frozenset({outer})
    assert dag[outer] == frozenset()


def test_descendant_dag_is_acyclic_with_source():
    fstar = ExtendedAAF(FIXTURE_FOREST, FIXTURE_TREES)
    succ = descendant_dag(fstar)
    # Kahn: all nodes drain
    indeg = {c: 0 for c in succ}
    for targets in succ.values():
        for t in targets:
            indeg[t] += 1
    queue = [c for c, d in indeg.items() if d == 0]
    seen = 0
    while queue:
        c = queue.pop()
        seen += 1
        for t in succ[c]:
            indeg[t] -= 1
            if indeg[t] == 0:
                queue.append(t)
    assert seen == len(succ)
    assert dag_sources(fstar)


@pytest.mark.parametrize(
    "newicks,blocks,expected_f,expected_i",
    [
        ((("(a,b);",) * 3), [{"a", "b", RHO}], 1, 0),
    ],
)
def test_description_count_trivial(newicks, blocks, expected_f, expected_i):
    trees = tuple(parse_newick(s) for s in newicks)
    fstar = ExtendedAAF(Forest(blocks), trees)
    assert len(fstar.forest) == expected_f
    assert sum(fstar.n_invisible()) == expected_i
    descs = list(enumerate_descriptions(fstar))
    assert len(descs) == 1
    assert description_count(fstar) == 1


def test_two_block_forests_never_have_invisible_nodes():
    # every internal node has three taxa-bearing directions, so two blocks
    # always put one block across two directions of any candidate node
    t1 = parse_newick("((a,b),c);")
    t2 = parse_newick("((a,c),b);")
    fstar = ExtendedAAF(Forest([{"b"}, {"a", "c", RHO}]), (t1, t2, t2))
    assert sum(fstar.n_invisible()) == 0


@pytest.mark.parametrize("f,i", [(1, 0), (2, 1), (2, 2), (3, 2)])
def test_description_count_formula_synthetic(f, i):
    fstar = ExtendedAAF.synthetic(f, tuple(t % 3 for t in range(i)))
    assert description_count(fstar) == 10 ** (f - 1) * 17 ** i
    assert sum(1 for _ in enumerate_descriptions(fstar)) == 10 ** (f - 1) * 17 ** i


def test_description_stream_matches_formula_fixture():
    fstar = ExtendedAAF(FIXTURE_FOREST, FIXTURE_TREES)
    f, i = len(fstar.forest), sum(fstar.n_invisible())
    assert (f, i) == (4, 4)
    assert description_count(fstar) == 10 ** 3 * 17 ** 4


def test_description_json_is_deterministic():
    t = parse_newick("(a,b);")
    fstar = ExtendedAAF(Forest([{"a", "b", RHO}]), (t, t, t))
    d1, d2 = enumerate_descriptions(fstar), enumerate_descriptions(fstar)
    assert next(d1).to_json() == next(d2).to_json()
