"""Extended AAFs: invisible nodes, component roots, wiring guesses,
the descendant DAG, and description enumeration.

Components of the extended forest are either AAF blocks (present in all
three trees, root = root of the spanning subtree) or invisible nodes of one
tree (nodes on no leaf-to-leaf path within a single block, the root leaf
counting as a leaf).  The wiring guess of a component root fixes how many
parent edges its image has in the network, which tree images use which
parent edge, and for each parent edge one tree whose image branches at the
edge's top endpoint.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from .forests import Forest, spanning_nodes, spanning_root
from .trees import RHO, PhyloTree

ALL_COLOURS = frozenset({0, 1, 2})


def invisible_nodes(t: PhyloTree, f: Forest) -> frozenset:
    """Nodes of t on no path between two leaves of the same block."""
    visible = set()
    for block in f.blocks:
        visible.update(spanning_nodes(t, block))
    return frozenset(v for v in range(t.n_nodes) if v not in visible)


# ---------------------------------------------------------------------------
# components
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Component:
    """Either an AAF block or one invisible node of one tree."""

    kind: str  # "block" or "inode"
    block: Optional[frozenset] = None
    tree: Optional[int] = None
    clade: Optional[frozenset] = None  # leaf labels below the invisible node

    def key(self):
        if self.kind == "block":
            return (0, tuple(sorted(self.block)), -1)
        return (1, tuple(sorted(self.clade)), self.tree)

    @property
    def is_rho(self) -> bool:
        return self.kind == "block" and RHO in self.block

    def name(self) -> str:
        if self.kind == "block":
            return "{" + ",".join(sorted(self.block)) + "}"
        return f"I(T{self.tree + 1}:{{{','.join(sorted(self.clade))}}})"


class ExtendedAAF:
    """An AAF together with the invisible nodes of each tree and the
    per-tree representative node of every component root."""

    def __init__(self, forest: Forest, trees: Sequence[PhyloTree]):
        self.forest = forest
        self.trees = tuple(trees)
        clades = [t.clades() for t in self.trees]
        self.invisible: Tuple[frozenset, ...] = tuple(
            invisible_nodes(t, forest) for t in self.trees
        )

        comps: List[Component] = [Component("block", block=b) for b in forest.blocks]
        for i, t in enumerate(self.trees):
            for v in sorted(self.invisible[i]):
                comps.append(Component("inode", tree=i, clade=clades[i][v]))
        comps.sort(key=Component.key)
        self.components = tuple(comps)
        self.index = {c: i for i, c in enumerate(comps)}

        # representative node of each component root, per tree
        self.rep: Dict[Component, Dict[int, int]] = {}
        for c in comps:
            if c.kind == "block":
                self.rep[c] = {i: spanning_root(t, c.block) for i, t in enumerate(self.trees)}
            else:
                t = self.trees[c.tree]
                node = next(v for v in self.invisible[c.tree] if clades[c.tree][v] == c.clade)
                self.rep[c] = {c.tree: node}

        # owner map per tree: every node belongs to exactly one component
        self.owner: List[Dict[int, Component]] = []
        self.span: Dict[Tuple[Component, int], frozenset] = {}
        for i, t in enumerate(self.trees):
            own: Dict[int, Component] = {}
            for c in comps:
                if c.kind == "block":
                    nodes = spanning_nodes(t, c.block)
                    self.span[(c, i)] = nodes
                    for v in nodes:
                        own[v] = c
                elif c.tree == i:
                    own[self.rep[c][i]] = c
            self.owner.append(own)
        self.tree_clades = clades

    def shape_of(self, c: Component) -> PhyloTree:
        """The component tree of a block (restriction of the first tree)."""
        from .trees import restrict

        if not hasattr(self, "_shapes"):
            self._shapes: Dict[Component, PhyloTree] = {}
        if c not in self._shapes:
            self._shapes[c] = restrict(self.trees[0], c.block)
        return self._shapes[c]

    @classmethod
    def synthetic(cls, n_blocks: int, inode_trees: Sequence[int]) -> "ExtendedAAF":
        """Component skeleton with the given block count and invisible-node
        tree assignment; only good for guess counting and enumeration."""
        self = cls.__new__(cls)
        blocks = [frozenset({RHO, "s0"})] + [frozenset({f"s{i + 1}"}) for i in range(n_blocks - 1)]
        comps = [Component("block", block=b) for b in blocks]
        comps += [Component("inode", tree=t, clade=frozenset({f"v{i}"}))
                  for i, t in enumerate(inode_trees)]
        comps.sort(key=Component.key)
        self.forest = Forest(blocks)
        self.trees = ()
        self.invisible = ()
        self.components = tuple(comps)
        self.index = {c: i for i, c in enumerate(comps)}
        self.rep = {}
        self.owner = []
        self.span = {}
        self.tree_clades = []
        return self

    @property
    def rho_component(self) -> Component:
        return next(c for c in self.components if c.is_rho)

    def component_of_block(self, block) -> Component:
        return next(c for c in self.components if c.kind == "block" and c.block == frozenset(block))

    def n_invisible(self) -> Tuple[int, ...]:
        return tuple(len(s) for s in self.invisible)

    def guess_kind(self, c: Component):
        if c.is_rho:
            return RhoRoot()
        if c.kind == "block":
            return AafRoot()
        return INode(c.tree)

    def describe(self) -> dict:
        reps = {
            c.name(): {f"T{i + 1}": sorted(self.tree_clades[i][node])
                       for i, node in sorted(self.rep[c].items())}
            for c in self.components
        }
        return {
            "forest": self.forest.sorted_blocks(),
            "invisible": [sorted(sorted(self.tree_clades[i][v]) for v in self.invisible[i])
                          for i in range(len(self.trees))],
            "components": [c.name() for c in self.components],
            "representatives": reps,
        }


# ---------------------------------------------------------------------------
# wiring guesses
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class INode:
    tree: int


@dataclass(frozen=True)
class AafRoot:
    pass


@dataclass(frozen=True)
class RhoRoot:
    pass


@dataclass(frozen=True)
class WiringGuess:
    """Parent edges of a component root's image: per edge, its colour set and
    the split colour guessed for the edge's top endpoint."""

    edges: Tuple[Tuple[frozenset, int], ...]

    def __post_init__(self):
        object.__setattr__(
            self,
            "edges",
            tuple(sorted(self.edges, key=lambda e: (tuple(sorted(e[0])), e[1]))),
        )

    def colour_union(self) -> frozenset:
        out = frozenset()
        for colours, _ in self.edges:
            out |= colours
        return out

    def describe(self) -> list:
        return [{"colours": sorted(f"T{c + 1}" for c in colours), "split": f"T{split + 1}"}
                for colours, split in self.edges]


def _partitions_of(colours: Tuple[int, ...]) -> Iterator[Tuple[frozenset, ...]]:
    """Set partitions of the colour set, each part becoming one parent edge."""
    if not colours:
        yield ()
        return
    first, rest = colours[0], colours[1:]
    for sub in _partitions_of(rest):
        yield (frozenset({first}),) + sub
        for i, part in enumerate(sub):
            yield sub[:i] + (part | {first},) + sub[i + 1:]


def enumerate_wiring_guesses(kind) -> Tuple[WiringGuess, ...]:
    """All wiring guesses for the given root kind, in canonical order.

    Invisible-node roots of tree T admit 17 guesses (T must appear on some
    parent edge), AAF roots 10 (all three colours must appear), and the root
    component containing RHO exactly one parentless guess.
    """
    if isinstance(kind, RhoRoot):
        return (WiringGuess(()),)
    if isinstance(kind, INode):
        unions = [u for u in _subsets(ALL_COLOURS) if kind.tree in u]
    elif isinstance(kind, AafRoot):
        unions = [ALL_COLOURS]
    else:
        raise TypeError(f"unknown root kind {kind!r}")
    out = set()
    for union in unions:
        partitions = {frozenset(p) for p in _partitions_of(tuple(sorted(union)))}
        for partition in partitions:
            parts = sorted(partition, key=lambda s: tuple(sorted(s)))
            for splits in itertools.product(*[sorted(p) for p in parts]):
                out.add(WiringGuess(tuple(zip(parts, splits))))
    return tuple(sorted(out, key=lambda g: tuple((tuple(sorted(c)), s) for c, s in g.edges)))


def _subsets(colours: frozenset):
    items = sorted(colours)
    for r in range(1, len(items) + 1):
        for combo in itertools.combinations(items, r):
            yield frozenset(combo)


_GUESS_CACHE: Dict[object, Tuple[WiringGuess, ...]] = {}


def guesses_for(kind) -> Tuple[WiringGuess, ...]:
    key = kind
    if key not in _GUESS_CACHE:
        _GUESS_CACHE[key] = enumerate_wiring_guesses(kind)
    return _GUESS_CACHE[key]


# ---------------------------------------------------------------------------
# descendant DAG
# ---------------------------------------------------------------------------


def descendant_dag(fstar: ExtendedAAF) -> Dict[Component, frozenset]:
    """Edges r_C -> r_C' where, in some tree, C' is the nearest component
    root properly above C's representative.  Returned as successor sets."""
    succ: Dict[Component, set] = {c: set() for c in fstar.components}
    for i, t in enumerate(fstar.trees):
        for c in fstar.components:
            node = fstar.rep[c].get(i)
            if node is None:
                continue
            v = t.parent[node]
            if v is None:
                continue
            succ[c].add(fstar.owner[i][v])
    return {c: frozenset(s) for c, s in succ.items()}


def dag_sources(fstar: ExtendedAAF) -> List[Component]:
    succ = descendant_dag(fstar)
    with_in = set()
    for c, targets in succ.items():
        with_in.update(targets)
    return [c for c in fstar.components if c not in with_in]


# ---------------------------------------------------------------------------
# descriptions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Description:
    """One wiring guess per component root, plus the extended AAF itself."""

    fstar: ExtendedAAF
    guesses: Tuple[Tuple[Component, WiringGuess], ...]

    def guess_of(self, c: Component) -> WiringGuess:
        for comp, g in self.guesses:
            if comp == c:
                return g
        raise KeyError(c.name())

    def to_json(self) -> str:
        payload = {
            "fstar": self.fstar.describe(),
            "guesses": {c.name(): g.describe() for c, g in self.guesses},
        }
        return json.dumps(payload, ensure_ascii=False, sort_keys=True)


def description_count(fstar: ExtendedAAF) -> int:
    n = 1
    for c in fstar.components:
        n *= len(guesses_for(fstar.guess_kind(c)))
    return n


def enumerate_descriptions(fstar: ExtendedAAF) -> Iterator[Description]:
    """Cartesian product of the per-root guess lists, deterministic order.

    Buddy consistency is not filtered here; descriptions whose forced buddies
    carry different guesses are rejected during reconstruction.
    """
    comps = fstar.components
    pools = [guesses_for(fstar.guess_kind(c)) for c in comps]
    for combo in itertools.product(*pools):
        yield Description(fstar, tuple(zip(comps, combo)))
