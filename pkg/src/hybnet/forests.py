"""Forests as taxon partitions, agreement checking, and the inheritance graph."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from .trees import RHO, PhyloTree, restrict


@dataclass(frozen=True)
class Forest:
    """A partition of the taxa (RHO included) into nonempty blocks."""

    blocks: frozenset

    def __init__(self, blocks: Iterable[Iterable[str]]):
        object.__setattr__(self, "blocks", frozenset(frozenset(b) for b in blocks))
        if any(not b for b in self.blocks):
            raise ValueError("forest blocks must be nonempty")

    def __iter__(self):
        return iter(self.sorted_blocks())

    def __len__(self):
        return len(self.blocks)

    def labels(self) -> frozenset:
        out = set()
        for b in self.blocks:
            out.update(b)
        return frozenset(out)

    def sorted_blocks(self) -> list:
        return sorted((sorted(b) for b in self.blocks))

    def block_of(self, label: str) -> frozenset:
        for b in self.blocks:
            if label in b:
                return b
        raise KeyError(label)

    def root_block(self) -> frozenset:
        return self.block_of(RHO)

    def to_json(self) -> str:
        return json.dumps(self.sorted_blocks(), ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "Forest":
        return cls(json.loads(text))

    @classmethod
    def singletons(cls, labels: Iterable[str]) -> "Forest":
        return cls([s] for s in labels)


@dataclass(frozen=True)
class InheritanceGraph:
    """Directed graph on forest blocks: (F, F') present when some input tree
    has a directed path from the root of T(L(F)) to the root of T(L(F'))."""

    nodes: frozenset
    edges: frozenset  # pairs (block, block)

    def has_cycle(self) -> bool:
        succ = {}
        for a, b in self.edges:
            succ.setdefault(a, []).append(b)
        state = {}

        for start in self.nodes:
            if state.get(start):
                continue
            stack = [(start, iter(succ.get(start, ())))]
            state[start] = 1
            while stack:
                node, it = stack[-1]
                advanced = False
                for nxt in it:
                    if state.get(nxt) == 1:
                        return True
                    if nxt not in state:
                        state[nxt] = 1
                        stack.append((nxt, iter(succ.get(nxt, ()))))
                        advanced = True
                        break
                if not advanced:
                    state[node] = 2
                    stack.pop()
        return False


def spanning_nodes(t: PhyloTree, block: Iterable[str]) -> frozenset:
    """Node set of T(L(block)): every node on a path between block leaves."""
    nodes = [t.node(x) for x in block]
    if len(nodes) == 1:
        return frozenset(nodes)
    count = [0] * t.n_nodes
    for v in nodes:
        count[v] = 1
    order = t.postorder()
    for v in order:
        for c in t.children[v]:
            count[v] += count[c]
    total = len(nodes)
    top = next(v for v in order if count[v] == total)
    keep = set()
    stack = [top]
    while stack:
        v = stack.pop()
        if count[v] == 0:
            continue
        keep.add(v)
        stack.extend(c for c in t.children[v] if count[c] > 0)
    return frozenset(keep)


def spanning_root(t: PhyloTree, block: Iterable[str]) -> int:
    """Root node of T(L(block))."""
    nodes = {t.node(x) for x in block}
    if len(nodes) == 1:
        return next(iter(nodes))
    count = [0] * t.n_nodes
    for v in nodes:
        count[v] = 1
    order = t.postorder()
    for v in order:
        for c in t.children[v]:
            count[v] += count[c]
    return next(v for v in order if count[v] == len(nodes))


def is_forest_for(f: Forest, t: PhyloTree) -> bool:
    """True iff the spanning subtrees of the blocks are pairwise node-disjoint."""
    seen = set()
    for block in f.blocks:
        nodes = spanning_nodes(t, block)
        if seen & nodes:
            return False
        seen.update(nodes)
    return True


def is_agreement_forest(f: Forest, ts: Sequence[PhyloTree]) -> bool:
    """Forest for every tree, with pairwise isomorphic block restrictions."""
    if f.labels() != ts[0].leaf_labels():
        return False
    for t in ts:
        if not is_forest_for(f, t):
            return False
    for block in f.blocks:
        if len(block) == 1:
            continue
        shapes = {restrict(t, block).canonical() for t in ts}
        if len(shapes) > 1:
            return False
    return True


def inheritance_graph(f: Forest, ts: Sequence[PhyloTree]) -> InheritanceGraph:
    edges = set()
    for t in ts:
        roots = {block: spanning_root(t, block) for block in f.blocks}
        for a in f.blocks:
            for b in f.blocks:
                if a is not b and a != b:
                    if t.is_ancestor(roots[a], roots[b]) and roots[a] != roots[b]:
                        edges.add((a, b))
    return InheritanceGraph(nodes=f.blocks, edges=frozenset(edges))


def is_acyclic_agreement_forest(f: Forest, ts: Sequence[PhyloTree]) -> bool:
    return is_agreement_forest(f, ts) and not inheritance_graph(f, ts).has_cycle()
