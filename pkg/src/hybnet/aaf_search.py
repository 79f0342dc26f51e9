"""Candidate-AAF enumeration for a given reticulation budget.

For every way of deciding, per common chain, whether the chain sits on a
single side of the network backbone or spreads one taxon per side, the
single-side chains are collapsed into one taxon each and every subset of at
most k edges of the first (collapsed) tree is deleted.  The taxon partitions
that survive the acyclic-agreement-forest test with at most k+1 blocks are
the candidates.  Guesses whose collapsed taxon count exceeds 5k-1 cannot
correspond to a network within budget and are pruned.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, Iterator, Optional, Sequence, Tuple

from .forests import Forest, is_acyclic_agreement_forest
from .trees import (
    RHO,
    Chain,
    PhyloTree,
    TaxonMap,
    collapse_chain,
    common_chains,
    isomorphic,
)

ONE_SIDE = "one_side"
SPREAD = "spread"


@dataclass(frozen=True)
class ChainGuess:
    cases: Tuple[Tuple[Chain, str], ...]

    def one_side_chains(self) -> Tuple[Chain, ...]:
        return tuple(c for c, case in self.cases if case == ONE_SIDE)

    def describe(self) -> dict:
        return {"+".join(c.taxa): case for c, case in self.cases}


@dataclass(frozen=True)
class AafCandidate:
    forest: Forest
    chain_guess: ChainGuess
    deleted_edges: Tuple[frozenset, ...]  # clade below each deleted edge

    def describe(self) -> dict:
        return {
            "forest": self.forest.sorted_blocks(),
            "chain_guess": self.chain_guess.describe(),
            "deleted_edges": [sorted(c) for c in self.deleted_edges],
        }


def chain_guesses(chains: Sequence[Chain]) -> Iterator[ChainGuess]:
    """Full binary enumeration, one_side before spread per chain, the chain
    list ordered as given (lexicographic overall)."""
    for combo in itertools.product((ONE_SIDE, SPREAD), repeat=len(chains)):
        yield ChainGuess(tuple(zip(chains, combo)))


def _partition_after_deletion(t: PhyloTree, deleted: Sequence[int]) -> list:
    """Blocks of leaf labels after deleting the in-edges of the given nodes;
    components without labels vanish."""
    drop = set(deleted)
    parent = list(range(t.n_nodes))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for v in range(t.n_nodes):
        p = t.parent[v]
        if p is not None and v not in drop:
            parent[find(v)] = find(p)
    blocks: Dict[int, set] = {}
    for v in range(t.n_nodes):
        if t.label[v] is not None and not (t.children[v] and t.label[v] != RHO):
            blocks.setdefault(find(v), set()).add(t.label[v])
    return list(blocks.values())


def enumerate_aafs(ts: Sequence[PhyloTree], k: int, prune: bool = True,
                   trace: Optional[list] = None) -> Iterator[AafCandidate]:
    """Stream of candidate AAFs for budget k, deduplicated, deterministic.

    Every deletion AAF of a hybridization network with hybridization number k
    for the instance appears in the stream (soundness of each emitted forest
    is checked directly, so extra candidates are harmless).
    """
    taxa = ts[0].leaf_labels() - {RHO}
    if k == 0:
        if isomorphic(ts[0], ts[1]) and isomorphic(ts[0], ts[2]):
            yield AafCandidate(Forest([taxa | {RHO}]), ChainGuess(()), ())
        return

    chains = common_chains(ts)
    seen_collapse: set = set()
    seen_partitions: set = set()
    for guess in chain_guesses(chains):
        collapsed = tuple(c for c in guess.one_side_chains() if len(c) >= 2)
        collapse_key = frozenset(c.taxa for c in collapsed)
        if collapse_key in seen_collapse:
            continue  # single-taxon chains collapse to themselves
        seen_collapse.add(collapse_key)
        count = len(taxa) - sum(len(c) - 1 for c in collapsed)
        if prune and count > 5 * k - 1:
            if trace is not None:
                trace.append({"event": "prune", "chain_guess": guess.describe(),
                              "taxa_left": count, "bound": 5 * k - 1})
            continue
        t1 = ts[0]
        mapping = TaxonMap()
        for c in collapsed:
            t1, m = collapse_chain(t1, c)
            mapping = mapping.merged(m)
        clades = t1.clades()
        edge_nodes = [v for v in range(t1.n_nodes) if t1.parent[v] is not None]
        for size in range(0, k + 1):
            for subset in itertools.combinations(edge_nodes, size):
                raw = _partition_after_deletion(t1, subset)
                blocks = frozenset(mapping.expand_labels(b, strict=False) for b in raw)
                if blocks in seen_partitions:
                    continue
                seen_partitions.add(blocks)
                if len(blocks) > k + 1:
                    continue
                forest = Forest(blocks)
                if is_acyclic_agreement_forest(forest, ts):
                    yield AafCandidate(
                        forest,
                        guess,
                        tuple(mapping.expand_labels(clades[v], strict=False) for v in subset),
                    )
