"""End-to-end pipeline: reduce, iterate the budget, search, verify.

``solve`` walks k upward; for each candidate AAF at budget k it builds the
extended AAF, applies the invisible-node bound, and searches the wiring-guess
space for a reconstructible CNET.  The first solution that survives full
verification (induced network displays all three original trees within
budget) is returned, so the reported hybridization number is optimal.
"""

from __future__ import annotations

import os
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

from .aaf_search import AafCandidate, enumerate_aafs
from .errors import BudgetExceeded, InputError, InternalInconsistency, NoSolutionWithin
from .extended_aaf import ExtendedAAF, description_count
from .forests import Forest, is_acyclic_agreement_forest
from .networks import (
    Network,
    displays,
    hybridization_number,
    induce_network,
    network_from_tree,
)
from .reconstruct import search_cnet
from .trees import (
    RHO,
    PhyloTree,
    TaxonMap,
    _to_builder,
    common_pendant_subtree_reduction,
    expand_map,
    isomorphic,
    parse_newick,
    random_tree,
)


@dataclass
class Instance:
    """Three input trees plus their common-pendant-subtree reduction."""

    trees: Tuple[PhyloTree, PhyloTree, PhyloTree]
    reduced: Tuple[PhyloTree, PhyloTree, PhyloTree]
    reduction: TaxonMap

    @classmethod
    def from_trees(cls, t1: PhyloTree, t2: PhyloTree, t3: PhyloTree) -> "Instance":
        trees = (t1, t2, t3)
        labels = t1.leaf_labels()
        if t2.leaf_labels() != labels or t3.leaf_labels() != labels:
            raise InputError("the three trees must share one taxon set")
        for t in trees:
            t.check_instance_tree()
        reduced, mapping = common_pendant_subtree_reduction(trees)
        return cls(trees, tuple(reduced), mapping)

    @classmethod
    def from_newicks(cls, texts: Sequence[str]) -> "Instance":
        if len(texts) != 3:
            raise InputError(f"expected exactly 3 trees, got {len(texts)}")
        return cls.from_trees(*(parse_newick(s) for s in texts))

    @property
    def taxa(self) -> frozenset:
        return self.trees[0].leaf_labels() - {RHO}


@dataclass
class Solution:
    network: Network
    k: int
    certificate: dict = field(default_factory=dict)


def _candidate_cost(fstar: ExtendedAAF) -> int:
    return description_count(fstar)


def _try_candidate(reduced: Sequence[PhyloTree], forest: Forest, k: int):
    """Search one candidate AAF; returns (cnet, description) or None."""
    fstar = ExtendedAAF(forest, tuple(reduced))
    if k >= 1 and any(len(inv) > k - 1 for inv in fstar.invisible):
        return None
    found = search_cnet(fstar, max_hyb=k)
    if found is None:
        return None
    return found


def _worker(args):
    reduced, blocks, k = args
    out = _try_candidate(reduced, Forest(blocks), k)
    if out is None:
        return None
    cnet, d, sig = out
    return cnet, d.to_json(), sig.canonical()


def solve(inst: Instance, max_k: int = 8, prune: bool = True,
          trace: Optional[list] = None, threads: Optional[int] = None,
          seed: Optional[int] = None, time_limit: Optional[float] = None) -> Solution:
    """Smallest-k hybridization network for the instance, with certificate.

    Raises NoSolutionWithin when every budget up to max_k fails.  A seed
    shuffles the candidate order inside each budget (every budget is still
    exhausted, so the reported k stays optimal).  The time limit is checked
    between candidates and raises BudgetExceeded with the budget reached.
    """
    import time

    if threads is None:
        threads = int(os.environ.get("HYBNET_THREADS", "1"))
    rng = random.Random(seed) if seed is not None else None
    started = time.monotonic()

    def check_clock(k):
        if time_limit is not None and time.monotonic() - started > time_limit:
            raise BudgetExceeded(
                f"time limit {time_limit}s hit while searching budget {k}")

    reduced = inst.reduced
    for k in range(0, max_k + 1):
        check_clock(k)
        ordered: List[Tuple[int, int, AafCandidate, ExtendedAAF]] = []
        for pos, cand in enumerate(enumerate_aafs(reduced, k, prune=prune, trace=trace)):
            fstar = ExtendedAAF(cand.forest, reduced)
            if k >= 1 and any(len(inv) > k - 1 for inv in fstar.invisible):
                if trace is not None:
                    trace.append({"event": "invisible_prune", "k": k,
                                  "forest": cand.forest.sorted_blocks()})
                continue
            ordered.append((_candidate_cost(fstar), pos, cand, fstar))
        ordered.sort(key=lambda item: (item[0], item[1]))
        if rng is not None:
            rng.shuffle(ordered)
        if trace is not None:
            trace.append({"event": "budget", "k": k, "candidates": len(ordered)})

        found = None
        if threads > 1 and len(ordered) > 1:
            pool = ProcessPoolExecutor(max_workers=threads)
            try:
                for start in range(0, len(ordered), threads):
                    wave = ordered[start:start + threads]
                    jobs = [(reduced, tuple(c.forest.blocks), k) for _, _, c, _ in wave]
                    for item, result in zip(wave, pool.map(_worker, jobs)):
                        if result is not None:
                            out = _try_candidate(reduced, item[2].forest, k)
                            found = (item[2], out)
                            break
                    if found is not None:
                        break
            finally:
                pool.shutdown(wait=False, cancel_futures=True)
        else:
            for _, _, cand, fstar in ordered:
                check_clock(k)
                out = search_cnet(fstar, max_hyb=k)
                if out is not None:
                    found = (cand, out)
                    break
        if found is None:
            continue
        cand, (cnet, d, sig) = found
        net = expand_map(induce_network(cnet), inst.reduction)
        shown = [displays(net, t) for t in inst.trees]
        k_net = hybridization_number(net)
        if not all(shown) or k_net > k:
            raise InternalInconsistency(
                f"verification failed: displays={shown}, k={k_net} at budget {k}")
        certificate = {
            "k": k_net,
            "forest": cand.forest.sorted_blocks(),
            "chain_guess": cand.chain_guess.describe(),
            "invisible_counts": list(d.fstar.n_invisible()),
            "description": d.to_json(),
            "displays": shown,
        }
        if trace is not None:
            trace.append({"event": "solution", "k": k_net,
                          "forest": cand.forest.sorted_blocks()})
        return Solution(net, k_net, certificate)
    raise NoSolutionWithin(max_k)


# ---------------------------------------------------------------------------
# oracles
# ---------------------------------------------------------------------------


def oracle_two_tree_maaf(t1: PhyloTree, t2: PhyloTree, max_k: int = 8) -> int:
    """Two-tree hybridization number via brute-force acyclic agreement
    forests: smallest number of edge deletions of t1 whose taxon partition is
    an AAF of both trees."""
    import itertools

    if t1.leaf_labels() != t2.leaf_labels():
        raise InputError("trees must share one taxon set")
    from .aaf_search import _partition_after_deletion

    edge_nodes = [v for v in range(t1.n_nodes) if t1.parent[v] is not None]
    for j in range(0, max_k + 1):
        for subset in itertools.combinations(edge_nodes, j):
            blocks = _partition_after_deletion(t1, subset)
            forest = Forest(blocks)
            if is_acyclic_agreement_forest(forest, (t1, t2)):
                return len(forest) - 1
    raise BudgetExceeded(f"no two-tree AAF within {max_k} deletions")


def add_reticulation(n: Network, i: int, j: int) -> Optional[Network]:
    """Subdivide edge i (tail) and edge j (head) and connect them; None when
    the result would be cyclic.  j == i splits the lower half of edge i."""
    edges = list(n.edges)
    a, b = edges[i]
    u, w = n.n_nodes, n.n_nodes + 1
    edges[i] = (a, u)
    lower = (u, b)
    edges.append(lower)
    if j == i:
        c, d = lower
        edges[-1] = (c, w)
        edges.append((w, d))
    else:
        c, d = edges[j]
        edges[j] = (c, w)
        edges.append((w, d))
    edges.append((u, w))
    out = Network(n.n_nodes + 2, edges, n.label)
    return out if out.is_acyclic() else None


def oracle_exhaustive_networks(inst: Instance, max_k: int = 2, max_n: int = 5) -> Optional[int]:
    """Smallest k <= max_k admitting a network that displays all three trees,
    by exhausting every network obtainable from the first tree by adding k
    reticulation edges (which covers every network displaying it)."""
    if len(inst.taxa) > max_n or max_k > 3:
        raise BudgetExceeded(f"oracle limited to {max_n} taxa and 3 reticulations")
    t1, t2, t3 = inst.trees
    if isomorphic(t1, t2) and isomorphic(t1, t3):
        return 0
    level = [network_from_tree(t1)]
    for k in range(1, max_k + 1):
        nxt: List[Network] = []
        for net in level:
            m = len(net.edges)
            for i in range(m):
                for j in range(m):
                    cand = add_reticulation(net, i, j)
                    if cand is None:
                        continue
                    if displays(cand, t2) and displays(cand, t3):
                        return k
                    nxt.append(cand)
        level = nxt
    return None


def all_optimal_networks(inst: Instance, k: int) -> Iterable[Network]:
    """Every network with exactly k reticulations displaying all three trees
    (tiny instances only; grown from the first tree)."""
    level = [network_from_tree(inst.trees[0])]
    for _ in range(k):
        level = [cand
                 for net in level
                 for i in range(len(net.edges))
                 for j in range(len(net.edges))
                 if (cand := add_reticulation(net, i, j)) is not None]
    for net in level:
        if displays(net, inst.trees[1]) and displays(net, inst.trees[2]):
            yield net


# ---------------------------------------------------------------------------
# instance generation
# ---------------------------------------------------------------------------


def rspr(t: PhyloTree, rng: random.Random) -> PhyloTree:
    """One random rooted subtree-prune-and-regraft move."""
    for _ in range(200):
        candidates = [v for v in range(t.n_nodes)
                      if t.parent[v] is not None and t.parent[t.parent[v]] is not None]
        v = rng.choice(candidates)
        u = t.parent[v]
        g = t.parent[u]
        s = next(c for c in t.children[u] if c != v)
        # remaining tree: drop v's subtree, splice u out
        pruned = set()
        stack = [v]
        while stack:
            x = stack.pop()
            pruned.add(x)
            stack.extend(t.children[x])
        targets = [w for w in range(t.n_nodes)
                   if w not in pruned and t.parent[w] is not None
                   and w not in (u, s) and t.parent[w] != u]
        if not targets:
            continue
        w = rng.choice(targets)
        b = _to_builder(t)
        b.children[g][b.children[g].index(u)] = s
        b.parent[s] = g
        p = b.parent[w]
        b.children[p][b.children[p].index(w)] = u
        b.parent[u] = p
        b.children[u] = [v, w]
        b.parent[w] = u
        return b.freeze(t.root)
    raise InternalInconsistency("no valid rSPR move found")


def gen_random(n: int, moves: int, seed: int) -> Instance:
    """Random instance: a base tree and two trees `moves` rSPR moves away."""
    if n < 2:
        raise InputError("need at least two taxa")
    rng = random.Random(seed)
    labels = [f"t{i + 1}" for i in range(n)]
    t1 = random_tree(labels, rng)
    def walk(t):
        for _ in range(moves):
            t = rspr(t, rng)
        return t
    return Instance.from_trees(t1, walk(t1), walk(t1))
