"""Signature construction and component expansion.

A description fixes, for every component root of the extended AAF, the wiring
of its image's parent edges.  The signature is grown bottom-up: in each round
one *free* root is processed, the root edges representing its child edges are
merged into a fresh node, and new root edges are added according to the wiring
guess.  Every root edge carries, per colour, the tree node whose pendant
subtree it currently represents; that bookkeeping drives both the freeness
tests and the final expansion of AAF components.

Expansion replaces each block image by the block's tree, reattaching the
collected child edges onto component edges in an order consistent with all
three input trees (a topological order of the per-edge constraint DAG).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .errors import InternalInconsistency
from .extended_aaf import (
    AafRoot,
    Component,
    Description,
    ExtendedAAF,
    INode,
    RhoRoot,
    WiringGuess,
    guesses_for,
)
from .networks import CNET, CnetEdge, deletion_forest, induce_network, validate_cnet
from .trees import RHO


def component_edge_key(fstar: ExtendedAAF, comp: Component, tree_idx: int, u: int) -> frozenset:
    """Clade of the bottom endpoint of the component edge the attachment
    point u lies on (u is inside comp's spanning subtree of the tree)."""
    t = fstar.trees[tree_idx]
    span = fstar.span[(comp, tree_idx)]
    clades = fstar.tree_clades[tree_idx]
    b = next(w for w in t.children[u] if w in span)
    while True:
        kids = [w for w in t.children[b] if w in span]
        if len(kids) != 1:
            break
        b = kids[0]
    return frozenset(clades[b] & comp.block)


@dataclass(frozen=True)
class Rejection:
    # NoFreeNode | BuddyGuessMismatch | BranchConflict | CyclicAttachOrder
    # | DeletionForestMismatch
    reason: str
    witness: tuple = ()

    def __bool__(self):
        return False


@dataclass(frozen=True)
class SigEdge:
    eid: int
    top: Optional[int]
    bottom: int
    colours: frozenset
    top_colour: Optional[int]
    reps: tuple  # ((colour, tree_node), ...)


@dataclass(frozen=True)
class PartialSignature:
    """The contracted network: one node per set of component roots mapping to
    it, edges carrying colour sets and per-colour pendant representatives."""

    nodes: tuple  # ((nid, frozenset[Component]), ...)
    edges: tuple  # (SigEdge, ...)

    def canonical(self):
        names = {nid: tuple(sorted(c.name() for c in comps)) for nid, comps in self.nodes}
        rows = sorted(
            (names[e.top], names[e.bottom], tuple(sorted(e.colours)))
            for e in self.edges
        )
        return (tuple(sorted(names.values())), tuple(rows))

    def node_components(self) -> Dict[int, frozenset]:
        return dict(self.nodes)


class _Edge:
    __slots__ = ("eid", "colours", "top_colour", "reps", "bottom", "top")

    def __init__(self, eid, colours, top_colour, reps, bottom, top=None):
        self.eid = eid
        self.colours = colours
        self.top_colour = top_colour
        self.reps = reps  # dict colour -> tree node
        self.bottom = bottom
        self.top = top

    def clone(self):
        return _Edge(self.eid, self.colours, self.top_colour, dict(self.reps), self.bottom, self.top)


class _Builder:
    """Mutable signature state shared by description replay and search."""

    def __init__(self, fstar: ExtendedAAF):
        self.fstar = fstar
        self.processed: set = set()
        self.edges: Dict[int, _Edge] = {}
        self.nodes: Dict[int, frozenset] = {}
        self.live: Dict[Tuple[int, int], int] = {}  # (tree, pendant root) -> eid
        self.assigned: Dict[Component, WiringGuess] = {}
        self.next_edge = 0
        self.next_node = 0
        # pendants each component must eventually receive
        self.attached: Dict[Component, Tuple[Tuple[int, int], ...]] = {}
        for c in fstar.components:
            if c.kind == "inode":
                t = fstar.trees[c.tree]
                rep = fstar.rep[c][c.tree]
                self.attached[c] = tuple((c.tree, w) for w in t.children[rep])
            else:
                pend = []
                for i, t in enumerate(fstar.trees):
                    own = fstar.owner[i]
                    for w in range(t.n_nodes):
                        p = t.parent[w]
                        if p is not None and own[p] == c and own[w] != c:
                            pend.append((i, w))
                self.attached[c] = tuple(pend)

    def clone(self) -> "_Builder":
        out = _Builder.__new__(_Builder)
        out.fstar = self.fstar
        out.processed = set(self.processed)
        out.edges = {eid: e.clone() for eid, e in self.edges.items()}
        out.nodes = dict(self.nodes)
        out.live = dict(self.live)
        out.assigned = dict(self.assigned)
        out.next_edge = self.next_edge
        out.next_node = self.next_node
        out.attached = self.attached
        return out

    # -- freeness ----------------------------------------------------------

    def done(self) -> bool:
        return len(self.processed) == len(self.fstar.components)

    def _inode_child_edges(self, c: Component):
        e1 = self.live.get(self.attached[c][0])
        e2 = self.live.get(self.attached[c][1])
        if e1 is None or e2 is None:
            return None
        return self.edges[e1], self.edges[e2]

    def _inode_plan(self, c: Component):
        """Buddy map for processing c, or None when the merge cannot belong
        to any CNET (wrong top colours, mismatched or non-invisible parents)."""
        pair = self._inode_child_edges(c)
        if pair is None:
            return None
        e1, e2 = pair
        if e1.top_colour != c.tree or e2.top_colour != c.tree:
            return None
        buddies: Dict[int, Component] = {}
        for s in (e1.colours & e2.colours) - {c.tree}:
            t = self.fstar.trees[s]
            w1 = t.parent[e1.reps[s]]
            w2 = t.parent[e2.reps[s]]
            if w1 is None or w1 != w2:
                return None
            comp = self.fstar.owner[s].get(w1)
            if comp is None or comp.kind != "inode" or comp.tree != s or comp in self.processed:
                return None
            buddies[s] = comp
        return e1, e2, buddies

    def _block_ready(self, c: Component) -> bool:
        eids = set()
        for p in self.attached[c]:
            eid = self.live.get(p)
            if eid is None:
                return False
            eids.add(eid)
        for eid in eids:
            e = self.edges[eid]
            for s in e.colours:
                t = self.fstar.trees[s]
                parent = t.parent[e.reps[s]]
                if parent is None or self.fstar.owner[s][parent] != c:
                    return False
        return True

    def free_components(self, guesses: Optional[Dict[Component, WiringGuess]] = None):
        out = []
        for c in self.fstar.components:
            if c in self.processed:
                continue
            if c.kind == "inode":
                plan = self._inode_plan(c)
                if plan is None:
                    continue
                if guesses is not None:
                    e1, e2, _ = plan
                    if guesses[c].colour_union() != (e1.colours | e2.colours):
                        continue
                out.append(c)
            else:
                if self._block_ready(c):
                    out.append(c)
        return out

    # -- processing ----------------------------------------------------------

    def _new_edge(self, colours, top_colour, reps, bottom):
        eid = self.next_edge
        self.next_edge += 1
        self.edges[eid] = _Edge(eid, colours, top_colour, reps, bottom)
        for s, node in reps.items():
            self.live[(s, node)] = eid
        return eid

    def _new_node(self, comps) -> int:
        nid = self.next_node
        self.next_node += 1
        self.nodes[nid] = frozenset(comps)
        return nid

    def child_union(self, c: Component) -> Optional[frozenset]:
        plan = self._inode_plan(c)
        if plan is None:
            return None
        e1, e2, _ = plan
        return e1.colours | e2.colours

    def edge_doomed(self, e: _Edge) -> bool:
        """Creation-time reject of edges no component can ever consume.

        A root edge whose colour pendants target different components can
        only be consumed through an invisible-node merge, which requires its
        top colour's target to be an invisible node.  An edge targeting one
        block must have all its colours branch off the same component edge.
        """
        fstar = self.fstar
        targets = {}
        for s, node in e.reps.items():
            p = fstar.trees[s].parent[node]
            if p is None:
                return False
            targets[s] = fstar.owner[s][p]
        distinct = set(targets.values())
        if len(distinct) == 1:
            tgt = distinct.pop()
            if tgt.kind != "block" or len(tgt.block) == 1:
                return False
            keys = {
                component_edge_key(fstar, tgt, s,
                                   fstar.trees[s].parent[e.reps[s]])
                for s in e.colours
            }
            return len(keys) > 1
        return targets[e.top_colour].kind == "block"

    def apply(self, c: Component, guess: WiringGuess, trace: Optional[list] = None):
        """Merge c's child root edges into a fresh node and add its new parent
        edges.  Returns the ids of the newly created root edges."""
        first_new = self.next_edge
        fstar = self.fstar
        if c.kind == "inode":
            e1, e2, buddies = self._inode_plan(c)
            absorbed = sorted(buddies.values(), key=lambda b: fstar.index[b])
            nid = self._new_node([c, *absorbed])
            for e in (e1, e2):
                e.top = nid
                for s, node in e.reps.items():
                    self.live.pop((s, node), None)
            self.processed.add(c)
            self.assigned[c] = guess
            for b in absorbed:
                self.processed.add(b)
                self.assigned[b] = guess
            for colours, split in guess.edges:
                reps = {}
                for s in colours:
                    if s == c.tree:
                        reps[s] = fstar.rep[c][s]
                    elif s in buddies:
                        reps[s] = fstar.rep[buddies[s]][s]
                    else:
                        reps[s] = e1.reps[s] if s in e1.colours else e2.reps[s]
                self._new_edge(colours, split, reps, nid)
            merged = [e1.eid, e2.eid]
        else:
            eids = sorted({self.live[p] for p in self.attached[c]})
            nid = self._new_node([c])
            for eid in eids:
                e = self.edges[eid]
                e.top = nid
                for s, node in e.reps.items():
                    self.live.pop((s, node), None)
            self.processed.add(c)
            self.assigned[c] = guess
            absorbed = []
            for colours, split in guess.edges:
                reps = {s: fstar.rep[c][s] for s in colours}
                self._new_edge(colours, split, reps, nid)
            merged = eids
        if trace is not None:
            trace.append(
                {
                    "event": "merge",
                    "component": c.name(),
                    "node": nid,
                    "merged_edges": [f"e{i}" for i in merged],
                    "buddies": [b.name() for b in absorbed],
                    "new_edges": [
                        {"edge": f"e{e.eid}", "colours": sorted(f"T{s + 1}" for s in e.colours),
                         "top": f"T{e.top_colour + 1}"}
                        for e in self.edges.values() if e.bottom == nid and e.top is None
                    ],
                }
            )
        return list(range(first_new, self.next_edge))

    def export(self) -> PartialSignature:
        nodes = tuple(sorted(self.nodes.items()))
        edges = tuple(
            SigEdge(e.eid, e.top, e.bottom, e.colours, e.top_colour,
                    tuple(sorted(e.reps.items())))
            for _, e in sorted(self.edges.items())
        )
        return PartialSignature(nodes, edges)


# ---------------------------------------------------------------------------
# replay of a full description
# ---------------------------------------------------------------------------


def build_signature(d: Description, seed: Optional[int] = None, trace: Optional[list] = None):
    """Construct the signature determined by the description, or reject.

    The free root processed in each round is the lowest-indexed one; a seed
    switches to a random choice among the free roots (the result must not
    depend on it).
    """
    fstar = d.fstar
    guesses = dict(d.guesses)
    builder = _Builder(fstar)
    rng = random.Random(seed) if seed is not None else None
    while not builder.done():
        free = builder.free_components(guesses)
        if not free:
            pending = tuple(c.name() for c in fstar.components if c not in builder.processed)
            return Rejection("NoFreeNode", pending)
        if trace is not None:
            trace.append({"event": "round", "free": [c.name() for c in free]})
        c = rng.choice(free) if rng is not None else min(free, key=lambda x: fstar.index[x])
        if c.kind == "inode":
            plan = builder._inode_plan(c)
            _, _, buddies = plan
            for b in buddies.values():
                if guesses[b] != guesses[c]:
                    return Rejection("BuddyGuessMismatch", (c.name(), b.name()))
        builder.apply(c, guesses[c], trace)
    if any(e.top is None for e in builder.edges.values()):
        raise InternalInconsistency("root edges left after the final merge")
    return builder.export()


# ---------------------------------------------------------------------------
# expansion of AAF components
# ---------------------------------------------------------------------------


class _Expander:
    def __init__(self, sig: PartialSignature, fstar: ExtendedAAF, trace: Optional[list] = None):
        self.fstar = fstar
        self.trace = trace
        self.labels: Dict[int, str] = {}
        self.node_ids = [nid for nid, _ in sig.nodes]
        self.comps = dict(sig.nodes)
        self.next_node = max(self.node_ids, default=-1) + 1
        self.etop: Dict[int, int] = {}
        self.ebottom: Dict[int, int] = {}
        self.ecolours: Dict[int, frozenset] = {}
        self.ereps: Dict[int, dict] = {}
        for e in sig.edges:
            self.etop[e.eid] = e.top
            self.ebottom[e.eid] = e.bottom
            self.ecolours[e.eid] = e.colours
            self.ereps[e.eid] = dict(e.reps)
        self.next_edge = max(self.etop, default=-1) + 1
        self.dead_nodes: set = set()

    def new_node(self) -> int:
        nid = self.next_node
        self.next_node += 1
        self.node_ids.append(nid)
        return nid

    def new_edge(self, top, bottom, colours) -> int:
        eid = self.next_edge
        self.next_edge += 1
        self.etop[eid] = top
        self.ebottom[eid] = bottom
        self.ecolours[eid] = colours
        self.ereps[eid] = {}
        return eid

    def topo_block_nodes(self) -> List[int]:
        indeg = {nid: 0 for nid in self.node_ids}
        for eid in self.etop:
            indeg[self.ebottom[eid]] += 1
        order = []
        queue = sorted(nid for nid, d in indeg.items() if d == 0)
        import heapq

        heapq.heapify(queue)
        while queue:
            nid = heapq.heappop(queue)
            order.append(nid)
            for eid in [e for e in self.etop if self.etop[e] == nid]:
                bot = self.ebottom[eid]
                indeg[bot] -= 1
                if indeg[bot] == 0:
                    heapq.heappush(queue, bot)
        return [n for n in order
                if any(c.kind == "block" for c in self.comps.get(n, ()))]

    def _group_attachments(self, comp: Component, child_eids):
        groups: Dict[frozenset, list] = {}
        for eid in child_eids:
            keys = set()
            for s in sorted(self.ecolours[eid]):
                rep = self.ereps[eid][s]
                u = self.fstar.trees[s].parent[rep]
                keys.add(component_edge_key(self.fstar, comp, s, u))
            if len(keys) != 1:
                return Rejection(
                    "BranchConflict",
                    (f"e{eid}",) + tuple(str(sorted(k)) for k in sorted(keys, key=sorted)))
            groups.setdefault(keys.pop(), []).append(eid)
        return groups

    def expand_block(self, nid: int, c: Component):
        block = c.block
        child_eids = sorted(e for e, top in self.etop.items() if top == nid)
        parent_eids = sorted(e for e, bot in self.ebottom.items() if bot == nid)

        if len(block) == 1 and not c.is_rho:
            (lbl,) = block
            self.labels[nid] = lbl
            if child_eids:
                raise InternalInconsistency("taxon leaf with child edges")
            return
        if c.is_rho and len(block) == 1:
            # no component tree: every child edge gets its own root
            for eid in child_eids:
                r = self.new_node()
                self.etop[eid] = r
            self.dead_nodes.add(nid)
            if self.trace is not None:
                self.trace.append({"event": "expand", "component": c.name(),
                                   "fresh_roots": len(child_eids)})
            return

        shape = self.fstar.shape_of(c)
        shape_clades = shape.clades()

        groups = self._group_attachments(c, child_eids)
        if isinstance(groups, Rejection):
            return groups

        # instantiate the component tree, all edges carrying all colours
        mapped: Dict[int, int] = {}
        for v in shape.preorder():
            mapped[v] = self.new_node()
            lbl = shape.label[v]
            if lbl is not None and not shape.children[v] and lbl != RHO:
                self.labels[mapped[v]] = lbl
        shape_edge_by_clade: Dict[frozenset, int] = {}
        for v in shape.preorder():
            p = shape.parent[v]
            if p is None:
                continue
            eid = self.new_edge(mapped[p], mapped[v], frozenset({0, 1, 2}))
            shape_edge_by_clade[frozenset(shape_clades[v] - {RHO})] = eid

        # re-route the block node's parent edges to the component root
        top_node = mapped[shape.root]
        for eid in parent_eids:
            self.ebottom[eid] = top_node
        self.dead_nodes.add(nid)

        order_log = {}
        for key in sorted(groups, key=lambda k: tuple(sorted(k))):
            eids = groups[key]
            order = self._attachment_order(eids)
            if isinstance(order, Rejection):
                return order
            if key not in shape_edge_by_clade:
                raise InternalInconsistency(f"no component edge with clade {sorted(key)}")
            f_eid = shape_edge_by_clade[key]
            top = self.etop[f_eid]
            bottom = self.ebottom[f_eid]
            prev = top
            for eid in order:
                z = self.new_node()
                seg = self.new_edge(prev, z, frozenset({0, 1, 2}))
                self.etop[eid] = z
                prev = z
            # final segment reuses the original component edge
            self.etop[f_eid] = prev
            self.ebottom[f_eid] = bottom
            order_log["|".join(sorted(key))] = [f"e{e}" for e in order]
        if self.trace is not None:
            self.trace.append({"event": "expand", "component": c.name(),
                               "attach_order": order_log})
        return None

    def _attachment_order(self, eids):
        """Topological order of the attachment-constraint DAG: an edge must be
        attached above every edge it sits above in some tree."""
        above: Dict[int, set] = {e: set() for e in eids}
        for s in range(3):
            t = self.fstar.trees[s]
            coloured = [e for e in eids if s in self.ecolours[e]]
            pos = {e: t.parent[self.ereps[e][s]] for e in coloured}
            for a in coloured:
                for b in coloured:
                    if a != b and pos[a] != pos[b] and t.is_ancestor(pos[a], pos[b]):
                        above[a].add(b)
        order = []
        remaining = sorted(eids)
        while remaining:
            nxt = None
            for e in remaining:
                if all(e not in above[x] for x in remaining if x != e):
                    nxt = e
                    break
            if nxt is None:
                return Rejection("CyclicAttachOrder", tuple(f"e{e}" for e in eids))
            order.append(nxt)
            remaining.remove(nxt)
        return order

    def to_cnet(self) -> CNET:
        live = [n for n in self.node_ids if n not in self.dead_nodes]
        remap = {n: i for i, n in enumerate(sorted(live))}
        edges = [
            CnetEdge(i, remap[self.etop[eid]], remap[self.ebottom[eid]], self.ecolours[eid])
            for i, eid in enumerate(sorted(self.etop))
        ]
        labels = {remap[n]: lbl for n, lbl in self.labels.items()}
        return CNET(len(live), edges, labels)


def expand_components(sig: PartialSignature, d: Description, trace: Optional[list] = None):
    """Turn a complete signature into a CNET by expanding every block image,
    or reject when attachments conflict or cannot be ordered."""
    ex = _Expander(sig, d.fstar, trace)
    for nid in ex.topo_block_nodes():
        c = next(comp for comp in ex.comps[nid] if comp.kind == "block")
        result = ex.expand_block(nid, c)
        if isinstance(result, Rejection):
            return result
    return ex.to_cnet()


def reconstruct_cnet(d: Description, seed: Optional[int] = None, trace: Optional[list] = None,
                     validate: bool = True):
    """build_signature then expand_components; on success the result satisfies
    the CNET conditions and its deletion AAF equals the description's forest.

    A coloured network always comes out when signature and expansion go
    through, but when some non-root forest component was guessed a single
    parent edge, the surviving edge glues that component to the one above it
    and the network's deletion forest is coarser than the described one; no
    network has this description, so it is rejected.
    """
    sig = build_signature(d, seed=seed, trace=trace)
    if isinstance(sig, Rejection):
        return sig
    cnet = expand_components(sig, d, trace=trace)
    if isinstance(cnet, Rejection):
        return cnet
    aaf = deletion_forest(induce_network(cnet))
    if aaf.blocks != d.fstar.forest.blocks:
        got = {tuple(sorted(b)) for b in aaf.blocks}
        want = {tuple(sorted(b)) for b in d.fstar.forest.blocks}
        return Rejection("DeletionForestMismatch", tuple(sorted(map(str, got ^ want))))
    if validate:
        report = validate_cnet(cnet, d.fstar.trees)
        if not report.ok:
            raise InternalInconsistency(f"reconstructed CNET invalid: {report.violations}")
    return cnet


# ---------------------------------------------------------------------------
# guess search used by the solver
# ---------------------------------------------------------------------------


def search_cnet(fstar: ExtendedAAF, max_hyb: Optional[int] = None,
                trace: Optional[list] = None):
    """Depth-first search over wiring guesses, sharing signature prefixes.

    Equivalent to running reconstruct_cnet over enumerate_descriptions(fstar)
    and returning the first within-budget success, but guesses of a component
    are only branched when the component becomes free, so rejected prefixes
    prune the whole guess subspace below them.  The hybridization number of
    the final CNET is the sum over merged nodes of (parent edge count - 1),
    which is accumulated during the search and capped at max_hyb.
    """
    by_union: Dict[int, Dict[frozenset, List[WiringGuess]]] = {}
    for t in range(3):
        buckets: Dict[frozenset, List[WiringGuess]] = {}
        for g in guesses_for(INode(t)):
            buckets.setdefault(g.colour_union(), []).append(g)
        by_union[t] = buckets
    multi_block_guesses = tuple(g for g in guesses_for(AafRoot()) if len(g.edges) >= 2)
    rho_guess = guesses_for(RhoRoot())[0]

    def dfs(builder: _Builder, cost: int):
        if builder.done():
            if any(e.top is None for e in builder.edges.values()):
                return None
            sig = builder.export()
            d = Description(fstar, tuple(sorted(builder.assigned.items(),
                                                key=lambda kv: fstar.index[kv[0]])))
            cnet = expand_components(sig, d, trace=trace)
            if isinstance(cnet, Rejection):
                return None
            return cnet, d, sig
        free = builder.free_components()
        if not free:
            return None
        c = min(free, key=lambda x: fstar.index[x])
        if c.is_rho:
            nxt = builder.clone()
            nxt.apply(c, rho_guess)
            return dfs(nxt, cost)
        if c.kind == "inode":
            union = builder.child_union(c)
            options = by_union[c.tree].get(union, ())
        else:
            # a deletion-forest component other than the root one must be cut
            # off by reticulation edges, so its image needs >= 2 parents
            options = multi_block_guesses
        # every unprocessed non-rho block still to come adds a reticulation
        pending_blocks = sum(
            1 for x in fstar.components
            if x.kind == "block" and not x.is_rho
            and x not in builder.processed and x != c)
        for guess in options:
            added = max(len(guess.edges) - 1, 0)
            if max_hyb is not None and cost + added + pending_blocks > max_hyb:
                continue
            nxt = builder.clone()
            new_edges = nxt.apply(c, guess)
            if any(nxt.edge_doomed(nxt.edges[eid]) for eid in new_edges):
                continue
            result = dfs(nxt, cost + added)
            if result is not None:
                return result
        return None

    return dfs(_Builder(fstar), 0)
