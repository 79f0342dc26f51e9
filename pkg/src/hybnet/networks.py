"""Phylogenetic networks and canonical networks with embedded trees (CNETs).

A ``Network`` is the strict form: binary, single root of outdegree 1, leaves
bijectively labelled.  A ``CNET`` is the looser coloured DAG produced by the
reconstruction: it may have several roots, nodes that are reticulation and
split node at once, and reticulations of indegree above two.  The induced
network of a CNET is the Network obtained by the four normalization steps in
:func:`induce_network`.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import InputError, InvalidCNET, TooManyReticulations, UnsupportedFormat
from .forests import Forest
from .trees import (
    RHO,
    PhyloTree,
    TaxonMap,
    _PendantSub,
    _TreeBuilder,
    expand_map,
    is_synthetic,
    isomorphic,
)

DISPLAY_GUARD = 25


class Network:
    """Directed acyclic graph with labelled sinks; parallel edges allowed."""

    __slots__ = ("n_nodes", "edges", "label", "_children", "_parents")

    def __init__(self, n_nodes: int, edges: Sequence[Tuple[int, int]], label: Dict[int, str]):
        self.n_nodes = n_nodes
        self.edges = tuple(edges)
        self.label = dict(label)
        children: List[List[int]] = [[] for _ in range(n_nodes)]
        parents: List[List[int]] = [[] for _ in range(n_nodes)]
        for u, v in self.edges:
            children[u].append(v)
            parents[v].append(u)
        self._children = children
        self._parents = parents

    def children(self, v: int) -> List[int]:
        return self._children[v]

    def parents(self, v: int) -> List[int]:
        return self._parents[v]

    def indeg(self, v: int) -> int:
        return len(self._parents[v])

    def outdeg(self, v: int) -> int:
        return len(self._children[v])

    def roots(self) -> List[int]:
        return [v for v in range(self.n_nodes) if not self._parents[v]]

    def sinks(self) -> List[int]:
        return [v for v in range(self.n_nodes) if not self._children[v]]

    def reticulations(self) -> List[int]:
        return [v for v in range(self.n_nodes) if len(self._parents[v]) >= 2]

    def is_acyclic(self) -> bool:
        return self._topological() is not None

    def _topological(self) -> Optional[List[int]]:
        indeg = [len(p) for p in self._parents]
        queue = sorted(v for v in range(self.n_nodes) if indeg[v] == 0)
        out = []
        import heapq

        heapq.heapify(queue)
        while queue:
            v = heapq.heappop(queue)
            out.append(v)
            for c in self._children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(queue, c)
        return out if len(out) == self.n_nodes else None

    def topological(self) -> List[int]:
        order = self._topological()
        if order is None:
            raise ValueError("graph has a directed cycle")
        return order

    def is_binary(self) -> bool:
        """Single root of outdegree 1; every other node is a leaf (1,0),
        a split node (1,2) or a reticulation (2,1)."""
        roots = self.roots()
        if len(roots) != 1:
            return False
        if self.outdeg(roots[0]) != 1:
            return False
        for v in range(self.n_nodes):
            i, o = self.indeg(v), self.outdeg(v)
            if v == roots[0]:
                continue
            if (i, o) not in ((1, 0), (1, 2), (2, 1)):
                return False
        return True


@dataclass(frozen=True)
class CnetEdge:
    eid: int
    tail: int
    head: int
    colours: frozenset  # nonempty subset of {0, 1, 2}


class CNET:
    """Coloured DAG; colour i marks the edges of the image of input tree i."""

    __slots__ = ("n_nodes", "edges", "label", "_children", "_parents")

    def __init__(self, n_nodes: int, edges: Sequence[CnetEdge], label: Dict[int, str]):
        self.n_nodes = n_nodes
        self.edges = tuple(edges)
        self.label = dict(label)
        children: List[List[CnetEdge]] = [[] for _ in range(n_nodes)]
        parents: List[List[CnetEdge]] = [[] for _ in range(n_nodes)]
        for e in self.edges:
            children[e.tail].append(e)
            parents[e.head].append(e)
        self._children = children
        self._parents = parents

    def child_edges(self, v: int) -> List[CnetEdge]:
        return self._children[v]

    def parent_edges(self, v: int) -> List[CnetEdge]:
        return self._parents[v]

    def indeg(self, v: int) -> int:
        return len(self._parents[v])

    def outdeg(self, v: int) -> int:
        return len(self._children[v])

    def roots(self) -> List[int]:
        return [v for v in range(self.n_nodes) if not self._parents[v]]

    def sinks(self) -> List[int]:
        return [v for v in range(self.n_nodes) if not self._children[v]]

    def as_network(self) -> Network:
        return Network(self.n_nodes, [(e.tail, e.head) for e in self.edges], self.label)


# ---------------------------------------------------------------------------
# basic quantities
# ---------------------------------------------------------------------------


def hybridization_number(g) -> int:
    """Sum of (indegree - 1) over all nodes of indegree at least two."""
    return sum(g.indeg(v) - 1 for v in range(g.n_nodes) if g.indeg(v) >= 2)


# ---------------------------------------------------------------------------
# CNET validation
# ---------------------------------------------------------------------------


@dataclass
class CnetReport:
    violations: List[Tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, condition: str, detail: str) -> None:
        self.violations.append((condition, detail))

    def conditions(self) -> set:
        return {c for c, _ in self.violations}


def _image_tree(h: CNET, colour: int) -> Optional[PhyloTree]:
    """Suppress the colour's edge subgraph to a PhyloTree, or None if it is
    not the image of a tree (wrong degrees, disconnected, several sources)."""
    edges = [e for e in h.edges if colour in e.colours]
    if not edges:
        return None
    nodes = sorted({e.tail for e in edges} | {e.head for e in edges})
    kids = {v: [] for v in nodes}
    indeg = {v: 0 for v in nodes}
    for e in edges:
        kids[e.tail].append(e.head)
        indeg[e.head] += 1
    sources = [v for v in nodes if indeg[v] == 0]
    if len(sources) != 1 or any(d > 1 for d in indeg.values()):
        return None
    if len(edges) != len(nodes) - 1:
        return None
    b = _TreeBuilder()
    built = {}
    root = sources[0]
    b_root = b.add(label=RHO)
    built[root] = b_root
    stack = [root]
    while stack:
        v = stack.pop()
        for c in kids[v]:
            built[c] = b.add(label=h.label.get(c), parent=built[v])
            stack.append(c)
    for v in nodes:
        if not kids[v] and h.label.get(v) is None:
            return None  # unlabelled sink inside the image
    from .trees import _suppress_unary

    top = _suppress_unary(b, b_root)
    return b.freeze(top)


def validate_cnet(h: CNET, ts: Sequence[PhyloTree]) -> CnetReport:
    """Check the eight structural conditions independently; every violation is
    reported with a witness."""
    report = CnetReport()
    net = h.as_network()

    if not net.is_acyclic():
        report.add("i", "directed cycle present")

    for r in net.roots():
        if net.outdeg(r) != 1:
            report.add("ii", f"root {r} has outdegree {net.outdeg(r)}")

    taxa = ts[0].leaf_labels() - {RHO}
    sink_labels = [h.label.get(v) for v in h.sinks()]
    if None in sink_labels or len(set(sink_labels)) != len(sink_labels) or set(sink_labels) != taxa:
        report.add("iii", f"sink labels {sorted(filter(None, sink_labels))} vs taxa {sorted(taxa)}")

    if report.ok or "i" not in report.conditions():
        for i, t in enumerate(ts):
            img = _image_tree(h, i)
            if img is None or not isomorphic(img, t):
                report.add("iv", f"colour {i} subgraph is not an image of tree {i}")

    root_set = set(net.roots())
    for i in range(len(ts)):
        edges = [e for e in h.edges if i in e.colours]
        if edges and not any(e.tail in root_set for e in edges):
            report.add("v", f"image {i} touches no root")

    for e in h.edges:
        if not e.colours:
            report.add("vi", f"edge {e.eid} has no colour")

    for v in range(h.n_nodes):
        if h.indeg(v) > 0 and h.outdeg(v) > 0 and h.outdeg(v) != 2:
            report.add("vii", f"node {v} has {h.outdeg(v)} children")

    for v in range(h.n_nodes):
        kids = h.child_edges(v)
        if h.indeg(v) > 0 and len(kids) == 2:
            shared = kids[0].colours & kids[1].colours
            if not shared:
                report.add("viii", f"no image contains both child edges of node {v}")
    return report


def _structural_cnet_check(h: CNET) -> None:
    """Tree-free sanity: acyclic, roots unary, colours nonempty, nodes binary."""
    net = h.as_network()
    if not net.is_acyclic():
        raise InvalidCNET("cyclic")
    for r in net.roots():
        if net.outdeg(r) != 1:
            raise InvalidCNET(f"root {r} outdegree {net.outdeg(r)}")
    for e in h.edges:
        if not e.colours:
            raise InvalidCNET(f"edge {e.eid} uncoloured")
    for v in range(h.n_nodes):
        if h.indeg(v) > 0 and h.outdeg(v) not in (0, 2):
            raise InvalidCNET(f"node {v} outdegree {h.outdeg(v)}")


# ---------------------------------------------------------------------------
# induced network
# ---------------------------------------------------------------------------


def induce_network(h: CNET) -> Network:
    """The hybridization network induced by a CNET: split retic+split nodes,
    refine high-indegree reticulations, merge roots, and lift multi-parent
    leaves.  Preserves the hybridization number."""
    _structural_cnet_check(h)

    class G:
        def __init__(self, n, edges, label):
            self.n = n
            self.edges = list(edges)
            self.label = dict(label)

        def add_node(self):
            self.n += 1
            return self.n - 1

    g = G(h.n_nodes, [(e.tail, e.head) for e in h.edges], h.label)

    def parents(v):
        return [i for i, (a, b) in enumerate(g.edges) if b == v]

    def children(v):
        return [i for i, (a, b) in enumerate(g.edges) if a == v]

    # step 1: separate nodes that are reticulation and split node at once
    for v in list(range(g.n)):
        pin, pout = parents(v), children(v)
        if len(pin) >= 2 and len(pout) >= 2:
            top = g.add_node()
            for i in pin:
                g.edges[i] = (g.edges[i][0], top)
            g.edges.append((top, v))

    # step 2: refine reticulations of indegree three or more
    for v in list(range(g.n)):
        pin = sorted(parents(v))
        while len(pin) > 2:
            mid = g.add_node()
            a, b = pin[0], pin[1]
            g.edges[a] = (g.edges[a][0], mid)
            g.edges[b] = (g.edges[b][0], mid)
            g.edges.append((mid, v))
            pin = sorted(parents(v))

    # step 3: merge roots pairwise
    def roots():
        have_parent = {b for _, b in g.edges}
        return sorted(v for v in range(g.n) if v not in have_parent)

    rs = roots()
    while len(rs) > 1:
        r1, r2 = rs[0], rs[1]
        (ci,) = children(r1)
        g.edges[ci] = (r2, g.edges[ci][1])
        g.edges.append((r1, r2))
        rs = roots()

    # step 4: new node above any multi-parent leaf
    for v in list(range(g.n)):
        if not children(v) and len(parents(v)) > 1:
            x = g.add_node()
            for i in parents(v):
                g.edges[i] = (g.edges[i][0], x)
            g.edges.append((x, v))

    return Network(g.n, g.edges, g.label)


# ---------------------------------------------------------------------------
# display check
# ---------------------------------------------------------------------------


def _switch_to_tree(n: Network, dropped: set) -> Optional[PhyloTree]:
    """Drop the given edge indices, prune unlabelled dangling parts, suppress,
    and return the displayed tree (RHO at the root)."""
    root = n.roots()[0]
    kids: List[List[int]] = [[] for _ in range(n.n_nodes)]
    for i, (u, v) in enumerate(n.edges):
        if i in dropped:
            continue
        kids[u].append(v)

    b = _TreeBuilder()
    result: Dict[int, Optional[int]] = {}
    stack = [(root, False)]
    while stack:
        v, done = stack.pop()
        if done:
            sub = [result[c] for c in kids[v] if result[c] is not None]
            if not sub:
                result[v] = None
            elif len(sub) == 1:
                result[v] = sub[0]
            else:
                node = b.add()
                for s in sub:
                    b.attach(s, node)
                result[v] = node
        else:
            if not kids[v]:
                lbl = n.label.get(v)
                result[v] = None if lbl is None else b.add(label=lbl)
            else:
                stack.append((v, True))
                stack.extend((c, False) for c in kids[v])
    body = result[root]
    if body is None:
        return None
    top = b.add(label=RHO)
    b.attach(body, top)
    return b.freeze(top)


def displays(n: Network, t: PhyloTree, guard: int = DISPLAY_GUARD) -> bool:
    """True iff some switching of the reticulations yields a tree isomorphic
    to t.  Only for binary single-root networks; 2^k enumeration."""
    if not n.is_binary():
        raise InputError("display check needs a binary single-root network")
    retics = n.reticulations()
    if len(retics) > guard:
        raise TooManyReticulations(f"{len(retics)} reticulations exceed the guard {guard}")
    in_edges = {r: [i for i, (u, v) in enumerate(n.edges) if v == r] for r in retics}
    target = t.canonical()
    for choice in itertools.product(*[in_edges[r] for r in retics]):
        chosen = set(choice)
        dropped = {i for r in retics for i in in_edges[r] if i not in chosen}
        got = _switch_to_tree(n, dropped)
        if got is not None and got.canonical() == target:
            return True
    return False


# ---------------------------------------------------------------------------
# deletion forest
# ---------------------------------------------------------------------------


def deletion_forest(n: Network) -> Forest:
    """Delete every edge whose head is a reticulation; taxa partition of the
    remaining components (the network root stands for RHO)."""
    comp = list(range(n.n_nodes))

    def find(x):
        while comp[x] != x:
            comp[x] = comp[comp[x]]
            x = comp[x]
        return x

    def union(a, b):
        comp[find(a)] = find(b)

    for u, v in n.edges:
        if n.indeg(v) < 2:
            union(u, v)
    blocks: Dict[int, set] = {}
    for v in range(n.n_nodes):
        lbl = n.label.get(v)
        if lbl is None and n.indeg(v) == 0 and n.outdeg(v) > 0:
            lbl = RHO  # the network root stands for the rho leaf
        if lbl is not None:
            blocks.setdefault(find(v), set()).add(lbl)
    return Forest(blocks.values())


# ---------------------------------------------------------------------------
# output formats
# ---------------------------------------------------------------------------

_DOT_COLOURS = {
    frozenset(): "black",
    frozenset({0}): "red",
    frozenset({1}): "green3",
    frozenset({2}): "blue",
    frozenset({0, 1}): "orange",
    frozenset({0, 2}): "purple",
    frozenset({1, 2}): "turquoise4",
    frozenset({0, 1, 2}): "gray30",
}


def _stable_order(g) -> List[int]:
    if isinstance(g, CNET):
        net = g.as_network()
    else:
        net = g
    order = net._topological()
    if order is None:
        order = list(range(net.n_nodes))
    return order


def emit(g, fmt: str) -> str:
    """Serialize a Network or CNET: 'enewick', 'dot' or 'json'."""
    if fmt == "json":
        return _emit_json(g)
    if fmt == "dot":
        return _emit_dot(g)
    if fmt == "enewick":
        if isinstance(g, CNET):
            raise UnsupportedFormat("enewick requires a finalized network")
        return _emit_enewick(g)
    raise UnsupportedFormat(fmt)


def _edge_triples(g):
    if isinstance(g, CNET):
        return [(e.tail, e.head, sorted(f"T{c + 1}" for c in e.colours)) for e in g.edges]
    return [(u, v, None) for u, v in g.edges]


def _emit_json(g) -> str:
    order = _stable_order(g)
    pos = {v: i for i, v in enumerate(order)}
    nodes = []
    for v in order:
        item = {"id": pos[v]}
        if g.label.get(v) is not None:
            item["label"] = g.label[v]
        nodes.append(item)
    edges = []
    for u, v, colours in sorted(_edge_triples(g), key=lambda e: (pos[e[0]], pos[e[1]], str(e[2]))):
        item = {"from": pos[u], "to": pos[v]}
        if colours is not None:
            item["colours"] = colours
        edges.append(item)
    return json.dumps({"nodes": nodes, "edges": edges}, ensure_ascii=False, indent=2)


def network_from_json(text: str) -> Network:
    data = json.loads(text)
    labels = {n["id"]: n["label"] for n in data["nodes"] if "label" in n}
    edges = [(e["from"], e["to"]) for e in data["edges"]]
    return Network(len(data["nodes"]), edges, labels)


def _emit_dot(g) -> str:
    order = _stable_order(g)
    pos = {v: i for i, v in enumerate(order)}
    lines = ["digraph hybnet {"]
    for v in order:
        lbl = g.label.get(v)
        shape = ' [label="%s"]' % lbl if lbl is not None else ' [shape=point]'
        lines.append(f"  n{pos[v]}{shape};")
    triples = sorted(_edge_triples(g), key=lambda e: (pos[e[0]], pos[e[1]], str(e[2])))
    for u, v, colours in triples:
        if colours is None:
            lines.append(f"  n{pos[u]} -> n{pos[v]};")
        else:
            cset = frozenset(int(c[1]) - 1 for c in colours)
            lines.append(f'  n{pos[u]} -> n{pos[v]} [color={_DOT_COLOURS[cset]} label="{"".join(colours)}"];')
    lines.append("}")
    return "\n".join(lines)


def _emit_enewick(n: Network) -> str:
    """eNewick with #Hi hybrid tags; the RHO root is left implicit."""
    if not n.is_binary():
        raise UnsupportedFormat("enewick output needs a binary single-root network")
    retics = sorted(n.reticulations())
    tag = {v: i + 1 for i, v in enumerate(retics)}
    seen = set()

    def render(v):
        if v in tag:
            if v in seen:
                return f"#H{tag[v]}"
            seen.add(v)
            inner = render(n.children(v)[0]) if n.outdeg(v) else ""
            return f"({inner})#H{tag[v]}" if inner else f"#H{tag[v]}"
        if n.outdeg(v) == 0:
            return n.label[v]
        parts = sorted(render(c) for c in n.children(v))
        if len(parts) == 1:
            return parts[0]
        return "(" + ",".join(parts) + ")"

    root = n.roots()[0]
    return render(n.children(root)[0]) + ";"


# ---------------------------------------------------------------------------
# conversions and reduction undo
# ---------------------------------------------------------------------------


def network_from_tree(t: PhyloTree) -> Network:
    """The tree itself as a (reticulation-free) network; the RHO leaf becomes
    the implicit root."""
    edges = [(t.parent[v], v) for v in range(t.n_nodes) if t.parent[v] is not None]
    label = {v: t.label[v] for v in range(t.n_nodes)
             if t.label[v] is not None and t.label[v] != RHO and not t.children[v]}
    return Network(t.n_nodes, edges, label)


@expand_map.register
def _expand_network(n: Network, m: TaxonMap) -> Network:
    """Undo pendant-subtree reductions on a network: graft each recorded
    pendant tree in place of its synthetic sink."""
    while True:
        synth = {v: lbl for v, lbl in n.label.items() if is_synthetic(lbl)}
        if not synth:
            return n
        count = n.n_nodes
        edges = list(n.edges)
        label = {v: lbl for v, lbl in n.label.items() if v not in synth}
        for v, lbl in synth.items():
            sub = m.substitutions.get(lbl)
            if sub is None or not isinstance(sub, _PendantSub):
                from .errors import MissingSubstitution

                raise MissingSubstitution(f"no pendant subtree recorded for {lbl!r}")
            src = sub.tree
            ids = {src.root: v}
            for w in src.preorder():
                if w == src.root:
                    continue
                ids[w] = count
                count += 1
                edges.append((ids[src.parent[w]], ids[w]))
                if src.label[w] is not None and not src.children[w]:
                    label[ids[w]] = src.label[w]
            if src.n_nodes == 1:
                label[v] = src.label[src.root]
        n = Network(count, edges, label)
