"""Rooted binary leaf-labelled trees and the standard instance reductions.

The root of an instance tree is materialized as a leaf carrying the reserved
label ``RHO``: it has indegree 0 and outdegree 1.  Newick input never contains
that label; :func:`parse_newick` injects it.  Restrictions to label sets that
exclude ``RHO`` are ordinary rooted trees whose top node has two children, so
:class:`PhyloTree` does not force the root-leaf shape on every instance.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

from .errors import (
    DuplicateLabel,
    LabelMismatch,
    MissingSubstitution,
    NewickSyntaxError,
    NonBinaryError,
    NotAChain,
    UnknownLabel,
)

RHO = "ρ"

CHAIN_PREFIX = "__chain_"
SUBTREE_PREFIX = "__sub_"


def is_synthetic(label: str) -> bool:
    return label.startswith(CHAIN_PREFIX) or label.startswith(SUBTREE_PREFIX)


class PhyloTree:
    """Immutable rooted tree with labelled leaves, nodes indexed 0..n-1."""

    __slots__ = ("parent", "children", "label", "root", "_by_label", "_canon")

    def __init__(self, parent, children, label, root):
        self.parent = tuple(parent)
        self.children = tuple(tuple(c) for c in children)
        self.label = tuple(label)
        self.root = root
        by = {}
        for v, lbl in enumerate(self.label):
            if lbl is not None:
                if lbl in by:
                    raise DuplicateLabel(f"label {lbl!r} occurs twice")
                by[lbl] = v
        self._by_label = by
        self._canon = None

    # -- structure queries -------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.parent)

    def is_leaf(self, v: int) -> bool:
        return not self.children[v]

    def leaves(self) -> Iterator[int]:
        return (v for v in range(self.n_nodes) if not self.children[v])

    def leaf_labels(self) -> frozenset:
        return frozenset(self._by_label)

    def node(self, label: str) -> int:
        try:
            return self._by_label[label]
        except KeyError:
            raise UnknownLabel(f"no leaf labelled {label!r}") from None

    def has_label(self, label: str) -> bool:
        return label in self._by_label

    def postorder(self) -> list[int]:
        """Children before parents, deterministic, iterative."""
        out, stack = [], [self.root]
        while stack:
            v = stack.pop()
            out.append(v)
            stack.extend(self.children[v])
        out.reverse()
        return out

    def preorder(self) -> list[int]:
        out, stack = [], [self.root]
        while stack:
            v = stack.pop()
            out.append(v)
            stack.extend(reversed(self.children[v]))
        return out

    def depth_of(self, v: int) -> int:
        d = 0
        while self.parent[v] is not None:
            v = self.parent[v]
            d += 1
        return d

    def is_ancestor(self, u: int, v: int) -> bool:
        """True iff u lies on the path from the root to v (u == v counts)."""
        while v is not None:
            if v == u:
                return True
            v = self.parent[v]
        return False

    def clades(self) -> list[frozenset]:
        """Leaf-label set below each node (leaf labels include RHO if present)."""
        out = [None] * self.n_nodes
        for v in self.postorder():
            if not self.children[v]:
                out[v] = frozenset((self.label[v],))
            else:
                acc = frozenset()
                for c in self.children[v]:
                    acc |= out[c]
                out[v] = acc
        return out

    def sibling(self, v: int) -> Optional[int]:
        p = self.parent[v]
        if p is None:
            return None
        others = [c for c in self.children[p] if c != v]
        return others[0] if others else None

    # -- canonical form ----------------------------------------------------

    def canonical(self):
        """Nested-tuple canonical form: leaves encode as their label, internal
        nodes as the sorted tuple of child encodings."""
        if self._canon is None:
            enc = [None] * self.n_nodes
            for v in self.postorder():
                if not self.children[v]:
                    enc[v] = ("L", self.label[v])
                elif self.label[v] is not None:
                    # the RHO root carries a label and a child
                    enc[v] = ("R", self.label[v],
                              tuple(sorted(enc[c] for c in self.children[v])))
                else:
                    enc[v] = ("N", tuple(sorted(enc[c] for c in self.children[v])))
            self._canon = enc[self.root]
        return self._canon

    def check_instance_tree(self) -> None:
        """Assert the instance-tree shape: RHO root-leaf, all inner nodes binary."""
        if self.label[self.root] != RHO or len(self.children[self.root]) != 1:
            raise NonBinaryError("root must be the leaf labelled rho with one child")
        for v in range(self.n_nodes):
            if v != self.root and len(self.children[v]) not in (0, 2):
                raise NonBinaryError(f"node {v} has {len(self.children[v])} children")

    def __repr__(self):
        return f"PhyloTree({serialize(self)!r})"


# -- construction helpers ----------------------------------------------------


class _TreeBuilder:
    """Mutable scratch structure; `freeze` produces a PhyloTree with
    contiguous node ids."""

    def __init__(self):
        self.parent: list = []
        self.children: list = []
        self.label: list = []

    def add(self, label=None, parent=None) -> int:
        v = len(self.parent)
        self.parent.append(parent)
        self.children.append([])
        self.label.append(label)
        if parent is not None:
            self.children[parent].append(v)
        return v

    def attach(self, child: int, parent: int) -> None:
        self.parent[child] = parent
        self.children[parent].append(child)

    def freeze(self, root: int) -> PhyloTree:
        order, stack = [], [root]
        while stack:
            v = stack.pop()
            order.append(v)
            stack.extend(self.children[v])
        remap = {old: new for new, old in enumerate(order)}
        parent = [None if self.parent[v] is None or self.parent[v] not in remap
                  else remap[self.parent[v]] for v in order]
        children = [[remap[c] for c in self.children[v]] for v in order]
        label = [self.label[v] for v in order]
        parent[0] = None
        return PhyloTree(parent, children, label, 0)


def _suppress_unary(b: _TreeBuilder, root: int) -> int:
    """Remove indegree-1 outdegree-1 nodes in place; returns the new root."""
    while len(b.children[root]) == 1 and b.label[root] is None:
        root = b.children[root][0]
        b.parent[root] = None
    stack = list(b.children[root])
    while stack:
        v = stack.pop()
        while len(b.children[v]) == 1 and b.label[v] is None:
            child = b.children[v][0]
            p = b.parent[v]
            b.children[p][b.children[p].index(v)] = child
            b.parent[child] = p
            v = child
        stack.extend(b.children[v])
    return root


# -- Newick ------------------------------------------------------------------


def _tokenize_newick(text: str) -> list:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "(),;":
            tokens.append(ch)
            i += 1
        elif ch == ":":
            j = i + 1
            while j < n and text[j] not in "(),;:":
                j += 1
            # branch length: parsed and discarded
            try:
                float(text[i + 1:j].strip())
            except ValueError:
                raise NewickSyntaxError(f"bad branch length {text[i + 1:j]!r}")
            i = j
        else:
            j = i
            while j < n and text[j] not in "(),;:" and not text[j].isspace():
                j += 1
            tokens.append(("label", text[i:j]))
            i = j
    return tokens


def parse_newick(text: str) -> PhyloTree:
    """Parse a single rooted Newick expression into an instance tree.

    A fresh root leaf labelled RHO is attached above the outermost Newick
    node.  Unary nodes are suppressed, nodes with more than two children
    raise NonBinaryError, and internal labels are discarded.
    """
    tokens = _tokenize_newick(text)
    if not tokens or tokens[-1] != ";":
        raise NewickSyntaxError("expression must end with ';'")
    tokens = tokens[:-1]
    if ";" in tokens:
        raise NewickSyntaxError("more than one ';' in expression")
    if not tokens:
        raise NewickSyntaxError("empty expression")

    b = _TreeBuilder()
    rho = b.add(label=RHO)
    stack = [rho]  # open internal nodes; rho acts as the sentinel parent
    just_closed = None
    expect_item = True
    for tok in tokens:
        if tok == "(":
            if not expect_item:
                raise NewickSyntaxError("unexpected '('")
            v = b.add(parent=stack[-1])
            stack.append(v)
            expect_item = True
        elif tok == ")":
            if expect_item or len(stack) == 1:
                raise NewickSyntaxError("unexpected ')'")
            just_closed = stack.pop()
            if not b.children[just_closed]:
                raise NewickSyntaxError("empty group '()'")
        elif tok == ",":
            if expect_item:
                raise NewickSyntaxError("unexpected ','")
            if len(stack) == 1:
                raise NewickSyntaxError("',' outside any group")
            expect_item = True
        else:
            name = tok[1]
            if expect_item:
                if name == RHO or not name:
                    raise DuplicateLabel(f"label {name!r} is reserved")
                b.add(label=name, parent=stack[-1])
                expect_item = False
            else:
                # internal node label (support value etc.): discarded
                if just_closed is None:
                    raise NewickSyntaxError(f"unexpected label {name!r}")
                just_closed = None
    if len(stack) != 1 or expect_item:
        raise NewickSyntaxError("unbalanced parentheses")
    if len(b.children[rho]) != 1:
        raise NewickSyntaxError("expression must describe a single tree")

    for v in range(len(b.parent)):
        if len(b.children[v]) > 2:
            raise NonBinaryError(f"node with {len(b.children[v])} children")
    root = _suppress_unary(b, rho)
    if root != rho:
        raise NewickSyntaxError("degenerate expression")  # pragma: no cover
    tree = b.freeze(rho)
    if len(tree._by_label) < 2:
        raise NewickSyntaxError("tree needs at least one taxon")
    return tree


def serialize(t: PhyloTree) -> str:
    """Canonical Newick: children sorted by their canonical encoding; the RHO
    root leaf is omitted."""
    enc = [None] * t.n_nodes
    text = [None] * t.n_nodes
    for v in t.postorder():
        if not t.children[v]:
            enc[v] = ("L", t.label[v])
            text[v] = t.label[v]
        else:
            pairs = sorted((enc[c], text[c]) for c in t.children[v])
            enc[v] = ("N", tuple(p[0] for p in pairs))
            text[v] = "(" + ",".join(p[1] for p in pairs) + ")"
    top = t.root
    if t.label[top] == RHO and len(t.children[top]) == 1:
        top = t.children[top][0]
    return text[top] + ";"


# -- elementary operations ----------------------------------------------------


def restrict(t: PhyloTree, labels: Iterable[str]) -> PhyloTree:
    """T restricted to `labels`: minimal spanning subtree with degree-2 nodes
    suppressed.  The result keeps the RHO root leaf only if RHO is requested."""
    wanted = frozenset(labels)
    if not wanted:
        raise UnknownLabel("cannot restrict to an empty label set")
    missing = wanted - t.leaf_labels()
    if missing:
        raise UnknownLabel(f"labels not in tree: {sorted(missing)}")

    b = _TreeBuilder()
    built = [None] * t.n_nodes
    for v in t.postorder():
        if not t.children[v]:
            if t.label[v] in wanted:
                built[v] = b.add(label=t.label[v])
        else:
            kept = [built[c] for c in t.children[v] if built[c] is not None]
            if len(kept) == 1:
                built[v] = kept[0]
            elif len(kept) > 1:
                node = b.add()
                for c in kept:
                    b.attach(c, node)
                built[v] = node
    top = built[t.root]
    if t.children[t.root] and t.label[t.root] in wanted:
        # the root is itself a labelled leaf (RHO); keep it above the rest
        node = b.add(label=t.label[t.root])
        if top is not None:
            b.attach(top, node)
        top = node
    return b.freeze(top)


def isomorphic(t1: PhyloTree, t2: PhyloTree) -> bool:
    """Equal leaf-label sets and identical rooted topology under the
    leaf-label identification."""
    return t1.canonical() == t2.canonical()


# -- reductions ----------------------------------------------------------------


@dataclass(frozen=True)
class Chain:
    """Maximal tuple of taxa whose parents form a directed path (a cherry is
    allowed at the bottom) in every tree of the instance."""

    taxa: tuple

    def __len__(self):
        return len(self.taxa)


@dataclass(frozen=True)
class _ChainSub:
    chain: Chain
    cherry: bool  # True when the chain was pendant with p1 == p2 in this tree


@dataclass(frozen=True)
class _PendantSub:
    tree: PhyloTree


@dataclass
class TaxonMap:
    """Records what each synthetic label replaced, so reductions can be
    undone on trees and networks."""

    substitutions: dict = field(default_factory=dict)

    def merged(self, other: "TaxonMap") -> "TaxonMap":
        out = dict(self.substitutions)
        out.update(other.substitutions)
        return TaxonMap(out)

    def chain_taxa(self, label: str) -> tuple:
        sub = self.substitutions.get(label)
        if sub is None or not isinstance(sub, _ChainSub):
            raise MissingSubstitution(f"no chain recorded for {label!r}")
        return sub.chain.taxa

    def expand_labels(self, labels: Iterable[str], strict: bool = True) -> frozenset:
        """Replace synthetic labels by the taxa they stand for, recursively.

        With strict=False, synthetic labels without an entry pass through
        unchanged (they are taxa of a partially reduced instance)."""
        out = set()
        stack = list(labels)
        while stack:
            lbl = stack.pop()
            sub = self.substitutions.get(lbl)
            if sub is None:
                if strict and is_synthetic(lbl):
                    raise MissingSubstitution(f"no substitution for {lbl!r}")
                out.add(lbl)
            elif isinstance(sub, _ChainSub):
                stack.extend(sub.chain.taxa)
            else:
                stack.extend(sub.tree.leaf_labels())
        return frozenset(out)


def _fresh_label(prefix: str, counter: dict) -> str:
    n = counter.setdefault(prefix, 0)
    counter[prefix] = n + 1
    return f"{prefix}{n}"


def _copy_into(b: _TreeBuilder, src: PhyloTree, src_root: int, parent: int) -> int:
    top = b.add(label=src.label[src_root], parent=parent)
    stack = [(src_root, top)]
    while stack:
        old, new = stack.pop()
        for c in src.children[old]:
            stack.append((c, b.add(label=src.label[c], parent=new)))
    return top


def _to_builder(t: PhyloTree):
    b = _TreeBuilder()
    b.parent = list(t.parent)
    b.children = [list(c) for c in t.children]
    b.label = list(t.label)
    return b


def _extract_subtree(t: PhyloTree, top: int) -> PhyloTree:
    b = _TreeBuilder()
    root = b.add(label=t.label[top])
    stack = [(top, root)]
    while stack:
        old, new = stack.pop()
        for c in t.children[old]:
            stack.append((c, b.add(label=t.label[c], parent=new)))
    return b.freeze(root)


def _replace_clade(t: PhyloTree, node: int, label: str) -> PhyloTree:
    """Replace the pendant subtree rooted at `node` by a fresh leaf."""
    b = _to_builder(t)
    b.children[node] = []
    b.label[node] = label
    return b.freeze(t.root)


def common_pendant_subtree_reduction(ts: Sequence[PhyloTree]):
    """Collapse every maximal common pendant subtree on >= 2 taxa into a fresh
    synthetic leaf, in all trees, until none remains."""
    labels = ts[0].leaf_labels()
    for t in ts[1:]:
        if t.leaf_labels() != labels:
            raise LabelMismatch("trees must share one label set")
    trees = list(ts)
    mapping = TaxonMap()
    counter: dict = {}
    while True:
        clades = [t.clades() for t in trees]
        index = [{clades[i][v]: v for v in range(trees[i].n_nodes)
                  if trees[i].parent[v] is not None} for i in range(len(trees))]
        candidates = [c for c in index[0] if len(c) >= 2 and RHO not in c]
        candidates.sort(key=lambda c: (-len(c), sorted(c)))
        found = None
        for c in candidates:
            nodes = [index[i].get(c) for i in range(len(trees))]
            if any(v is None for v in nodes):
                continue
            shapes = {_extract_subtree(trees[i], nodes[i]).canonical()
                      for i in range(len(trees))}
            if len(shapes) == 1:
                found = (c, nodes)
                break
        if found is None:
            return tuple(trees), mapping
        c, nodes = found
        label = _fresh_label(SUBTREE_PREFIX, counter)
        mapping.substitutions[label] = _PendantSub(_extract_subtree(trees[0], nodes[0]))
        trees = [_replace_clade(trees[i], nodes[i], label) for i in range(len(trees))]


def is_chain_of(t: PhyloTree, taxa: Sequence[str]) -> bool:
    """The chain predicate, literally: (p_q..p_1) is a directed path, or
    (p_q..p_2) is and p_1 == p_2."""
    if not taxa:
        return False
    try:
        parents = [t.parent[t.node(x)] for x in taxa]
    except UnknownLabel:
        return False
    if len(taxa) == 1:
        return True

    def directed_path(seq):
        return all(t.parent[seq[i + 1]] == seq[i] and seq[i + 1] != seq[i]
                   for i in range(len(seq) - 1))

    top_down = list(reversed(parents))
    if directed_path(top_down):
        return True
    return parents[0] == parents[1] and directed_path(top_down[:-1])


def _leaf_sib(t: PhyloTree, x: str) -> Optional[str]:
    s = t.sibling(t.node(x))
    if s is not None and t.is_leaf(s):
        return t.label[s]
    return None


def _leaf_up(t: PhyloTree, x: str) -> Optional[str]:
    p = t.parent[t.node(x)]
    g = t.parent[p]
    if g is None:
        return None
    others = [c for c in t.children[g] if c != p]
    if len(others) == 1 and t.is_leaf(others[0]):
        lbl = t.label[others[0]]
        return lbl if lbl != RHO else None
    return None


def common_chains(ts: Sequence[PhyloTree]) -> list:
    """All maximal common chains, as a deterministic partition of the taxa.

    Above the bottom position only pure parent-path steps are allowed; the
    bottom pair may be a cherry in some trees and a path step in others.
    """
    taxa = sorted(ts[0].leaf_labels() - {RHO})
    up = {}
    sib = {}
    for x in taxa:
        ups = {_leaf_up(t, x) for t in ts}
        up[x] = ups.pop() if len(ups) == 1 and None not in ups else None
        sibs = {_leaf_sib(t, x) for t in ts}
        sib[x] = sibs.pop() if len(sibs) == 1 and None not in sibs else None

    used = set()
    chains = []

    def extend(seq):
        while True:
            nxt = up[seq[-1]]
            if nxt is None or nxt in used or nxt in seq:
                return
            # a pure up-step must hold in every tree, which `up` encodes
            seq.append(nxt)
            used.add(nxt)

    # all-tree cherries seed the chains that may start with a bottom pair
    for x in taxa:
        if x in used:
            continue
        y = sib[x]
        if y is not None and y not in used and sib[y] == x:
            lo, hi = sorted((x, y))
            seq = [lo, hi]
            used.update(seq)
            extend(seq)
            chains.append(Chain(tuple(seq)))

    def bottom_step(w, x):
        """True when (w, x) is valid as the lowest pair of a chain."""
        return all(x in {_leaf_up(t, w), _leaf_sib(t, w)} for t in ts)

    remaining = [x for x in taxa if x not in used]
    while remaining:
        progressed = False
        for x in list(remaining):
            if any(w not in used and bottom_step(w, x) for w in remaining if w != x):
                continue  # something below x still unplaced
            seq = [x]
            used.add(x)
            nxt = next((y for y in sorted(taxa) if y not in used and bottom_step(x, y)), None)
            if nxt is not None:
                seq.append(nxt)
                used.add(nxt)
            extend(seq)
            chains.append(Chain(tuple(seq)))
            progressed = True
            remaining = [r for r in remaining if r not in used]
            break
        if not progressed:  # mutually dependent leftovers: fall back to singletons
            x = remaining.pop(0)
            used.add(x)
            chains.append(Chain((x,)))
    chains.sort(key=lambda c: c.taxa[0])
    return chains


def collapse_chain(t: PhyloTree, chain: Chain, label: Optional[str] = None):
    """Replace the chain's leaves and internal chain edges by one synthetic
    leaf sitting where the top chain parent was attached."""
    if not is_chain_of(t, chain.taxa):
        raise NotAChain(f"{chain.taxa} is not a chain of the tree")
    if label is None:
        label = f"{CHAIN_PREFIX}{'_'.join(chain.taxa)}"
    taxa = chain.taxa
    nodes = [t.node(x) for x in taxa]
    parents = [t.parent[v] for v in nodes]
    cherry = len(taxa) >= 2 and parents[0] == parents[1]

    b = _to_builder(t)
    if len(taxa) == 1:
        b.label[nodes[0]] = label
        new_tree = b.freeze(t.root)
    elif cherry:
        top = parents[-1]
        b.children[top] = []
        b.label[top] = label
        new_tree = b.freeze(t.root)
    else:
        p_top, p_bottom = parents[-1], parents[0]
        z = [c for c in t.children[p_bottom] if c != nodes[0]][0]
        leaf = b.add(label=label)
        b.children[p_top] = []
        b.attach(leaf, p_top)
        b.attach(z, p_top)
        new_tree = b.freeze(t.root)
    m = TaxonMap({label: _ChainSub(chain, cherry)})
    return new_tree, m


def _expand_chain_at(b: _TreeBuilder, leaf: int, sub: _ChainSub) -> None:
    taxa = sub.chain.taxa
    q = len(taxa)
    if q == 1:
        b.label[leaf] = taxa[0]
        return
    if sub.cherry:
        # the leaf becomes p_q of a pendant caterpillar ending in the cherry
        b.label[leaf] = None
        node = leaf
        for j in range(q, 2, -1):
            b.add(label=taxa[j - 1], parent=node)
            node = b.add(parent=node)
        b.add(label=taxa[1], parent=node)
        b.add(label=taxa[0], parent=node)
    else:
        # the leaf's parent kept the below-chain subtree z as its other child;
        # rebuild p_q..p_1 between them
        p = b.parent[leaf]
        z = [c for c in b.children[p] if c != leaf][0]
        b.label[leaf] = taxa[-1]
        b.children[p] = [leaf]
        node = p
        for j in range(q - 1, 0, -1):
            nxt = b.add(parent=node)
            b.add(label=taxa[j - 1], parent=nxt)
            node = nxt
        b.attach(z, node)


@functools.singledispatch
def expand_map(obj, m: TaxonMap):
    raise TypeError(f"cannot expand {type(obj).__name__}")


@expand_map.register
def _expand_tree(t: PhyloTree, m: TaxonMap) -> PhyloTree:
    """Replace every synthetic leaf by its recorded structure, recursively."""
    while True:
        synth = [lbl for lbl in t.leaf_labels() if is_synthetic(lbl)]
        if not synth:
            return t
        b = _to_builder(t)
        for lbl in synth:
            sub = m.substitutions.get(lbl)
            if sub is None:
                raise MissingSubstitution(f"no substitution for {lbl!r}")
            leaf = t.node(lbl)
            if isinstance(sub, _PendantSub):
                b.label[leaf] = None
                src = sub.tree
                if src.n_nodes == 1:
                    b.label[leaf] = src.label[src.root]
                else:
                    for c in src.children[src.root]:
                        _copy_into(b, src, c, leaf)
            else:
                _expand_chain_at(b, leaf, sub)
        t = b.freeze(t.root)


def random_tree(labels: Sequence[str], rng) -> PhyloTree:
    """Uniform-ish random rooted binary tree over `labels`, plus the RHO root."""
    b = _TreeBuilder()
    rho = b.add(label=RHO)
    items = [b.add(label=x) for x in labels]
    rng.shuffle(items)
    while len(items) > 1:
        i = rng.randrange(len(items) - 1)
        u = items.pop(i + 1)
        v = items[i]
        node = b.add()
        b.attach(u, node)
        b.attach(v, node)
        items[i] = node
    b.attach(items[0], rho)
    return b.freeze(rho)
