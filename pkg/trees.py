"""
Labelled tree expansion: enumeration of topological trees, tree values and the cancellation checks
"""
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from errors import SingularHessian, ZeroDivisorLine
from log_config import logger
from model import ALPHA, BETA, FULL, Model
from utils import Mode, add_modes, l1, mode_ball, sub_modes, zero_mode

LABELS = (ALPHA, BETA)


@dataclass(frozen=True, eq=False)
class Leaf:
    """Endpoint of order kappa carrying the counterterm b^(kappa)_0"""
    kappa: int
    gamma: str = BETA
    key: Tuple = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, 'key', (0, self.kappa, self.gamma))

    def __eq__(self, other):
        return isinstance(other, (Leaf, Node, Entry)) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    @property
    def order(self) -> int:
        return self.kappa

    @property
    def momentum(self) -> Optional[Mode]:
        return None


@dataclass(frozen=True, eq=False)
class Entry:
    """Open entering line of a self-energy skeleton"""
    key: Tuple = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, 'key', (-1,))

    def __eq__(self, other):
        return isinstance(other, (Leaf, Node, Entry)) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    @property
    def order(self) -> int:
        return 0

    @property
    def momentum(self) -> Optional[Mode]:
        return None


Item = Union['Node', Leaf, Entry]


@dataclass(frozen=True, eq=False)
class Node:
    """Node with mode nu whose exiting line has label gamma; children kept in canonical order"""
    nu: Mode
    gamma: str
    children: Tuple[Item, ...] = ()
    key: Tuple = field(init=False, repr=False)
    order: int = field(init=False, repr=False)
    momentum: Mode = field(init=False, repr=False)

    def __post_init__(self):
        children = tuple(sorted(self.children, key=lambda c: c.key))
        object.__setattr__(self, 'children', children)
        object.__setattr__(self, 'key', (1, tuple(self.nu), self.gamma, tuple(c.key for c in children)))
        object.__setattr__(self, 'order', 1 + sum(c.order for c in children))
        momentum = tuple(self.nu)
        for child in children:
            if child.momentum is not None:
                momentum = add_modes(momentum, child.momentum)
        object.__setattr__(self, 'momentum', momentum)

    def __eq__(self, other):
        return isinstance(other, (Leaf, Node, Entry)) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    @property
    def has_entry(self) -> bool:
        return any(isinstance(c, Entry) or (isinstance(c, Node) and c.has_entry) for c in self.children)


@dataclass
class Vertex:
    id: int
    kind: str
    nu: Optional[Mode]
    kappa: Optional[int]
    gamma: Optional[str]
    parent: Optional[int]
    children: Tuple[int, ...]
    momentum: Mode
    depth: int
    order: int


class LabeledTree:
    """A rooted tree with a flat vertex view; vertex 0 is the root node"""

    def __init__(self, root: Node):
        self.root = root
        self._vertices: Optional[List[Vertex]] = None

    def __repr__(self):
        return f"<LabeledTree(order={self.order}, momentum={self.momentum}, nodes={self.node_count})>"

    def __eq__(self, other):
        return isinstance(other, LabeledTree) and self.root.key == other.root.key

    def __hash__(self):
        return hash(self.root.key)

    @property
    def key(self) -> Tuple:
        return self.root.key

    @property
    def order(self) -> int:
        return self.root.order

    @property
    def momentum(self) -> Mode:
        return self.root.momentum

    @property
    def gamma(self) -> str:
        return self.root.gamma

    @property
    def r(self) -> int:
        return len(self.root.nu)

    @property
    def node_count(self) -> int:
        return sum(1 for v in self.vertices() if v.kind == 'node')

    def vertices(self) -> List[Vertex]:
        if self._vertices is None:
            out: List[Vertex] = []
            zero = zero_mode(self.r)

            def visit(item: Item, parent: Optional[int], depth: int) -> int:
                vid = len(out)
                if isinstance(item, Node):
                    out.append(Vertex(vid, 'node', item.nu, None, item.gamma, parent, (), item.momentum,
                                      depth, item.order))
                    children = tuple(visit(c, vid, depth + 1) for c in item.children)
                    out[vid].children = children
                elif isinstance(item, Leaf):
                    out.append(Vertex(vid, 'leaf', None, item.kappa, item.gamma, parent, (), zero,
                                      depth, item.order))
                else:
                    out.append(Vertex(vid, 'entry', None, None, None, parent, (), zero, depth, 0))
                return vid

            visit(self.root, None, 0)
            self._vertices = out
        return self._vertices

    def item_at(self, vid: int) -> Item:
        """The subtree rooted at a vertex id (pre-order numbering)"""
        found: List[Item] = []

        def visit(item: Item, counter: List[int]):
            if counter[0] == vid:
                found.append(item)
            counter[0] += 1
            if isinstance(item, Node):
                for child in item.children:
                    visit(child, counter)

        visit(self.root, [0])
        return found[0]

    def p_q_delta(self, vid: int) -> Tuple[int, int, int]:
        """Entering alpha lines, entering beta lines (leaves included), exiting-beta flag"""
        verts = self.vertices()
        vertex = verts[vid]
        p = sum(1 for c in vertex.children if verts[c].gamma == ALPHA)
        q = sum(1 for c in vertex.children if verts[c].gamma == BETA)
        return p, q, int(vertex.gamma == BETA)


_FACTOR_CACHE: Dict[Tuple, Fraction] = {}


def symmetry_factor(item: Item) -> Fraction:
    """Product over nodes of 1/(s_1! ... s_j!) with s_i the multiplicities of identical subtrees"""
    if not isinstance(item, Node):
        return Fraction(1)
    cached = _FACTOR_CACHE.get(item.key)
    if cached is not None:
        return cached
    factor = Fraction(1)
    for child in item.children:
        factor *= symmetry_factor(child)
    for multiplicity in Counter(c.key for c in item.children).values():
        factor /= math.factorial(multiplicity)
    _FACTOR_CACHE[item.key] = factor
    return factor


class TreeEnumerator:
    """
    Memoized generator of canonical trees

    Args:
        model: Model whose support supplies the node modes
        collapsed: Lines carry full d-vectors (label FULL) instead of alpha/beta labels
        leaves: Allow leaves of order 1..k-1
        prune: Skip nodes whose tensor is identically zero for their leg counts
        accept: Extra predicate applied to every constructed subtree
    """

    def __init__(self, model: Model, collapsed: bool = False, leaves: bool = True, prune: bool = True,
                 accept: Optional[Callable[[Node], bool]] = None):
        self.model = model
        self.collapsed = collapsed
        self.leaves = leaves
        self.prune = prune
        self.accept = accept
        self.labels = (FULL,) if collapsed else LABELS
        self.leaf_gamma = FULL if collapsed else BETA
        self._rooted_cache: Dict[Tuple[int, Mode, str], Tuple[Node, ...]] = {}
        self._pool_cache: Dict[int, Tuple[Item, ...]] = {}

    def trees(self, k: int, nu: Mode, gamma: str) -> List[LabeledTree]:
        if k < 1:
            raise ValueError("k must be at least 1")
        if gamma not in self.labels:
            raise ValueError(f"label {gamma} not produced by this enumerator")
        result = [LabeledTree(node) for node in self._rooted(k, tuple(nu), gamma)]
        logger.debug(f"Enumerated {len(result)} trees at k={k}, nu={tuple(nu)}, gamma={gamma}")
        return result

    def _pool(self, m: int) -> Tuple[Item, ...]:
        """Every admissible child of order <= m, in key order"""
        cached = self._pool_cache.get(m)
        if cached is not None:
            return cached
        items: List[Item] = []
        if self.leaves:
            items.extend(Leaf(j, self.leaf_gamma) for j in range(1, m + 1))
        for j in range(1, m + 1):
            for nu in mode_ball(self.model.r, j * self.model.nf):
                for gamma in self.labels:
                    items.extend(self._rooted(j, nu, gamma))
        pool = tuple(sorted(items, key=lambda c: c.key))
        self._pool_cache[m] = pool
        return pool

    def _multisets(self, pool: Tuple[Item, ...], start: int, remaining: int,
                   momentum: Mode) -> Iterator[Tuple[Item, ...]]:
        if remaining == 0:
            if not any(momentum):
                yield ()
            return
        nf = self.model.nf
        for index in range(start, len(pool)):
            item = pool[index]
            if item.order > remaining:
                continue
            rest_momentum = momentum if item.momentum is None else sub_modes(momentum, item.momentum)
            rest = remaining - item.order
            if l1(rest_momentum) > rest * nf:
                continue
            for tail in self._multisets(pool, index, rest, rest_momentum):
                yield (item,) + tail

    def _leg_counts(self, children: Sequence[Item], gamma: str) -> Tuple[int, int, int]:
        n_alpha = n_beta = n_full = 0
        for g in [c.gamma if not isinstance(c, Entry) else FULL for c in children] + [gamma]:
            if g == ALPHA:
                n_alpha += 1
            elif g == BETA:
                n_beta += 1
            else:
                n_full += 1
        return n_alpha, n_beta, n_full

    def _rooted(self, k: int, nu: Mode, gamma: str) -> Tuple[Node, ...]:
        key = (k, nu, gamma)
        cached = self._rooted_cache.get(key)
        if cached is not None:
            return cached
        found: Dict[Tuple, Node] = {}
        if l1(nu) <= k * self.model.nf:
            pool = self._pool(k - 1) if k > 1 else ()
            for nu0 in self.model.perturbation.support:
                rest = sub_modes(nu, nu0)
                if l1(rest) > (k - 1) * self.model.nf:
                    continue
                for children in self._multisets(pool, 0, k - 1, rest):
                    if self.prune and self.model.is_vanishing(nu0, *self._leg_counts(children, gamma)):
                        continue
                    node = Node(nu0, gamma, children)
                    if self.accept is not None and not self.accept(node):
                        continue
                    found[node.key] = node
        result = tuple(found[key] for key in sorted(found))
        self._rooted_cache[key] = result
        return result


def enumerate_trees(model: Model, k: int, nu: Mode, gamma: str,
                    enumerator: Optional[TreeEnumerator] = None) -> List[LabeledTree]:
    """One representative per topological class of trees of order k, momentum nu, root label gamma"""
    if enumerator is None:
        enumerator = TreeEnumerator(model, collapsed=(gamma == FULL))
    return enumerator.trees(k, nu, gamma)


@dataclass
class TreeValue:
    value: np.ndarray
    combinatorial_factor: Fraction

    @property
    def weighted(self) -> np.ndarray:
        return self.value * float(self.combinatorial_factor)


def bare_propagator(model: Model, x: complex) -> np.ndarray:
    """Diagonal 1/x^2 propagator on C^d"""
    if x == 0:
        raise ZeroDivisorLine("bare propagator at zero argument")
    return np.eye(model.d, dtype=complex) / x ** 2


class TreeEvaluator:
    """
    Values of trees for a fixed leaf source

    Args:
        model: Model providing node factors
        leaf_source: kappa -> b^(kappa)_0 (length s)
        propagator: None for bare lines, or a callable (omega.nu) -> d x d matrix (collapsed trees only)
        dtype: Arithmetic dtype of node factors
    """

    def __init__(self, model: Model, leaf_source: Dict[int, np.ndarray],
                 propagator: Optional[Callable[[float], np.ndarray]] = None, dtype=np.complex128):
        self.model = model
        self.leaf_source = leaf_source
        self.propagator = propagator
        self.dtype = dtype
        self._line_cache: Dict[Tuple, np.ndarray] = {}

    def divisor(self, momentum: Mode):
        real = np.longdouble if np.dtype(self.dtype) == np.dtype(np.clongdouble) else np.float64
        return np.dot(self.model.frequency.omega_array(real), np.array(momentum, dtype=real))

    def _propagate(self, out: np.ndarray, momentum: Mode, gamma: str) -> np.ndarray:
        x = self.divisor(momentum)
        if x == 0:
            raise ZeroDivisorLine(f"line with zero momentum and label {gamma}")
        if self.propagator is None:
            return out / x ** 2
        if gamma != FULL:
            raise ValueError("dressed propagators act on collapsed trees only")
        return self.propagator(float(x)) @ out

    def leaf_vector(self, leaf: Leaf) -> np.ndarray:
        if leaf.kappa not in self.leaf_source:
            raise ValueError(f"no leaf factor available for order {leaf.kappa}")
        b = np.asarray(self.leaf_source[leaf.kappa], dtype=self.dtype)
        return self.model.embed(b, BETA)

    def node_output(self, node: Node) -> np.ndarray:
        """Node factor contracted with its children, sliced to the exiting label"""
        inputs = [self.line_vector(child) for child in node.children]
        return self.model.node_factor(node.nu, inputs, node.gamma, dtype=self.dtype)

    def line_vector(self, item: Item) -> np.ndarray:
        """d-vector carried by the line exiting an item, propagator included"""
        if isinstance(item, Leaf):
            return self.leaf_vector(item)
        if isinstance(item, Entry):
            raise ValueError("entry markers are evaluated by the self-energy code")
        cached = self._line_cache.get(item.key)
        if cached is not None:
            return cached
        out = self._propagate(self.node_output(item), item.momentum, item.gamma)
        vector = self.model.embed(out, item.gamma) if item.gamma != FULL else out
        self._line_cache[item.key] = vector
        return vector

    def value(self, tree: Union[LabeledTree, Node], reduced: bool = False) -> TreeValue:
        """Val, or Val' without the root propagator when reduced"""
        root = tree.root if isinstance(tree, LabeledTree) else tree
        out = self.node_output(root)
        if not reduced:
            out = self._propagate(out, root.momentum, root.gamma)
        return TreeValue(value=out, combinatorial_factor=symmetry_factor(root))


def tree_value(model: Model, tree: LabeledTree, leaf_source: Dict[int, np.ndarray],
               reduced: bool = False) -> TreeValue:
    return TreeEvaluator(model, leaf_source).value(tree, reduced=reduced)


def _label_width(model: Model, gamma: str) -> int:
    return model.r if gamma == ALPHA else model.s if gamma == BETA else model.d


def is_excluded_counterterm(tree: LabeledTree, kappa: int) -> bool:
    """The single tree whose reduced value is the hessian times b^(kappa)_0"""
    root = tree.root
    return (not any(root.nu) and len(root.children) == 1
            and isinstance(root.children[0], Leaf) and root.children[0].kappa == kappa)


def leaf_factor(model: Model, kappa: int, leaf_source: Dict[int, np.ndarray],
                enumerator: Optional[TreeEnumerator] = None, dtype=np.complex128,
                propagator: Optional[Callable[[float], np.ndarray]] = None) -> np.ndarray:
    """
    b^(kappa)_0 = -H^-1 sum of Val' over order-(kappa+1) zero-momentum beta trees,
    excluding the one-node tree with a single leaf of order kappa
    """
    enumerator = enumerator or TreeEnumerator(model)
    gamma = FULL if enumerator.collapsed else BETA
    evaluator = TreeEvaluator(model, leaf_source, propagator=propagator, dtype=dtype)
    total = np.zeros(model.d if gamma == FULL else model.s, dtype=dtype)
    for tree in enumerator.trees(kappa + 1, zero_mode(model.r), gamma):
        if is_excluded_counterterm(tree, kappa):
            continue
        total = total + evaluator.value(tree, reduced=True).weighted
    beta_part = total[model.r:] if gamma == FULL else total
    # dressed lines at complex eps give complex counterterms
    rhs = beta_part.astype(np.complex128) if propagator is not None else np.real(beta_part).astype(np.float64)
    try:
        solved = np.linalg.solve(model.equilibrium.hessian, rhs)
    except np.linalg.LinAlgError as e:
        raise SingularHessian(str(e)) from e
    return -solved


def leaf_factors(model: Model, K: int, enumerator: Optional[TreeEnumerator] = None) -> Dict[int, np.ndarray]:
    """b^(kappa)_0 for kappa = 1..K built recursively from lower orders"""
    enumerator = enumerator or TreeEnumerator(model)
    source: Dict[int, np.ndarray] = {}
    for kappa in range(1, K + 1):
        source[kappa] = leaf_factor(model, kappa, source, enumerator)
    return source


def sum_tree_values(model: Model, k: int, nu: Mode, gamma: str, leaf_source: Dict[int, np.ndarray],
                    enumerator: Optional[TreeEnumerator] = None, dtype=np.complex128) -> np.ndarray:
    """Sum of tree values reproducing the coefficient h^(k)_nu in its gamma slot"""
    nu = tuple(nu)
    if enumerator is None:
        enumerator = TreeEnumerator(model, collapsed=(gamma == FULL))
    if not any(nu):
        if gamma == ALPHA:
            return np.zeros(model.r, dtype=dtype)
        b = leaf_factor(model, k, leaf_source, enumerator, dtype=dtype)
        return b.astype(dtype) if gamma == BETA else model.embed(b.astype(dtype), BETA)
    evaluator = TreeEvaluator(model, leaf_source, dtype=dtype)
    total = np.zeros(_label_width(model, gamma), dtype=dtype)
    for tree in enumerator.trees(k, nu, gamma):
        total = total + evaluator.value(tree).weighted
    return total


@dataclass(frozen=True, eq=False)
class _Semi:
    order: int
    momentum: Optional[Mode]
    gamma: str
    vector: np.ndarray
    weight: Fraction


def semitopological_sum(model: Model, k: int, nu: Mode, gamma: str,
                        leaf_source: Dict[int, np.ndarray], dtype=np.complex128) -> np.ndarray:
    """
    Brute-force sum over trees with ordered children

    Entering alpha lines and beta lines are ordered separately with weight 1/(p! q!)
    (1/m! for collapsed trees); no canonical form and no pruning.
    """
    collapsed = gamma == FULL
    labels = (FULL,) if collapsed else LABELS
    leaf_gamma = FULL if collapsed else BETA
    evaluator = TreeEvaluator(model, leaf_source, dtype=dtype)
    memo: Dict[Tuple[int, Mode, str, bool], List[_Semi]] = {}
    nf = model.nf

    def sequences(pool: List[_Semi], remaining: int, momentum: Mode) -> Iterator[Tuple[_Semi, ...]]:
        if remaining == 0:
            if not any(momentum):
                yield ()
            return
        for item in pool:
            if item.order > remaining:
                continue
            rest_momentum = momentum if item.momentum is None else sub_modes(momentum, item.momentum)
            rest = remaining - item.order
            if l1(rest_momentum) > rest * nf:
                continue
            for tail in sequences(pool, rest, rest_momentum):
                yield (item,) + tail

    def pool(m: int) -> List[_Semi]:
        items = [_Semi(j, None, leaf_gamma, evaluator.leaf_vector(Leaf(j)), Fraction(1)) for j in range(1, m + 1)]
        for j in range(1, m + 1):
            for mode in mode_ball(model.r, j * nf):
                for label in labels:
                    items.extend(build(j, mode, label, False))
        return items

    def build(order: int, momentum: Mode, label: str, root: bool) -> List[_Semi]:
        key = (order, momentum, label, root)
        if key in memo:
            return memo[key]
        out: List[_Semi] = []
        children_pool = pool(order - 1) if order > 1 else []
        for nu0 in model.perturbation.support:
            rest = sub_modes(momentum, nu0)
            for seq in sequences(children_pool, order - 1, rest):
                if collapsed:
                    weight = Fraction(1, math.factorial(len(seq)))
                else:
                    labels_seq = [s.gamma for s in seq]
                    if labels_seq != sorted(labels_seq, key=lambda g: g != ALPHA):
                        continue
                    p = labels_seq.count(ALPHA)
                    weight = Fraction(1, math.factorial(p) * math.factorial(len(seq) - p))
                for child in seq:
                    weight *= child.weight
                output = model.node_factor(nu0, [s.vector for s in seq], label, dtype=dtype)
                if not root:
                    x = evaluator.divisor(momentum)
                    if x == 0:
                        raise ZeroDivisorLine(f"zero momentum line at order {order}")
                    output = output / x ** 2
                    output = model.embed(output, label) if label != FULL else output
                out.append(_Semi(order, momentum, label, output, weight))
        memo[key] = out
        return out

    trees = build(k, tuple(nu), gamma, True)
    total = np.zeros(_label_width(model, gamma), dtype=dtype)
    nu_zero = not any(nu)
    for tree in trees:
        value = tree.vector
        if not nu_zero:
            value = value / evaluator.divisor(tuple(nu)) ** 2
        total = total + value * float(tree.weight)
    return total


def mirror(tree: LabeledTree) -> LabeledTree:
    """Negate every node mode; the value becomes the complex conjugate"""

    def flip(item: Item) -> Item:
        if isinstance(item, Node):
            return Node(tuple(-c for c in item.nu), item.gamma, tuple(flip(c) for c in item.children))
        return item

    return LabeledTree(flip(tree.root))


def reroot(tree: LabeledTree, vid: int, root_gamma: str = ALPHA) -> LabeledTree:
    """
    Move the root to node vid

    Reversed lines keep their labels; the new root's exiting line takes root_gamma.
    """
    verts = tree.vertices()
    if verts[vid].kind != 'node':
        raise ValueError(f"vertex {vid} is not a node")

    def build(v: int, came_from: Optional[int], gamma: str) -> Item:
        vertex = verts[v]
        if vertex.kind == 'leaf':
            return Leaf(vertex.kappa, vertex.gamma)
        if vertex.kind == 'entry':
            return Entry()
        children = []
        for c in vertex.children:
            if c != came_from:
                children.append(build(c, v, verts[c].gamma))
        parent = vertex.parent
        if parent is not None and parent != came_from:
            children.append(build(parent, v, vertex.gamma))
        return Node(vertex.nu, gamma, tuple(children))

    return LabeledTree(build(vid, None, root_gamma))


def family_key(tree: LabeledTree, root_gamma: str = ALPHA) -> Tuple:
    """Smallest key over all re-rootings at nodes"""
    return min(reroot(tree, v.id, root_gamma).key for v in tree.vertices() if v.kind == 'node')


def root_shift_family(tree: LabeledTree, root_gamma: str = ALPHA) -> List[LabeledTree]:
    """Distinct trees obtained by moving the root to every node"""
    members: Dict[Tuple, LabeledTree] = {}
    for vertex in tree.vertices():
        if vertex.kind == 'node':
            shifted = reroot(tree, vertex.id, root_gamma)
            members.setdefault(shifted.key, shifted)
    return [members[key] for key in sorted(members)]


@dataclass
class FamilyResult:
    key: Tuple
    size: int
    sum_norm: float
    max_member: float
    enumerated: int

    @property
    def relative(self) -> float:
        return self.sum_norm / self.max_member if self.max_member > 0 else 0.0


@dataclass
class CancellationReport:
    order: int
    global_sum: np.ndarray
    max_summand: float
    tree_count: int
    families: List[FamilyResult] = field(default_factory=list)

    @property
    def relative(self) -> float:
        norm = float(np.max(np.abs(self.global_sum))) if self.global_sum.size else 0.0
        return norm / self.max_summand if self.max_summand > 0 else norm

    @property
    def worst_family(self) -> float:
        return max((f.relative for f in self.families), default=0.0)


def verify_zero_momentum_cancellation(model: Model, k: int, leaf_source: Dict[int, np.ndarray],
                                      enumerator: Optional[TreeEnumerator] = None,
                                      dtype=np.complex128) -> CancellationReport:
    """
    Sum Val' over zero-momentum alpha trees of order k, globally and per root-shift family

    Family members are rebuilt by re-rooting; members missing from the enumerated set
    were pruned as identically zero.
    """
    enumerator = enumerator or TreeEnumerator(model)
    evaluator = TreeEvaluator(model, leaf_source, dtype=dtype)
    trees = enumerator.trees(k, zero_mode(model.r), ALPHA)
    total = np.zeros(model.r, dtype=dtype)
    max_summand = 0.0
    grouped: Dict[Tuple, List[LabeledTree]] = {}
    for tree in trees:
        value = evaluator.value(tree, reduced=True).weighted
        total = total + value
        max_summand = max(max_summand, float(np.max(np.abs(value))))
        grouped.setdefault(family_key(tree), []).append(tree)

    families = []
    for key in sorted(grouped):
        members = root_shift_family(grouped[key][0])
        family_sum = np.zeros(model.r, dtype=dtype)
        largest = 0.0
        for member in members:
            value = evaluator.value(member, reduced=True).weighted
            family_sum = family_sum + value
            largest = max(largest, float(np.max(np.abs(value))))
        families.append(FamilyResult(key=key, size=len(members), sum_norm=float(np.max(np.abs(family_sum))),
                                     max_member=largest, enumerated=len(grouped[key])))
    logger.info(f"Order {k}: {len(trees)} zero-momentum trees in {len(families)} families")
    return CancellationReport(order=k, global_sum=total, max_summand=max_summand,
                              tree_count=len(trees), families=families)


def tree_dump(tree: LabeledTree) -> List[str]:
    """Indented parent/child listing with every label"""
    lines = []
    for vertex in tree.vertices():
        indent = "  " * vertex.depth
        if vertex.kind == 'node':
            p, q, delta = tree.p_q_delta(vertex.id)
            lines.append(f"{indent}node #{vertex.id} nu={vertex.nu} gamma={vertex.gamma} "
                         f"momentum={vertex.momentum} p={p} q={q} delta={delta}")
        elif vertex.kind == 'leaf':
            lines.append(f"{indent}leaf #{vertex.id} kappa={vertex.kappa} gamma={vertex.gamma}")
        else:
            lines.append(f"{indent}entry #{vertex.id}")
    return lines


if __name__ == "__main__":
    from model import load_model, reference_document
    from oracle import solve_to_order

    ref1 = load_model(reference_document())
    solution = solve_to_order(ref1, 3)
    for t in enumerate_trees(ref1, 2, (2, 1), ALPHA):
        print("\n".join(tree_dump(t)))
    print(sum_tree_values(ref1, 2, (2, 1), ALPHA, solution.leaf_source()))
    print(solution.h.get(2, (2, 1)))
