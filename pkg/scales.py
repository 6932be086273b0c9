"""
Multiscale decomposition: gamma sequence, scale labels, clusters and self-energy graphs
"""
import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np

from errors import ScaleOutOfRange, SeparationUnachievable
from log_config import logger
from model import FULL, Frequency
from trees import Entry, LabeledTree, Node, Vertex
from utils import Mode, l1, mode_ball_array


@dataclass
class ScaleSequence:
    n_min: int
    gammas: Dict[int, float]
    normalization: float
    tau: float
    ball_radius: int

    def __repr__(self):
        shown = ", ".join(f"{n}: {self.gammas[n]:.6f}" for n in sorted(self.gammas, reverse=True))
        return f"<ScaleSequence(n_min={self.n_min}, gammas={{{shown}}})>"

    @property
    def floor(self) -> float:
        """Smallest raw divisor that still receives a scale"""
        return self.gammas[self.n_min] / self.normalization

    def scale_of(self, value: complex) -> int:
        """Scale label of a divisor omega.nu (or of |x| for a complex argument)"""
        v = abs(self.normalization * complex(value))
        if v >= self.gammas[0]:
            return 1
        for n in range(0, self.n_min, -1):
            if self.gammas[n - 1] <= v < self.gammas[n]:
                return n
        raise ScaleOutOfRange(abs(complex(value)), self.floor)

    def window(self, n: int) -> Tuple[float, float]:
        """Raw |x| interval [low, high) carrying scale n"""
        if n == 1:
            return self.gammas[0] / self.normalization, math.inf
        if not self.n_min < n <= 0:
            raise ValueError(f"scale {n} outside {self.n_min + 1}..1")
        return self.gammas[n - 1] / self.normalization, self.gammas[n] / self.normalization

    def sample(self, n: int) -> float:
        """A representative |x| inside the window of scale n"""
        low, high = self.window(n)
        return 2.0 * low if math.isinf(high) else 0.5 * (low + high)

    @property
    def scales(self) -> List[int]:
        return list(range(1, self.n_min, -1))


def _constraints(values: np.ndarray, norms: np.ndarray, p: int, n_min: int, tau: float) -> Tuple[np.ndarray, np.ndarray]:
    """Divisor values binding at scale p and their required separations"""
    with np.errstate(divide='ignore'):
        n_star = np.floor(-3.0 - tau * np.log2(norms)).astype(int)
    n_star = np.minimum(n_star, p)
    active = n_star >= n_min
    return values[active], 2.0 ** (n_star[active] + 1)


def _slack(gamma: float, values: np.ndarray, seps: np.ndarray) -> float:
    if len(values) == 0:
        return math.inf
    return float(np.min(np.abs(values - gamma) - seps))


def build_scale_sequence(freq: Frequency, n_min: int, grid: int = 1024, floor: int = -12) -> ScaleSequence:
    """
    Choose gamma_n in [2^(n-1), 2^n] for n = 0..n_min, each separated from the rescaled divisors

    The midpoint 3 2^(n-2) is taken when admissible, otherwise the grid point of
    largest margin. The result is re-checked exhaustively.

    Raises:
        SeparationUnachievable: no grid point keeps the required distance
    """
    if n_min > 0 or n_min < floor:
        raise ValueError(f"n_min must be between {floor} and 0, got {n_min}")
    radius = int(math.floor(2.0 ** (-(n_min + 3) / freq.tau)))
    modes = mode_ball_array(freq.r, radius)
    values = np.abs(modes @ np.array(freq.omega0)) if len(modes) else np.zeros(0)
    norms = np.abs(modes).sum(axis=1).astype(float) if len(modes) else np.zeros(0)

    gammas: Dict[int, float] = {}
    for p in range(0, n_min - 1, -1):
        vals, seps = _constraints(values, norms, p, n_min, freq.tau)
        midpoint = 3.0 * 2.0 ** (p - 2)
        if _slack(midpoint, vals, seps) >= 0:
            gammas[p] = midpoint
            continue
        candidates = np.linspace(2.0 ** (p - 1), 2.0 ** p, grid)
        slacks = np.array([_slack(g, vals, seps) for g in candidates])
        best = int(np.argmax(slacks))
        if slacks[best] < 0:
            blocking = [tuple(int(c) for c in modes[i]) for i in range(len(modes))
                        if abs(values[i] - candidates[best]) < 2.0 ** (p + 1)]
            raise SeparationUnachievable(p, blocking)
        gammas[p] = float(candidates[best])

    sequence = ScaleSequence(n_min=n_min, gammas=gammas, normalization=freq.normalization,
                             tau=freq.tau, ball_radius=radius)
    violations = verify_separation(sequence, freq)
    if violations:
        raise SeparationUnachievable(violations[0][0], [v[1] for v in violations])
    logger.info(f"Built {sequence!r} on |nu| <= {radius}")
    return sequence


def verify_separation(sequence: ScaleSequence, freq: Frequency) -> List[Tuple[int, Mode]]:
    """(p, nu) pairs breaking ||omega0.nu| - gamma_p| >= 2^(n+1) for some n <= p on the checked ball"""
    modes = mode_ball_array(freq.r, sequence.ball_radius)
    violations = []
    if len(modes) == 0:
        return violations
    values = np.abs(modes @ np.array(freq.omega0))
    norms = np.abs(modes).sum(axis=1)
    for p, gamma in sequence.gammas.items():
        for n in range(sequence.n_min, p + 1):
            inside = norms <= 2.0 ** (-(n + 3) / freq.tau)
            bad = inside & ((np.abs(values - gamma) < 2.0 ** (n + 1)) | (values == gamma))
            for i in np.nonzero(bad)[0]:
                violations.append((p, tuple(int(c) for c in modes[i])))
    return violations


@dataclass
class Cluster:
    scale: int
    nodes: FrozenSet[int]
    lines: FrozenSet[int]
    entering: Tuple[int, ...]
    exiting: Optional[int]


@dataclass
class SelfEnergyGraph:
    top: int
    bottom: int
    nodes: FrozenSet[int]
    scale: int
    internal_scale: Optional[int]
    t0_nodes: FrozenSet[int]
    mode_mass: int
    height: int
    reduced: Dict[int, Tuple[Mode, int]] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.nodes)


@dataclass
class ScaledTree:
    tree: LabeledTree
    scales: Dict[int, int]
    clusters: List[Cluster]
    self_energy_graphs: List[SelfEnergyGraph]

    def vertices(self) -> List[Vertex]:
        return self.tree.vertices()


def _descendants(verts: List[Vertex], vid: int) -> FrozenSet[int]:
    out = {vid}
    stack = [vid]
    while stack:
        for c in verts[stack.pop()].children:
            out.add(c)
            stack.append(c)
    return frozenset(out)


def _clusters(verts: List[Vertex], scales: Dict[int, int]) -> List[Cluster]:
    clusters = []
    for n in sorted(set(scales.values())):
        parent = {v.id: v.id for v in verts if v.kind == 'node'}

        def find(a: int) -> int:
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for vid, scale in scales.items():
            p = verts[vid].parent
            if scale >= n and p is not None and verts[vid].kind == 'node':
                parent[find(vid)] = find(p)
        groups: Dict[int, set] = {}
        for vid in parent:
            groups.setdefault(find(vid), set()).add(vid)
        for members in groups.values():
            lines = frozenset(w for w in members if verts[w].parent in members and scales.get(w, -math.inf) >= n)
            if not any(scales[w] == n for w in lines):
                continue
            entering = tuple(sorted(c for w in members for c in verts[w].children if c not in members))
            tops = [w for w in members if verts[w].parent not in members]
            clusters.append(Cluster(scale=n, nodes=frozenset(members), lines=lines,
                                    entering=entering, exiting=tops[0] if tops else None))
    return clusters


def _reduced_momenta(verts: List[Vertex], nodes: FrozenSet[int], top: int, bottom: int) -> Dict[int, Tuple[Mode, int]]:
    """Internal lines of a graph split as nu0 + sigma nu_entering"""
    path = set()
    w = verts[bottom].parent
    while w is not None and w != top:
        path.add(w)
        w = verts[w].parent
    r = len(verts[top].nu)
    out = {}
    for w in nodes:
        if w == top:
            continue
        inside = _descendants(verts, w) & nodes
        nu0 = tuple(int(sum(verts[x].nu[i] for x in inside)) for i in range(r))
        out[w] = (nu0, 1 if w in path else 0)
    return out


def _detect_self_energy(verts: List[Vertex], scales: Dict[int, int], tau: float) -> List[SelfEnergyGraph]:
    candidates = []
    for v in verts:
        if v.kind != 'node':
            continue
        below = _descendants(verts, v.id)
        for u_id in sorted(below - {v.id}):
            u = verts[u_id]
            if u.kind != 'node' or u.momentum != v.momentum or u_id not in scales:
                continue
            nodes = below - _descendants(verts, u_id)
            if any(verts[w].kind != 'node' for w in nodes):
                continue
            n = scales[u_id]
            internal = [w for w in nodes if w != v.id]
            if any(scales.get(w, -math.inf) <= n for w in internal):
                continue
            internal_scale = min((scales[w] for w in internal), default=None)
            candidates.append((len(nodes), v.id, u_id, frozenset(nodes), n, internal_scale))

    graphs: List[SelfEnergyGraph] = []
    for _, top, bottom, nodes, n, internal_scale in sorted(candidates):
        nested = [g for g in graphs if g.nodes < nodes]
        t0 = frozenset(nodes - frozenset().union(*[g.nodes for g in nested]))
        mass = sum(l1(verts[w].nu) for w in t0)
        if mass <= 2.0 ** (-(n + 3) / tau):
            height = 1 + max(g.height for g in nested) if nested else 0
            graphs.append(SelfEnergyGraph(top=top, bottom=bottom, nodes=nodes, scale=n,
                                          internal_scale=internal_scale, t0_nodes=t0, mode_mass=mass,
                                          height=height, reduced=_reduced_momenta(verts, nodes, top, bottom)))
    return graphs


def assign_scales(tree: LabeledTree, sequence: ScaleSequence, freq: Frequency) -> ScaledTree:
    """
    Label every line, build the clusters and detect the self-energy graphs

    Lines with zero momentum (leaf lines, the root line of a reduced value) get no scale.
    """
    verts = tree.vertices()
    scales = {v.id: sequence.scale_of(freq.dot(v.momentum))
              for v in verts if v.kind == 'node' and any(v.momentum)}
    clusters = _clusters(verts, scales)
    graphs = _detect_self_energy(verts, scales, freq.tau)
    return ScaledTree(tree=tree, scales=scales, clusters=clusters, self_energy_graphs=graphs)


def has_self_energy_graph(node: Node, sequence: ScaleSequence, freq: Frequency) -> bool:
    """Renormalized-tree filter"""
    return bool(assign_scales(LabeledTree(node), sequence, freq).self_energy_graphs)


@dataclass
class BryunoRow:
    scale: int
    lines: int
    non_resonant: int
    self_energy: int
    bound: float

    @property
    def ok(self) -> bool:
        return self.non_resonant <= self.bound


@dataclass
class BryunoReport:
    mode_mass: int
    rows: List[BryunoRow]

    @property
    def ok(self) -> bool:
        return all(row.ok for row in self.rows)

    @property
    def violations(self) -> List[BryunoRow]:
        return [row for row in self.rows if not row.ok]


def bryuno_check(scaled: ScaledTree, sequence: ScaleSequence) -> BryunoReport:
    """
    Count lines per scale n <= 0 against max{0, 2 M 2^((n+3)/tau) - 1}

    Lines exiting a self-energy graph are not counted in the non-resonant column.
    """
    verts = scaled.vertices()
    mass = sum(l1(v.nu) for v in verts if v.kind == 'node')
    exiting = {g.top for g in scaled.self_energy_graphs}
    rows = []
    for n in range(0, sequence.n_min, -1):
        at_scale = [vid for vid, s in scaled.scales.items() if s == n]
        rows.append(BryunoRow(
            scale=n,
            lines=len(at_scale),
            non_resonant=sum(1 for vid in at_scale if vid not in exiting),
            self_energy=sum(1 for g in scaled.self_energy_graphs if g.scale == n),
            bound=max(0.0, 2.0 * mass * 2.0 ** ((n + 3) / sequence.tau) - 1.0),
        ))
    return BryunoReport(mode_mass=mass, rows=rows)


LineId = Union[str, FrozenSet[int]]


@dataclass
class ShiftedTree:
    attach: Tuple[int, int]
    parents: Dict[int, Optional[int]]
    momenta: Dict[int, Mode]
    scales: Dict[LineId, int]
    skeleton: Node

    def same_scales(self, other: "ShiftedTree") -> bool:
        return self.scales == other.scales


def _shift(scaled: ScaledTree, graph: SelfEnergyGraph, a: int, b: int,
           sequence: ScaleSequence, freq: Frequency) -> Optional[ShiftedTree]:
    verts = scaled.vertices()
    parents = {v.id: v.parent for v in verts}
    adjacency: Dict[int, List[int]] = {w: [] for w in graph.nodes}
    for w in graph.nodes:
        p = verts[w].parent
        if w != graph.top and p in graph.nodes:
            adjacency[w].append(p)
            adjacency[p].append(w)
    parents[a] = verts[graph.top].parent
    stack, seen = [a], {a}
    while stack:
        w = stack.pop()
        for x in adjacency[w]:
            if x not in seen:
                seen.add(x)
                parents[x] = w
                stack.append(x)
    parents[graph.bottom] = b

    children: Dict[int, List[int]] = {v.id: [] for v in verts}
    root = None
    for w, p in parents.items():
        if p is None:
            root = w
        else:
            children[p].append(w)
    r = freq.r
    momenta: Dict[int, Mode] = {}

    def accumulate(w: int) -> Mode:
        total = tuple(verts[w].nu) if verts[w].kind == 'node' else (0,) * r
        for c in children[w]:
            total = tuple(x + y for x, y in zip(total, accumulate(c)))
        momenta[w] = total
        return total

    accumulate(root)
    scales: Dict[LineId, int] = {}
    for w, momentum in momenta.items():
        if verts[w].kind != 'node':
            continue
        if w in graph.nodes and w != a and not any(momentum):
            return None
        if not any(momentum):
            continue
        if w == a:
            line: LineId = 'exit'
        elif w == graph.bottom:
            line = 'enter'
        elif parents[w] is None:
            line = 'root'
        else:
            line = frozenset((w, parents[w]))
        scales[line] = sequence.scale_of(freq.dot(momentum))

    def build(w: int) -> Node:
        kids = [build(c) for c in children[w] if c in graph.nodes]
        if b == w:
            kids.append(Entry())
        return Node(verts[w].nu, FULL, tuple(kids))

    return ShiftedTree(attach=(a, b), parents=parents, momenta=momenta, scales=scales, skeleton=build(a))


def shift_family(scaled: ScaledTree, graph: SelfEnergyGraph, sequence: ScaleSequence,
                 freq: Frequency) -> List[ShiftedTree]:
    """
    Re-attach the exiting and entering lines of a self-energy graph to every pair of its T0 nodes

    The first member is the unshifted tree.
    """
    verts = scaled.vertices()
    original = _shift(scaled, graph, graph.top, verts[graph.bottom].parent, sequence, freq)
    members = [original]
    for a in sorted(graph.t0_nodes):
        for b in sorted(graph.t0_nodes):
            if (a, b) == original.attach:
                continue
            try:
                member = _shift(scaled, graph, a, b, sequence, freq)
            except ScaleOutOfRange:
                member = None
            if member is not None:
                members.append(member)
    return members


def graph_skeleton(scaled: ScaledTree, graph: SelfEnergyGraph, sequence: ScaleSequence,
                   freq: Frequency) -> Node:
    """The self-energy graph as a collapsed skeleton with an entry marker"""
    verts = scaled.vertices()
    return _shift(scaled, graph, graph.top, verts[graph.bottom].parent, sequence, freq).skeleton


if __name__ == "__main__":
    from model import load_model, reference_document

    ref1 = load_model(reference_document())
    seq = build_scale_sequence(ref1.frequency, -6)
    print(seq)
