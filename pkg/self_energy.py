"""
Self-energy skeletons, the matrices M^[k](x; eps), dressed propagators and their checks
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from errors import NearSingularInversion, NoConvergence, ScaleOutOfRange, SingularPropagator
from log_config import logger
from model import FULL, Model, derivative_tensor
from scales import ScaleSequence, _detect_self_energy, assign_scales, shift_family
from trees import Entry, LabeledTree, Node, TreeEnumerator, family_key, symmetry_factor
from utils import Mode, complex_key, fit_slope, l1, mode_ball, zero_mode


@dataclass(eq=False)
class SelfEnergySkeleton:
    id: int
    root: Node
    V: int
    mass: int
    max_window: float
    lines: Tuple[Tuple[Mode, int], ...]
    reduced_scales: Tuple[float, ...]
    family: Tuple = field(repr=False, default=())

    def __repr__(self):
        return f"<SelfEnergySkeleton(id={self.id}, V={self.V}, mass={self.mass}, max_window={self.max_window})>"

    @property
    def key(self) -> Tuple:
        return self.root.key

    def admissible(self, n: int) -> bool:
        """
        Usable in M at scale n

        max_window >= n already forces every internal line onto scale n+3 or above,
        so the strict comparison below is the n_T >= n+3 threshold.
        """
        return self.max_window >= n and all(s > n for s in self.reduced_scales)


@dataclass
class SelfEnergyCatalog:
    skeletons: List[SelfEnergySkeleton]
    vmax: int
    scale_floor: int

    def __len__(self):
        return len(self.skeletons)

    def __iter__(self):
        return iter(self.skeletons)

    def by_size(self, V: int) -> List[SelfEnergySkeleton]:
        return [s for s in self.skeletons if s.V == V]


def _entry_placements(node: Node) -> List[Node]:
    """Every way of adding one entry marker to a node of the tree"""
    variants = [Node(node.nu, FULL, node.children + (Entry(),))]
    seen = set()
    for index, child in enumerate(node.children):
        if not isinstance(child, Node) or child.key in seen:
            continue
        seen.add(child.key)
        for inner in _entry_placements(child):
            children = node.children[:index] + (inner,) + node.children[index + 1:]
            variants.append(Node(node.nu, FULL, children))
    return variants


def strip_entry(item):
    """Skeleton with its entry marker removed"""
    if isinstance(item, Node):
        return Node(item.nu, item.gamma, tuple(strip_entry(c) for c in item.children if not isinstance(c, Entry)))
    return item


def skeleton_lines(root: Node) -> List[Tuple[Node, Mode, int]]:
    """Internal lines as (node below the line, nu0, sigma)"""
    out = []

    def visit(item: Node, is_root: bool):
        if not is_root:
            out.append((item, item.momentum, 1 if item.has_entry else 0))
        for child in item.children:
            if isinstance(child, Node):
                visit(child, False)

    visit(root, True)
    return out


def _reduced_scale(sequence: ScaleSequence, model: Model, nu0: Mode) -> float:
    try:
        return float(sequence.scale_of(model.frequency.dot(nu0)))
    except ScaleOutOfRange:
        return -math.inf


def has_nested_self_energy(root: Node, sequence: ScaleSequence, model: Model) -> bool:
    """Self-energy subgraphs detected with reduced momenta and reduced scales"""
    verts = LabeledTree(root).vertices()
    scales = {}
    for v in verts:
        if v.kind == 'node' and any(v.momentum):
            scale = _reduced_scale(sequence, model, v.momentum)
            if math.isfinite(scale):
                scales[v.id] = int(scale)
    return bool(_detect_self_energy(verts, scales, model.frequency.tau))


def build_catalog(model: Model, V_max: int, scale_floor: int, sequence: ScaleSequence) -> SelfEnergyCatalog:
    """
    All renormalized self-energy skeletons with at most V_max nodes

    Skeletons are leafless collapsed trees of zero total mode with one entry marker,
    nonzero reduced momentum on every internal line, no nested self-energy graph,
    a nonvanishing value and a window max_window >= scale_floor.
    """
    if V_max < 1:
        raise ValueError("V_max must be at least 1")
    enumerator = TreeEnumerator(model, collapsed=True, leaves=False, prune=False)
    zero = zero_mode(model.r)
    found: Dict[Tuple, Node] = {}
    for V in range(1, V_max + 1):
        for base in enumerator.trees(V, zero, FULL):
            for skeleton in _entry_placements(base.root):
                found.setdefault(skeleton.key, skeleton)

    probe = SelfEnergyMatrix(model, SelfEnergyCatalog([], V_max, scale_floor), sequence)
    skeletons: List[SelfEnergySkeleton] = []
    for key in sorted(found, key=lambda k: (found[k].order, k)):
        root = found[key]
        lines = skeleton_lines(root)
        if any(not any(nu0) for _, nu0, _ in lines):
            continue
        if has_nested_self_energy(root, sequence, model):
            continue
        V = root.order
        mass = sum(l1(v.nu) for v in LabeledTree(root).vertices() if v.kind == 'node')
        max_window = math.inf if mass == 0 else math.floor(-3.0 - model.frequency.tau * math.log2(mass))
        if max_window < scale_floor:
            continue
        candidate = SelfEnergySkeleton(
            id=len(skeletons), root=root, V=V, mass=mass, max_window=max_window,
            lines=tuple((nu0, sigma) for _, nu0, sigma in lines),
            reduced_scales=tuple(_reduced_scale(sequence, model, nu0) for _, nu0, _ in lines),
            family=family_key(LabeledTree(strip_entry(root)), FULL),
        )
        values = [probe.value(candidate, x, 1.0, 0) for x in (0.0, 0.1)]
        if max(float(np.max(np.abs(v))) for v in values) <= 1e-14:
            continue
        skeletons.append(candidate)
    logger.info(f"Catalog with V <= {V_max}: {len(skeletons)} skeletons")
    return SelfEnergyCatalog(skeletons=skeletons, vmax=V_max, scale_floor=scale_floor)


def catalog_families(catalog: SelfEnergyCatalog) -> Dict[Tuple, List[SelfEnergySkeleton]]:
    """Skeletons grouped by their unrooted structure (all exit/entry placements together)"""
    families: Dict[Tuple, List[SelfEnergySkeleton]] = {}
    for skeleton in catalog:
        families.setdefault(skeleton.family, []).append(skeleton)
    return families


@dataclass
class MLimitResult:
    matrix: np.ndarray
    iterations: int
    history: List[float]

    @property
    def ratios(self) -> List[float]:
        return [b / a for a, b in zip(self.history, self.history[1:]) if a > 0]


class SelfEnergyMatrix:
    """
    M^[k](x; eps) summed over a catalog, with memoized levels and dressed propagators

    Args:
        model: Model providing node factors
        catalog: Skeletons to sum
        sequence: Scale sequence deciding which skeletons are admissible at x
        condition_threshold: Largest accepted condition number of x^2 - M
    """

    def __init__(self, model: Model, catalog: SelfEnergyCatalog, sequence: ScaleSequence,
                 condition_threshold: float = 1e12):
        self.model = model
        self.catalog = catalog
        self.sequence = sequence
        self.condition_threshold = condition_threshold
        self._m_cache: Dict[Tuple, np.ndarray] = {}
        self._g_cache: Dict[Tuple, np.ndarray] = {}

    def propagator(self, level: int, y: complex, eps: complex) -> np.ndarray:
        if abs(y) < 1e-14:
            raise SingularPropagator(f"internal line argument {y!r} at level {level}")
        if level == 0:
            return np.eye(self.model.d, dtype=complex) / y ** 2
        return self.G(level, y, eps)

    def _evaluate(self, item: Node, x: complex, eps: complex, level: int, is_root: bool) -> np.ndarray:
        vectors = []
        linear = None
        for child in item.children:
            if isinstance(child, Entry):
                linear = np.eye(self.model.d, dtype=complex)
            elif child.has_entry:
                linear = self._evaluate(child, x, eps, level, False)
            else:
                vectors.append(self._evaluate(child, x, eps, level, False))
        out = self.model.node_factor(item.nu, vectors, FULL, linear=linear)
        if is_root:
            return out
        y = self.model.frequency.dot(item.momentum) + (x if item.has_entry else 0.0)
        return self.propagator(level, y, eps) @ out

    def value(self, skeleton: SelfEnergySkeleton, x: complex, eps: complex, level: int) -> np.ndarray:
        """eps^V times the skeleton value with level-`level` propagators on internal lines"""
        raw = self._evaluate(skeleton.root, x, eps, level, True)
        return (eps ** skeleton.V) * float(symmetry_factor(skeleton.root)) * raw

    def admissible(self, x: complex, window: Optional[int] = None) -> List[SelfEnergySkeleton]:
        n = self.sequence.scale_of(x) if window is None else window
        return [s for s in self.catalog if s.admissible(n)]

    def M(self, k: int, x: complex, eps: complex, window: Optional[int] = None) -> np.ndarray:
        """M^[k](x; eps); M^[0] = 0"""
        if k < 0:
            raise ValueError("k must be nonnegative")
        d = self.model.d
        if k == 0 or eps == 0:
            return np.zeros((d, d), dtype=complex)
        key = (k, complex_key(x), complex_key(eps), window)
        cached = self._m_cache.get(key)
        if cached is not None:
            return cached
        total = np.zeros((d, d), dtype=complex)
        for skeleton in self.admissible(x, window):
            total = total + self.value(skeleton, x, eps, k - 1)
        self._m_cache[key] = total
        return total

    def G(self, k: int, x: complex, eps: complex, window: Optional[int] = None) -> np.ndarray:
        """[x^2 - M^[k](x; eps)]^-1"""
        d = self.model.d
        if k == 0:
            return np.eye(d, dtype=complex) / x ** 2
        key = (k, complex_key(x), complex_key(eps), window)
        cached = self._g_cache.get(key)
        if cached is not None:
            return cached
        A = x ** 2 * np.eye(d, dtype=complex) - self.M(k, x, eps, window)
        condition = float(np.linalg.cond(A))
        if not np.isfinite(condition) or condition > self.condition_threshold:
            raise NearSingularInversion(x, eps, condition)
        inverse = np.linalg.inv(A)
        self._g_cache[key] = inverse
        return inverse

    def limit(self, x: complex, eps: complex, tol: float = 1e-12, k_max: int = 12,
              window: Optional[int] = None) -> MLimitResult:
        """Iterate the levels until successive matrices agree to tol in the infinity norm"""
        previous = self.M(1, x, eps, window)
        history = [float(np.linalg.norm(previous, np.inf))]
        if history[0] <= tol:
            return MLimitResult(previous, 1, history)
        for k in range(2, k_max + 1):
            current = self.M(k, x, eps, window)
            delta = float(np.linalg.norm(current - previous, np.inf))
            history.append(delta)
            if delta <= tol:
                logger.debug(f"M converged at k={k} for x={x!r}, eps={eps!r}")
                return MLimitResult(current, k, history)
            previous = current
        if len(history) >= 2 and history[-2] > 0 and history[-1] / history[-2] >= 1:
            raise NoConvergence(x, eps, history)
        logger.warning(f"M still contracting at k_max={k_max} for x={x!r}, eps={eps!r}: last step {history[-1]:.3e}")
        return MLimitResult(previous, k_max, history)

    def G_limit(self, x: complex, eps: complex, tol: float = 1e-12, k_max: int = 12,
                window: Optional[int] = None) -> np.ndarray:
        """Dressed propagator built on the limit matrix"""
        result = self.limit(x, eps, tol, k_max, window)
        return self.G(result.iterations, x, eps, window)


def self_energy_value(matrix: SelfEnergyMatrix, skeleton: SelfEnergySkeleton, x: complex, eps: complex,
                      propagator_level: int) -> np.ndarray:
    return matrix.value(skeleton, x, eps, propagator_level)


def M_level(matrix: SelfEnergyMatrix, k: int, x: complex, eps: complex, window: Optional[int] = None) -> np.ndarray:
    return matrix.M(k, x, eps, window)


def dressed_propagator(matrix: SelfEnergyMatrix, k: int, x: complex, eps: complex,
                       window: Optional[int] = None) -> np.ndarray:
    return matrix.G(k, x, eps, window)


def M_limit(matrix: SelfEnergyMatrix, x: complex, eps: complex, tol: float = 1e-12, k_max: int = 12) -> MLimitResult:
    return matrix.limit(x, eps, tol, k_max)


def fixed_point_defect(matrix: SelfEnergyMatrix, x: complex, eps: complex, tol: float = 1e-12,
                       k_max: int = 12) -> float:
    """|| G(x) (M^[inf] + (G^[inf])^-1) - 1 || with G the bare propagator"""
    result = matrix.limit(x, eps, tol, k_max)
    dressed = matrix.G(result.iterations, x, eps)
    bare = np.eye(matrix.model.d, dtype=complex) / x ** 2
    identity = bare @ (result.matrix + np.linalg.inv(dressed))
    return float(np.linalg.norm(identity - np.eye(matrix.model.d), np.inf))


def localize(value_fn: Callable[[float], np.ndarray], h: float = 1e-3) -> Tuple[np.ndarray, np.ndarray]:
    """(V(0), dV(0)) with the derivative from Richardson-extrapolated central differences"""
    v0 = np.asarray(value_fn(0.0))

    def central(step: float) -> np.ndarray:
        return (np.asarray(value_fn(step)) - np.asarray(value_fn(-step))) / (2 * step)

    return v0, (4 * central(h / 2) - central(h)) / 3


def _blocks(model: Model, matrix: np.ndarray) -> Dict[str, np.ndarray]:
    r = model.r
    return {'aa': matrix[:r, :r], 'ab': matrix[:r, r:], 'ba': matrix[r:, :r], 'bb': matrix[r:, r:]}


def _norm(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


@dataclass
class FamilyCheck:
    source: str
    key: Tuple
    size: int
    scale: float
    constant_aa: float
    derivative_aa: float
    constant_ab: float
    constant_ba: float
    antisymmetry_ab: float
    derivative_bb: float

    def ok(self, constant_tol: float = 1e-12, derivative_tol: float = 1e-8) -> bool:
        scale = max(self.scale, 1e-300)
        return (self.constant_aa <= constant_tol * scale
                and max(self.constant_ab, self.constant_ba) <= constant_tol * scale
                and self.derivative_aa <= derivative_tol * scale
                and self.antisymmetry_ab <= derivative_tol * scale
                and self.derivative_bb <= derivative_tol * scale)


@dataclass
class LocalizedReport:
    order: int
    families: List[FamilyCheck]

    def ok(self, constant_tol: float = 1e-12, derivative_tol: float = 1e-8) -> bool:
        return all(f.ok(constant_tol, derivative_tol) for f in self.families)


def _family_check(matrix: SelfEnergyMatrix, source: str, key: Tuple, members: Sequence[Node],
                  h: float) -> FamilyCheck:
    model = matrix.model
    skeletons = [SelfEnergySkeleton(id=i, root=root, V=root.order, mass=0, max_window=math.inf,
                                    lines=(), reduced_scales=()) for i, root in enumerate(members)]

    def total(x: float) -> np.ndarray:
        return sum(matrix.value(s, x, 1.0, 0) for s in skeletons)

    scale = 0.0
    for s in skeletons:
        v0, dv = localize(lambda x, s=s: matrix.value(s, x, 1.0, 0), h)
        scale = max(scale, _norm(v0), _norm(dv))
    v0, dv = localize(total, h)
    constant = _blocks(model, v0)
    slope = _blocks(model, dv)
    return FamilyCheck(
        source=source, key=key, size=len(members), scale=scale,
        constant_aa=_norm(constant['aa']), derivative_aa=_norm(slope['aa']),
        constant_ab=_norm(constant['ab']), constant_ba=_norm(constant['ba']),
        antisymmetry_ab=_norm(slope['ab'] + slope['ba'].T), derivative_bb=_norm(slope['bb']),
    )


def verify_localized_cancellations(matrix: SelfEnergyMatrix, order: int, h: float = 1e-3) -> LocalizedReport:
    """
    Family sums of localized self-energy values

    Families come from two sources: graphs detected in the enumerated trees of
    order <= `order` (shifted over their T0 nodes) and the catalog grouped by
    unrooted structure.
    """
    model = matrix.model
    freq = model.frequency
    enumerator = TreeEnumerator(model, leaves=False)
    tree_families: Dict[Tuple, Dict[Tuple, Node]] = {}
    for k in range(1, order + 1):
        for nu in mode_ball(model.r, k * model.nf, include_zero=True):
            for gamma in ('alpha', 'beta'):
                for tree in enumerator.trees(k, nu, gamma):
                    scaled = assign_scales(tree, matrix.sequence, freq)
                    for graph in scaled.self_energy_graphs:
                        members = shift_family(scaled, graph, matrix.sequence, freq)
                        key = family_key(LabeledTree(strip_entry(members[0].skeleton)), FULL)
                        bucket = tree_families.setdefault(key, {})
                        for member in members:
                            bucket.setdefault(member.skeleton.key, member.skeleton)

    checks = []
    for key in sorted(tree_families):
        members = [tree_families[key][k] for k in sorted(tree_families[key])]
        checks.append(_family_check(matrix, 'tree', key, members, h))
    for key, skeletons in sorted(catalog_families(matrix.catalog).items()):
        checks.append(_family_check(matrix, 'catalog', key, [s.root for s in skeletons], h))
    logger.info(f"Localized cancellations: {len(tree_families)} tree families, "
                f"{len(checks) - len(tree_families)} catalog families")
    return LocalizedReport(order=order, families=checks)


def second_order_alpha_beta(model: Model, x: complex, eps: complex, window: int) -> np.ndarray:
    """
    Closed-form odd part of the two-node alpha-beta block

    -2 eps^2 x sum over nu1 + nu2 = 0 of (omega.nu2)^-3 i nu1 (|nu1|^2 f_nu1 df_nu2 + d2f_nu2 df_nu1)^T,
    restricted to |nu1| + |nu2| <= 2^(-(n+3)/tau).
    """
    pert = model.perturbation
    beta0 = model.equilibrium.beta0
    limit = 2.0 ** (-(window + 3) / model.frequency.tau)
    total = np.zeros((model.r, model.s), dtype=complex)
    for nu1 in pert.support:
        nu2 = tuple(-c for c in nu1)
        if not any(nu1) or nu2 not in pert.by_mode or 2 * l1(nu1) > limit:
            continue
        f1 = derivative_tensor(pert, nu1, 0, 0, beta0)
        df1 = derivative_tensor(pert, nu1, 0, 1, beta0)
        df2 = derivative_tensor(pert, nu2, 0, 1, beta0)
        d2f2 = derivative_tensor(pert, nu2, 0, 2, beta0)
        y = model.frequency.dot(nu2)
        row = float(np.dot(nu1, nu1)) * f1 * df2 + d2f2 @ df1
        total = total + np.outer(1j * np.array(nu1, dtype=float), row) / y ** 3
    return -2.0 * eps ** 2 * x * total


@dataclass
class BlockBoundReport:
    slopes: Dict[str, float]
    eps_slope: float
    vanishing: List[str]

    def ok(self, margin: float = 0.05) -> bool:
        required = {'aa': 2.0, 'ab': 1.0, 'ba': 1.0, 'bb': 2.0}
        if any(self.slopes[name] < need - margin for name, need in required.items()):
            return False
        return self.eps_slope >= 2.0 - margin


def verify_block_bounds(matrix: SelfEnergyMatrix, k: int, eps: float, window: int,
                        xs: Optional[Sequence[float]] = None, floor: float = 1e-13) -> BlockBoundReport:
    """
    Fit the vanishing orders of the blocks of M^[k] at x = 0 and the eps-order of M_bb(0) - eps H

    Blocks below `floor` (relative to ||M||) everywhere are reported as vanishing with slope inf.
    """
    model = matrix.model
    xs = list(np.geomspace(1e-3, 1e-2, 6)) if xs is None else list(xs)
    at_zero = matrix.M(k, 0.0, eps, window)
    scale = max(float(np.linalg.norm(at_zero, np.inf)), 1e-300)
    samples = {name: [] for name in ('aa', 'ab', 'ba', 'bb')}
    for x in xs:
        blocks = _blocks(model, matrix.M(k, x, eps, window))
        samples['aa'].append(_norm(blocks['aa']))
        samples['ab'].append(_norm(blocks['ab']))
        samples['ba'].append(_norm(blocks['ba']))
        samples['bb'].append(_norm(blocks['bb'] - _blocks(model, at_zero)['bb']))

    slopes: Dict[str, float] = {}
    vanishing: List[str] = []
    for name, values in samples.items():
        if max(values) <= floor * scale:
            slopes[name] = math.inf
            vanishing.append(name)
        else:
            slopes[name] = fit_slope(xs, values)

    hessian = model.equilibrium.hessian
    eps_values = list(np.geomspace(eps / 10, eps, 5))
    defects = []
    for e in eps_values:
        bb = _blocks(model, matrix.M(k, 0.0, e, window))['bb']
        defects.append(_norm(bb - e * hessian))
    if max(defects) <= floor * max(abs(eps), 1e-300):
        eps_slope = math.inf
        vanishing.append('eps')
    else:
        eps_slope = fit_slope(eps_values, defects)
    logger.info(f"Block slopes {slopes}, eps slope {eps_slope}")
    return BlockBoundReport(slopes=slopes, eps_slope=eps_slope, vanishing=vanishing)


def transposition_defect(matrix: SelfEnergyMatrix, k: int, x: complex, eps: complex,
                         window: Optional[int] = None) -> float:
    """|| M(x)^T - M(-x) || relative to || M(x) ||"""
    forward = matrix.M(k, x, eps, window)
    backward = matrix.M(k, -x, eps, window)
    scale = max(float(np.linalg.norm(forward, np.inf)), 1e-300)
    return float(np.linalg.norm(forward.T - backward, np.inf)) / scale


def hermiticity_defect(matrix: SelfEnergyMatrix, k: int, x: float, eps: float,
                       window: Optional[int] = None) -> float:
    """|| M(x)^dagger - M(x) || relative to || M(x) || for real x and eps"""
    value = matrix.M(k, x, eps, window)
    scale = max(float(np.linalg.norm(value, np.inf)), 1e-300)
    return float(np.linalg.norm(value.conj().T - value, np.inf)) / scale


def truncation_estimate(small: SelfEnergyMatrix, large: SelfEnergyMatrix, k: int, xs: Iterable[complex],
                        eps: complex, window: Optional[int] = None) -> float:
    """Largest || M with V_max+1 - M with V_max || over the samples"""
    worst = 0.0
    for x in xs:
        diff = large.M(k, x, eps, window) - small.M(k, x, eps, window)
        worst = max(worst, float(np.linalg.norm(diff, np.inf)))
    return worst
