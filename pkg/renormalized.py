"""
Fully renormalized expansion, its checks on the torus and the probe of the complex eps-domain
"""
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from errors import LindstedtError
from fourier_taylor import FourierTaylorSeries, ft_derivative_along_flow, ft_eval, psi_grid
from log_config import logger
from model import BETA, FULL, Model
from oracle import FormalSolution
from scales import has_self_energy_graph
from self_energy import SelfEnergyMatrix
from trees import TreeEnumerator, TreeEvaluator, leaf_factor
from utils import complex_key, fit_slope, l1, mode_ball, zero_mode


@dataclass
class DomainSpec:
    """Sectors of half-opening phi and radius (pi - phi) eps0 around the allowed real half-axis"""
    eps0: float
    phi_grid: Sequence[float]
    arc_samples: int = 9
    cusp_offsets: Sequence[float] = (0.02, 0.04, 0.08, 0.16, 0.3)

    def __post_init__(self):
        if self.eps0 <= 0:
            raise ValueError("eps0 must be positive")
        if any(not 0 < phi < math.pi for phi in self.phi_grid):
            raise ValueError("half-opening angles must lie in (0, pi)")
        if self.arc_samples < 2:
            raise ValueError("arc_samples must be at least 2")

    def radius(self, phi: float) -> float:
        return (math.pi - phi) * self.eps0


@dataclass
class RenormalizedSolution:
    h: FourierTaylorSeries
    K: int
    eps: complex
    leaf_source: Dict[int, np.ndarray]
    undetermined: Tuple[int, ...] = ()
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __repr__(self):
        return f"<RenormalizedSolution(K={self.K}, eps={self.eps!r}, coefficients={len(self.h.coeffs)})>"

    @property
    def a(self) -> FourierTaylorSeries:
        return self.h.component(slice(0, self.h.r))

    @property
    def b(self) -> FourierTaylorSeries:
        return self.h.component(slice(self.h.r, self.h.d))


Solution = Union[FormalSolution, RenormalizedSolution]


def renormalized_enumerator(matrix: SelfEnergyMatrix) -> TreeEnumerator:
    """Collapsed trees with leaves and without self-energy graphs"""
    freq = matrix.model.frequency
    sequence = matrix.sequence
    return TreeEnumerator(matrix.model, collapsed=True, leaves=True,
                          accept=lambda node: not has_self_energy_graph(node, sequence, freq))


def renormalized_expand(matrix: SelfEnergyMatrix, K: int, eps: complex, tol: float = 1e-12, k_max: int = 12,
                        enumerator: Optional[TreeEnumerator] = None) -> RenormalizedSolution:
    """
    Sum renormalized trees of order <= K with dressed propagators G^[inf](omega.nu; eps) on every line

    The coefficients depend on eps; evaluating the series at the same eps gives h(psi; eps).
    b^(K)_0 is not fixed at order K and is reported as undetermined.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    model = matrix.model
    enumerator = enumerator or renormalized_enumerator(matrix)
    propagators: Dict[bytes, np.ndarray] = {}

    def propagator(y: float) -> np.ndarray:
        key = complex_key(y)
        if key not in propagators:
            propagators[key] = matrix.G_limit(y, eps, tol, k_max)
        return propagators[key]

    leaf_source: Dict[int, np.ndarray] = {}
    for kappa in range(1, K):
        leaf_source[kappa] = leaf_factor(model, kappa, leaf_source, enumerator, propagator=propagator)

    h = FourierTaylorSeries.zeros(model.r, model.d, K, nf=model.nf)
    evaluator = TreeEvaluator(model, leaf_source, propagator=propagator)
    zero = zero_mode(model.r)
    for k in range(1, K + 1):
        count = 0
        for nu in mode_ball(model.r, k * model.nf):
            total = np.zeros(model.d, dtype=complex)
            for tree in enumerator.trees(k, nu, FULL):
                total = total + evaluator.value(tree).weighted
                count += 1
            if np.any(total != 0):
                h.set(k, nu, total)
        b0 = leaf_source.get(k, np.zeros(model.s))
        h.set(k, zero, model.embed(np.asarray(b0, dtype=complex), BETA))
        logger.info(f"Renormalized order {k}: {count} trees at eps={eps!r}")
    return RenormalizedSolution(h=h, K=K, eps=eps, leaf_source=leaf_source, undetermined=(K,),
                                provenance={'vmax': matrix.catalog.vmax, 'scale_floor': matrix.catalog.scale_floor,
                                            'n_min': matrix.sequence.n_min, 'm_tolerance': tol,
                                            'm_max_iterations': k_max})


def reexpand_in_eps(builder: Callable[[complex], FourierTaylorSeries], K: int, radius: float = 1e-2,
                    samples: int = 16) -> FourierTaylorSeries:
    """
    Taylor coefficients in eps of sum_k eps^k h^(k)(eps), by a Cauchy average on |eps| = radius

    Args:
        builder: eps -> series whose order-k coefficients may themselves depend on eps
        K: Highest order returned
        radius: Contour radius
        samples: Contour points, more than K
    """
    if samples <= K:
        raise ValueError("samples must exceed K")
    points = radius * np.exp(2j * np.pi * np.arange(samples) / samples)
    values: Dict[Tuple, np.ndarray] = {}
    template: Optional[FourierTaylorSeries] = None
    for j, eps in enumerate(points):
        series = builder(complex(eps))
        template = template or series
        for (k, nu), coeff in series.items():
            row = values.setdefault(nu, np.zeros((samples, series.d), dtype=complex))
            row[j] += (eps ** k) * np.asarray(coeff, dtype=complex)
    out = FourierTaylorSeries.zeros(template.r, template.d, K, nf=template.nf)
    for nu, row in values.items():
        spectrum = np.fft.fft(row, axis=0) / samples
        for m in range(1, K + 1):
            # modes beyond the order-m support are contour noise
            if out.nf == 0 or l1(nu) <= out.support_bound(m):
                out.set(m, nu, spectrum[m] / radius ** m)
    return out


def residual_on_torus(model: Model, sol: Solution, eps: Optional[complex] = None, m: int = 6) -> float:
    """max over a uniform psi-grid of |(omega.d)^2 h + eps df(psi + a, beta0 + b)|"""
    if isinstance(sol, RenormalizedSolution):
        if eps is not None and eps != sol.eps:
            raise ValueError(f"solution was built at eps={sol.eps!r}, not {eps!r}")
        eps = sol.eps
    if eps is None:
        raise ValueError("eps is required for a formal solution")
    if eps == 0:
        return 0.0
    grid = psi_grid(model.r, m)
    flow = ft_derivative_along_flow(ft_derivative_along_flow(sol.h, model.frequency), model.frequency)
    values = ft_eval(sol.h, grid, eps)
    second = ft_eval(flow, grid, eps)
    alpha = grid + values[:, :model.r]
    beta = np.asarray(model.equilibrium.beta0, dtype=float) + values[:, model.r:]
    d_alpha, d_beta = model.gradient_at(alpha, beta)
    residual = second + eps * np.concatenate([d_alpha, d_beta], axis=1)
    return float(np.max(np.abs(residual)))


def torus_embedding(model: Model, sol: Solution, psi: np.ndarray,
                    eps: complex) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(alpha, beta, A, B) at psi; real arrays for real eps"""
    psi = np.asarray(psi, dtype=float)
    values = ft_eval(sol.h, psi, eps)
    rates = ft_eval(ft_derivative_along_flow(sol.h, model.frequency), psi, eps)
    r = model.r
    alpha = psi + values[..., :r]
    beta = np.asarray(model.equilibrium.beta0, dtype=float) + values[..., r:]
    A, B = rates[..., :r], rates[..., r:]
    if np.imag(eps) == 0:
        imaginary = max(float(np.max(np.abs(np.imag(part)))) for part in (alpha, beta, A, B))
        logger.debug(f"Largest imaginary part of the embedding at real eps: {imaginary:.3e}")
        return np.real(alpha), np.real(beta), np.real(A), np.real(B)
    return alpha, beta, A, B


@dataclass
class ProbeSample:
    phi: float
    eps: complex
    passed: bool
    norm_margin: float
    kind: str = 'arc'
    error: Optional[str] = None


@dataclass
class DomainReport:
    samples: List[ProbeSample]
    cusp_points: List[complex]
    cusp_slope: float

    @property
    def arc_ok(self) -> bool:
        return all(s.passed for s in self.samples if s.kind == 'arc')

    @property
    def negative_axis_failures(self) -> int:
        return sum(1 for s in self.samples if s.kind == 'negative-axis' and not s.passed)

    @property
    def boundary(self) -> List[complex]:
        """Polygon through the arc samples and the measured cusp points"""
        points = [s.eps for s in self.samples if s.kind == 'arc'] + list(self.cusp_points)
        return sorted(points, key=lambda z: math.atan2(z.imag, z.real))

    def csv_rows(self, digits: int = 17) -> List[str]:
        rows = ["phi,re_eps,im_eps,pass,norm_margin"]
        for s in self.samples:
            rows.append(f"{s.phi:.{digits}g},{s.eps.real:.{digits}g},{s.eps.imag:.{digits}g},"
                        f"{int(s.passed)},{s.norm_margin:.{digits}g}")
        return rows


def resonant_samples(model: Model, eps: complex) -> List[float]:
    """x with x^2 = |eps lambda| for each hessian eigenvalue lambda"""
    eigenvalues = np.linalg.eigvalsh(model.equilibrium.hessian)
    return [math.sqrt(abs(eps) * abs(float(lam))) for lam in eigenvalues if lam != 0]


def norm_margin(matrix: SelfEnergyMatrix, eps: complex, phi: float, xs: Sequence[float],
                tol: float = 1e-12, k_max: int = 12) -> Tuple[float, Optional[str]]:
    """
    Smallest 1 - ||G^[inf](x; eps)|| min(1, pi - phi) x^2 / 2 over the samples

    A failed fixed point or inversion gives -inf with the error message.
    """
    width = min(1.0, math.pi - phi)
    worst = math.inf
    for x in xs:
        try:
            G = matrix.G_limit(x, eps, tol, k_max)
        except LindstedtError as e:
            return -math.inf, str(e)
        norm = float(np.linalg.norm(G, np.inf))
        worst = min(worst, 1.0 - norm * width * x ** 2 / 2.0)
    return worst, None


def _cusp_point(matrix: SelfEnergyMatrix, spec: DomainSpec, offset: float, xs: Sequence[float],
                sign: int, steps: int = 40) -> Optional[complex]:
    """Boundary point at radius offset eps0 between angle pi - offset (inside) and pi (outside)"""
    phi = math.pi - offset
    rho = spec.radius(phi)

    def passes(theta: float) -> bool:
        eps = sign * rho * complex(math.cos(theta), math.sin(theta))
        margin, _ = norm_margin(matrix, eps, phi, list(xs) + resonant_samples(matrix.model, eps))
        return margin > 0

    low, high = phi, math.pi
    if not passes(low) or passes(high):
        return None
    for _ in range(steps):
        mid = 0.5 * (low + high)
        if passes(mid):
            low = mid
        else:
            high = mid
    return sign * rho * complex(math.cos(low), math.sin(low))


def probe_domain(matrix: SelfEnergyMatrix, spec: DomainSpec, x_samples: Sequence[float]) -> DomainReport:
    """
    Check the propagator-norm bound on the sector arcs and measure the cusp on the excluded half-axis

    For the negative-eps branch every sample is mirrored through eps -> -eps.
    """
    sign = matrix.model.equilibrium.sign
    samples: List[ProbeSample] = []
    for phi in spec.phi_grid:
        radius = spec.radius(phi)
        for theta in np.linspace(-phi, phi, spec.arc_samples):
            eps = sign * radius * complex(math.cos(theta), math.sin(theta))
            xs = list(x_samples) + resonant_samples(matrix.model, eps)
            margin, error = norm_margin(matrix, eps, phi, xs)
            samples.append(ProbeSample(phi=phi, eps=eps, passed=margin > 0, norm_margin=margin, error=error))
        eps = complex(-sign * radius, 0.0)
        xs = list(x_samples) + resonant_samples(matrix.model, eps)
        margin, error = norm_margin(matrix, eps, phi, xs)
        samples.append(ProbeSample(phi=phi, eps=eps, passed=margin > 0, norm_margin=margin,
                                   kind='negative-axis', error=error))
        logger.info(f"phi={phi:.4f}: radius {radius:.4e}, "
                    f"{sum(s.passed for s in samples if s.phi == phi and s.kind == 'arc')} arc samples pass")

    cusp_points = []
    for offset in spec.cusp_offsets:
        point = _cusp_point(matrix, spec, offset, x_samples, sign)
        if point is not None:
            cusp_points.append(point)
    if len(cusp_points) >= 2:
        cusp_slope = fit_slope([abs(z.real) for z in cusp_points], [abs(z.imag) for z in cusp_points])
    else:
        cusp_slope = math.nan
    logger.info(f"Cusp fit over {len(cusp_points)} points: slope {cusp_slope:.4f}")
    return DomainReport(samples=samples, cusp_points=cusp_points, cusp_slope=cusp_slope)


if __name__ == "__main__":
    from model import load_model, reference_document
    from scales import build_scale_sequence
    from self_energy import build_catalog

    ref1 = load_model(reference_document())
    seq = build_scale_sequence(ref1.frequency, -6)
    matrix = SelfEnergyMatrix(ref1, build_catalog(ref1, 2, -6, seq), seq)
    solution = renormalized_expand(matrix, 2, 0.01)
    print(solution)
    print(f"residual: {residual_on_torus(ref1, solution):.3e}")
