"""
Problem instance: rotation vector, trigonometric perturbation and hyperbolic equilibrium
"""
import json
import math
import os
from dataclasses import dataclass, field
from functools import reduce
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from errors import Degenerate, Indefinite, ModelValidationError, NotCritical, ParseError
from log_config import logger
from utils import Mode, l1, mode_ball_array, neg_mode

BRANCH_POSITIVE = 'hyperbolic-positive-eps'
BRANCH_NEGATIVE = 'hyperbolic-negative-eps'

ALPHA = 'alpha'
BETA = 'beta'
FULL = 'full'


@dataclass(frozen=True)
class Frequency:
    omega: Tuple[float, ...]
    C0: float
    tau: float
    omega_text: Tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.omega) < 1:
            raise ModelValidationError("omega must have at least one component")
        if self.C0 <= 0:
            raise ModelValidationError(f"C0 must be positive, got {self.C0}")
        if self.tau < len(self.omega) - 1:
            raise ModelValidationError(f"tau={self.tau} is below r-1={len(self.omega) - 1}")

    @property
    def r(self) -> int:
        return len(self.omega)

    @property
    def omega0(self) -> Tuple[float, ...]:
        """omega rescaled by 2^tau / C0, the normalization of the scale labels"""
        factor = 2.0 ** self.tau / self.C0
        return tuple(factor * w for w in self.omega)

    @property
    def normalization(self) -> float:
        return 2.0 ** self.tau / self.C0

    def omega_array(self, dtype=np.float64) -> np.ndarray:
        if self.omega_text and np.dtype(dtype) == np.dtype(np.longdouble):
            return np.array([np.longdouble(t) for t in self.omega_text], dtype=np.longdouble)
        return np.array(self.omega, dtype=dtype)

    def dot(self, nu: Sequence[int]) -> float:
        """omega . nu in double precision"""
        return float(sum(w * n for w, n in zip(self.omega, nu)))


@dataclass(frozen=True, eq=False)
class Perturbation:
    """f(alpha, beta) = sum of c_{nu,mu} exp(i(nu.alpha + mu.beta)) over a finite support"""
    r: int
    s: int
    terms: Tuple[Tuple[Mode, Mode, complex], ...]
    by_mode: Dict[Mode, Tuple[Tuple[Mode, complex], ...]] = field(init=False, repr=False)
    nf: int = field(init=False)

    def __post_init__(self):
        grouped: Dict[Mode, List[Tuple[Mode, complex]]] = {}
        for nu, mu, c in self.terms:
            if len(nu) != self.r or len(mu) != self.s:
                raise ModelValidationError(f"term ({nu}, {mu}) does not match r={self.r}, s={self.s}")
            grouped.setdefault(nu, []).append((mu, complex(c)))
        object.__setattr__(self, 'by_mode', {nu: tuple(sorted(v)) for nu, v in sorted(grouped.items())})
        object.__setattr__(self, 'nf', max((l1(nu) for nu in grouped), default=0))

    @property
    def support(self) -> Tuple[Mode, ...]:
        return tuple(self.by_mode.keys())

    def coefficient(self, nu: Mode, mu: Mode) -> complex:
        for m, c in self.by_mode.get(nu, ()):
            if m == mu:
                return c
        return 0j

    def reality_defects(self, tol: float = 0.0) -> List[Tuple[Mode, Mode]]:
        """Pairs whose conjugate partner is missing or wrong"""
        defects = []
        for nu, mu, c in self.terms:
            partner = self.coefficient(neg_mode(nu), neg_mode(mu))
            if abs(partner - np.conj(c)) > tol * max(1.0, abs(c)):
                defects.append((nu, mu))
        return defects


@dataclass(frozen=True, eq=False)
class Equilibrium:
    beta0: Tuple[float, ...]
    hessian: np.ndarray
    gradient_norm: float
    branch: str

    @property
    def sign(self) -> int:
        """+1 when the torus exists for small positive eps, -1 for negative eps"""
        return 1 if self.branch == BRANCH_POSITIVE else -1


class Model:
    def __init__(self, frequency: Frequency, perturbation: Perturbation,
                 equilibrium: Equilibrium, name: str = "model"):
        if frequency.r != perturbation.r:
            raise ModelValidationError(
                f"omega has {frequency.r} components but the perturbation uses r={perturbation.r}"
            )
        self.frequency = frequency
        self.perturbation = perturbation
        self.equilibrium = equilibrium
        self.name = name
        self._vertex_cache: Dict[Tuple[Mode, str], Tuple[np.ndarray, np.ndarray]] = {}
        self._vanishing_cache: Dict[Tuple, bool] = {}
        self._hessian_inverse = np.linalg.inv(equilibrium.hessian)

    def __repr__(self):
        return f"<Model(name='{self.name}', r={self.r}, s={self.s}, branch='{self.equilibrium.branch}')>"

    @property
    def r(self) -> int:
        return self.perturbation.r

    @property
    def s(self) -> int:
        return self.perturbation.s

    @property
    def d(self) -> int:
        return self.r + self.s

    @property
    def nf(self) -> int:
        return self.perturbation.nf

    @property
    def hessian_inverse(self) -> np.ndarray:
        return self._hessian_inverse

    def gamma_slice(self, gamma: str) -> slice:
        if gamma == ALPHA:
            return slice(0, self.r)
        if gamma == BETA:
            return slice(self.r, self.d)
        return slice(0, self.d)

    def embed(self, vec: np.ndarray, gamma: str) -> np.ndarray:
        """Place an alpha or beta vector into its slot of a d-vector"""
        if gamma == FULL:
            return vec
        out = np.zeros(self.d, dtype=vec.dtype)
        out[self.gamma_slice(gamma)] = vec
        return out

    def vertex_table(self, nu: Mode, dtype=np.complex128) -> Tuple[np.ndarray, np.ndarray]:
        """
        Rows kappa_mu = (i nu, i mu) and weights c_{nu,mu} exp(i mu.beta0) of a node with mode nu

        Returns:
            (K, w) with K of shape (n_mu, d) and w of shape (n_mu,)
        """
        key = (tuple(nu), np.dtype(dtype).name)
        cached = self._vertex_cache.get(key)
        if cached is not None:
            return cached
        real = np.longdouble if np.dtype(dtype) == np.dtype(np.clongdouble) else np.float64
        beta0 = np.array(self.equilibrium.beta0, dtype=real)
        entries = self.perturbation.by_mode.get(tuple(nu), ())
        K = np.zeros((len(entries), self.d), dtype=dtype)
        w = np.zeros(len(entries), dtype=dtype)
        for row, (mu, c) in enumerate(entries):
            K[row, :self.r] = 1j * np.array(nu, dtype=real)
            K[row, self.r:] = 1j * np.array(mu, dtype=real)
            phase = np.dot(np.array(mu, dtype=real), beta0)
            w[row] = np.asarray(c, dtype=dtype) * (np.cos(phase) + 1j * np.sin(phase))
        self._vertex_cache[key] = (K, w)
        return K, w

    def node_factor(self, nu: Mode, inputs: Sequence[np.ndarray], out_gamma: str = FULL,
                    linear: Optional[np.ndarray] = None, dtype=np.complex128) -> np.ndarray:
        """
        Contract the node tensor of mode nu with its entering line vectors

        Every input is a d-vector; labelled lines pass vectors embedded in their slot.
        With `linear` (a d x m matrix) one extra entering leg is left open and the
        result is a d x m matrix sliced on the exiting side.
        """
        K, w = self.vertex_table(nu, dtype)
        if len(w) == 0:
            shape = (self.d,) if linear is None else (self.d, linear.shape[1])
            return np.zeros(shape, dtype=dtype)[self.gamma_slice(out_gamma)]
        coeff = w.copy()
        for u in inputs:
            coeff = coeff * (K @ u)
        if linear is None:
            out = K.T @ coeff
        else:
            out = K.T @ (coeff[:, None] * (K @ linear))
        return out[self.gamma_slice(out_gamma)]

    def is_vanishing(self, nu: Mode, n_alpha: int, n_beta: int, n_full: int = 0) -> bool:
        """True when the node tensor with these leg counts is identically zero"""
        key = (tuple(nu), n_alpha, n_beta, n_full)
        cached = self._vanishing_cache.get(key)
        if cached is not None:
            return cached
        norm, scale = self.leg_tensor_norm(nu, n_alpha, n_beta, n_full)
        result = norm <= 1e-13 * scale
        self._vanishing_cache[key] = result
        return result

    def leg_tensor_norm(self, nu: Mode, n_alpha: int, n_beta: int, n_full: int = 0) -> Tuple[float, float]:
        """Max-norm of sum_mu w (i nu)^na (i mu)^nb kappa^nf, and the matching sum of term norms"""
        K, w = self.vertex_table(nu)
        if len(w) == 0:
            return 0.0, 1.0
        total = None
        scale = 0.0
        for row in range(len(w)):
            kappa = K[row]
            factors = [kappa[:self.r]] * n_alpha + [kappa[self.r:]] * n_beta + [kappa] * n_full
            term = w[row] * reduce(np.multiply.outer, factors) if factors else np.asarray(w[row])
            total = term if total is None else total + term
            scale += float(np.max(np.abs(term))) if np.size(term) else 0.0
        return float(np.max(np.abs(total))), max(scale, 1e-300)

    def gradient_at(self, alpha: np.ndarray, beta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Evaluate (d_alpha f, d_beta f) at arrays of points

        Args:
            alpha: (..., r) possibly complex angles
            beta: (..., s) possibly complex angles
        """
        nus = np.array([t[0] for t in self.perturbation.terms], dtype=float)
        mus = np.array([t[1] for t in self.perturbation.terms], dtype=float)
        cs = np.array([t[2] for t in self.perturbation.terms], dtype=complex)
        phase = alpha @ nus.T + beta @ mus.T
        e = cs * np.exp(1j * phase)
        return e @ (1j * nus), e @ (1j * mus)


def derivative_tensor(pert: Perturbation, nu: Mode, p: int, q: int,
                      beta0: Sequence[float], dtype=np.complex128) -> np.ndarray:
    """
    (i nu)^{(x)p} (x) d^q_beta f_nu(beta0), exact from the finite mu-sum

    Returns:
        Complex tensor of shape (r,)*p + (s,)*q
    """
    shape = (pert.r,) * p + (pert.s,) * q
    out = np.zeros(shape, dtype=dtype)
    real = np.longdouble if np.dtype(dtype) == np.dtype(np.clongdouble) else np.float64
    inu = 1j * np.array(nu, dtype=real)
    beta = np.array(beta0, dtype=real)
    for mu, c in pert.by_mode.get(tuple(nu), ()):
        imu = 1j * np.array(mu, dtype=real)
        phase = np.dot(np.array(mu, dtype=real), beta)
        weight = np.asarray(c, dtype=dtype) * (np.cos(phase) + 1j * np.sin(phase))
        factors = [inu] * p + [imu] * q
        out = out + (weight * reduce(np.multiply.outer, factors) if factors else weight)
    return out


def diophantine_margin(freq: Frequency, Nmax: int) -> float:
    """min over 0 < |nu|_1 <= Nmax of |omega.nu| |nu|^tau / C0; values above 1 certify the condition"""
    if Nmax < 1:
        raise ValueError("Nmax must be at least 1")
    modes = mode_ball_array(freq.r, Nmax)
    values = np.abs(modes @ np.array(freq.omega)) * np.abs(modes).sum(axis=1) ** freq.tau
    return float(values.min() / freq.C0)


def estimate_c0(freq: Frequency, Nmax: int) -> float:
    """Largest Diophantine constant valid on the checked ball"""
    return diophantine_margin(freq, Nmax) * freq.C0


def _classify(pert: Perturbation, beta0: Sequence[float], tol: float) -> Equilibrium:
    zero = (0,) * pert.r
    gradient = derivative_tensor(pert, zero, 0, 1, beta0)
    hessian = derivative_tensor(pert, zero, 0, 2, beta0)
    entries = pert.by_mode.get(zero, ())
    grad_scale = max((abs(c) * l1(mu) for mu, c in entries), default=0.0) or 1.0
    hess_scale = max((abs(c) * l1(mu) ** 2 for mu, c in entries), default=0.0) or 1.0

    gradient_norm = float(np.linalg.norm(gradient))
    if gradient_norm > tol * grad_scale:
        raise NotCritical(gradient_norm, tol * grad_scale)

    hessian = np.real(hessian)
    hessian = 0.5 * (hessian + hessian.T)
    eigenvalues = np.linalg.eigvalsh(hessian)
    if np.any(np.abs(eigenvalues) <= tol * hess_scale):
        raise Degenerate(f"hessian eigenvalues {eigenvalues} contain a zero within {tol * hess_scale:.3e}")
    if np.all(eigenvalues < 0):
        branch = BRANCH_POSITIVE
    elif np.all(eigenvalues > 0):
        branch = BRANCH_NEGATIVE
    else:
        raise Indefinite(f"hessian eigenvalues {eigenvalues} have mixed signs")
    return Equilibrium(beta0=tuple(float(b) for b in beta0), hessian=hessian,
                       gradient_norm=gradient_norm, branch=branch)


def check_equilibrium(model: Model, tol: float, beta0: Optional[Sequence[float]] = None) -> Equilibrium:
    """
    Classify the equilibrium of the averaged perturbation

    Args:
        model: Model whose perturbation is examined
        tol: Zero tolerance, relative to the size of the averaged coefficients
        beta0: Point to examine (defaults to the model's own beta0)
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    point = model.equilibrium.beta0 if beta0 is None else tuple(beta0)
    return _classify(model.perturbation, point, tol)


def _read_document(config: Union[str, Dict[str, Any]]) -> Dict[str, Any]:
    if isinstance(config, dict):
        return config
    if not isinstance(config, str):
        raise ParseError(f"model document must be a path, JSON text or dict, not {type(config).__name__}")
    try:
        if os.path.exists(config):
            with open(config, 'r') as f:
                return json.load(f)
        return json.loads(config)
    except (OSError, json.JSONDecodeError) as e:
        raise ParseError(f"cannot read model document: {e}") from e


def _parse_mode(value: Any, length: int, label: str) -> Mode:
    if not isinstance(value, (list, tuple)) or len(value) != length:
        raise ParseError(f"{label} must be a list of {length} integers, got {value!r}")
    try:
        return tuple(int(v) for v in value)
    except (TypeError, ValueError) as e:
        raise ParseError(f"{label} entries must be integers: {value!r}") from e


def _parse_real(value: Any, label: str) -> float:
    try:
        return float(str(value))
    except (TypeError, ValueError) as e:
        raise ParseError(f"{label} must be a decimal number, got {value!r}") from e


def load_model(config: Union[str, Dict[str, Any]], zero_tolerance: float = 1e-12,
               diophantine_nmax: int = 200, certify: bool = True) -> Model:
    """
    Load and validate a model document

    The document holds r, s, omega (decimal strings), tau, C0, beta0 and a list of
    terms {nu, mu, re, im}; with symmetrize: true the conjugate partners are added.

    Args:
        config: Path to a JSON file, JSON text, or an already parsed dict
        zero_tolerance: Relative tolerance of the equilibrium tests
        diophantine_nmax: Radius of the ball on which the Diophantine condition is certified
        certify: Reject the model when the certificate fails
    """
    doc = _read_document(config)
    missing = [key for key in ('r', 's', 'omega', 'tau', 'C0', 'beta0', 'terms') if key not in doc]
    if missing:
        raise ParseError(f"missing fields: {', '.join(missing)}")

    try:
        r, s = int(doc['r']), int(doc['s'])
    except (TypeError, ValueError) as e:
        raise ParseError("r and s must be integers") from e
    if r < 1 or s < 1:
        raise ModelValidationError("r and s must be at least 1")

    omega_text = tuple(str(w) for w in doc['omega'])
    if len(omega_text) != r:
        raise ParseError(f"omega must have {r} components")
    omega = tuple(_parse_real(w, 'omega') for w in omega_text)
    beta0 = tuple(_parse_real(b, 'beta0') for b in doc['beta0'])
    if len(beta0) != s:
        raise ParseError(f"beta0 must have {s} components")

    frequency = Frequency(omega=omega, C0=_parse_real(doc['C0'], 'C0'),
                          tau=_parse_real(doc['tau'], 'tau'), omega_text=omega_text)

    coefficients: Dict[Tuple[Mode, Mode], complex] = {}
    for index, term in enumerate(doc['terms']):
        if not isinstance(term, dict) or 'nu' not in term or 'mu' not in term:
            raise ParseError(f"term {index} needs nu and mu")
        nu = _parse_mode(term['nu'], r, f"terms[{index}].nu")
        mu = _parse_mode(term['mu'], s, f"terms[{index}].mu")
        c = complex(_parse_real(term.get('re', 0), 're'), _parse_real(term.get('im', 0), 'im'))
        coefficients[(nu, mu)] = coefficients.get((nu, mu), 0j) + c

    if doc.get('symmetrize', False):
        for (nu, mu), c in list(coefficients.items()):
            partner = (neg_mode(nu), neg_mode(mu))
            if partner not in coefficients:
                coefficients[partner] = complex(np.conj(c))

    terms = tuple((nu, mu, c) for (nu, mu), c in sorted(coefficients.items()) if c != 0)
    perturbation = Perturbation(r=r, s=s, terms=terms)
    defects = perturbation.reality_defects(tol=1e-15)
    if defects:
        raise ModelValidationError(f"reality constraint broken for {defects[:3]}")

    equilibrium = _classify(perturbation, beta0, zero_tolerance)
    model = Model(frequency, perturbation, equilibrium, name=str(doc.get('name', 'model')))

    margin = diophantine_margin(frequency, diophantine_nmax)
    if certify and margin <= 1.0:
        raise ModelValidationError(
            f"Diophantine certificate fails on |nu| <= {diophantine_nmax}: margin {margin:.6f}"
        )
    logger.info(f"Loaded {model!r} with Diophantine margin {margin:.6f} on |nu| <= {diophantine_nmax}")
    return model


def reference_document(beta0: float = 0.0) -> Dict[str, Any]:
    """The two-frequency reference model f = cos b + cos a1 + cos(a1 + a2 + b)"""
    return {
        'name': 'ref1',
        'r': 2,
        's': 1,
        'omega': ['1', '0.61803398874989484820458683436563811772'],
        'tau': 1,
        'C0': '0.38',
        'beta0': [beta0],
        'symmetrize': True,
        'terms': [
            {'nu': [0, 0], 'mu': [1], 're': 0.5, 'im': 0},
            {'nu': [1, 0], 'mu': [0], 're': 0.5, 'im': 0},
            {'nu': [1, 1], 'mu': [1], 're': 0.5, 'im': 0},
        ],
    }


if __name__ == "__main__":
    ref1 = load_model(reference_document())
    print(ref1)
    print(f"Hessian: {ref1.equilibrium.hessian}")
    print(f"C0 estimate on |nu| <= 200: {estimate_c0(ref1.frequency, 200):.6f}")
