"""
Polynomial symbol calculus of the model operators.

Polynomials in (z, conj(z)) are stored as dictionaries ``{(a, b): coefficient}`` for the monomial
z^a conj(z)^b. The Bargmann product is

    <f, g> = (2 pi)^{-n} int exp(-|z|^2) f conj(g) dmu_E,   dmu_E = 2^n dx dy,

in which the monomials conj(z)^alpha / sqrt(alpha!) are orthonormal.
"""

from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from math import factorial
from typing import Dict, List, Optional, Tuple, Union
import logging

import numpy as np

from landaulab.errors import ErrorCodes
from landaulab.geometry import PointFrame
from landaulab.model_spectrum import OscillatorBasis, box_operator, cap_for

symbols_logger = logging.getLogger("landaulab.symbols")

FACTORIAL_CAP: int = 20
DROP_TOLERANCE: float = 1e-14

MultiIndex = Tuple[int, ...]
Monomial = Tuple[MultiIndex, MultiIndex]


def _multi_factorial(alpha: MultiIndex) -> float:
    return float(np.prod([factorial(a) for a in alpha]))


def _check_cap(cap: int) -> None:
    if cap > FACTORIAL_CAP:
        raise ErrorCodes()("CAP_EXCEEDED", f"degree cap {cap} above {FACTORIAL_CAP}")


class PolySpace:
    """
    Polynomials of holomorphic degree at most ``hol_cap`` and antiholomorphic degree at most
    ``anti_cap``, with monomials in graded order

    :param half_dim: Number of complex dimensions
    :type half_dim: int
    :param hol_cap: Cap on |a| for z^a
    :type hol_cap: int
    :param anti_cap: Cap on |b| for conj(z)^b
    :type anti_cap: int
    """

    def __init__(self, half_dim: int, hol_cap: int, anti_cap: int) -> None:
        _check_cap(hol_cap)
        _check_cap(anti_cap)
        self.half_dim: int = half_dim
        self.hol_cap: int = hol_cap
        self.anti_cap: int = anti_cap
        holomorphic = OscillatorBasis(half_dim, hol_cap).multi_indices
        antiholomorphic = OscillatorBasis(half_dim, anti_cap).multi_indices
        self.monomials: Tuple[Monomial, ...] = tuple(
            sorted(product(holomorphic, antiholomorphic), key=lambda m: (sum(m[0]) + sum(m[1]), m))
        )
        self._lookup: Dict[Monomial, int] = {m: i for i, m in enumerate(self.monomials)}

    def __len__(self) -> int:
        return len(self.monomials)

    def __contains__(self, monomial: Monomial) -> bool:
        return monomial in self._lookup

    def index(self, monomial: Monomial) -> int:
        return self._lookup[monomial]

    def antiholomorphic_basis(self) -> OscillatorBasis:
        return OscillatorBasis(self.half_dim, self.anti_cap)


def bargmann_gram(space: PolySpace) -> np.ndarray:
    """
    Gram matrix of the monomials of ``space`` in the Bargmann product

    <z^a conj(z)^b, z^a' conj(z)^b'> = prod_i delta(a_i + b'_i, b_i + a'_i) (a_i + b'_i)!

    :param space: Polynomial space
    :type space: PolySpace
    :return: Real symmetric Gram matrix
    :rtype: np.ndarray
    """
    gram = np.zeros((len(space), len(space)))
    for i, (a, b) in enumerate(space.monomials):
        for j, (a2, b2) in enumerate(space.monomials):
            if all(a[m] + b2[m] == b[m] + a2[m] for m in range(space.half_dim)):
                gram[i, j] = np.prod([factorial(a[m] + b2[m]) for m in range(space.half_dim)])
    return gram


class SymbolPolynomial:
    """
    Finitely supported polynomial in (z, conj(z)) with r x r matrix coefficients

    :param terms: Mapping from (a, b) to the coefficient of z^a conj(z)^b
    :type terms: Dict[Monomial, np.ndarray]
    :param half_dim: Number of complex dimensions
    :type half_dim: int
    :param rank: Size of the coefficient matrices, defaults to 1
    :type rank: int, optional
    """

    def __init__(self, terms: Dict[Monomial, Union[complex, np.ndarray]], half_dim: int, rank: int = 1) -> None:
        self.half_dim: int = half_dim
        self.rank: int = rank
        self.terms: Dict[Monomial, np.ndarray] = {}
        for (a, b), value in terms.items():
            coefficient = np.asarray(value, dtype=complex)
            if coefficient.ndim == 0:
                coefficient = coefficient * np.eye(rank, dtype=complex)
            if coefficient.shape != (rank, rank):
                raise ErrorCodes()("USAGE", f"coefficient of {(a, b)} has shape {coefficient.shape}")
            if np.max(np.abs(coefficient)) > DROP_TOLERANCE:
                self.terms[(tuple(a), tuple(b))] = coefficient

    def __add__(self, other: "SymbolPolynomial") -> "SymbolPolynomial":
        terms = {key: value.copy() for key, value in self.terms.items()}
        for key, value in other.terms.items():
            terms[key] = terms.get(key, 0) + value
        return SymbolPolynomial(terms, self.half_dim, self.rank)

    def __sub__(self, other: "SymbolPolynomial") -> "SymbolPolynomial":
        return self + other.scaled(-1.0)

    def scaled(self, factor: complex) -> "SymbolPolynomial":
        return SymbolPolynomial({key: factor * value for key, value in self.terms.items()}, self.half_dim, self.rank)

    def tensor(self, matrix: np.ndarray) -> "SymbolPolynomial":
        """Scalar polynomial times a fixed r x r matrix"""
        matrix = np.asarray(matrix, dtype=complex)
        return SymbolPolynomial(
            {key: value[0, 0] * matrix for key, value in self.terms.items()}, self.half_dim, matrix.shape[0]
        )

    @property
    def holomorphic_degree(self) -> int:
        return max((sum(a) for a, _ in self.terms), default=0)

    @property
    def antiholomorphic_degree(self) -> int:
        return max((sum(b) for _, b in self.terms), default=0)

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        """
        Values at complex points of shape (..., n), returned with shape (..., r, r)
        """
        z = np.asarray(z, dtype=complex)
        values = np.zeros(z.shape[:-1] + (self.rank, self.rank), dtype=complex)
        for (a, b), coefficient in self.terms.items():
            monomial = np.prod(z ** np.array(a) * z.conj() ** np.array(b), axis=-1)
            values = values + monomial[..., None, None] * coefficient
        return values


def ladder_matrices(space: PolySpace) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """
    Matrices of the annihilators d/d conj(z_i) and the creators conj(z_i) - d/dz_i on the
    monomial basis of ``space``; column m is the image of monomial m

    .. note:: Creators drop monomials whose antiholomorphic degree would leave the space, so
        the canonical commutation relations hold on the non-saturated degrees only.

    :param space: Polynomial space
    :type space: PolySpace
    :return: Annihilators and creators, one matrix per complex dimension
    :rtype: Tuple[List[np.ndarray], List[np.ndarray]]
    """
    size = len(space)
    annihilators, creators = [], []
    for i in range(space.half_dim):
        lower = np.zeros((size, size))
        upper = np.zeros((size, size))
        unit = tuple(1 if m == i else 0 for m in range(space.half_dim))
        for column, (a, b) in enumerate(space.monomials):
            if b[i] > 0:
                lower[space.index((a, _minus(b, unit))), column] = b[i]
            raised = (a, _plus(b, unit))
            if raised in space:
                upper[space.index(raised), column] += 1.0
            if a[i] > 0:
                upper[space.index((_minus(a, unit), b)), column] -= a[i]
        annihilators.append(lower)
        creators.append(upper)
    return annihilators, creators


def _plus(alpha: MultiIndex, beta: MultiIndex) -> MultiIndex:
    return tuple(x + y for x, y in zip(alpha, beta))


def _minus(alpha: MultiIndex, beta: MultiIndex) -> MultiIndex:
    return tuple(x - y for x, y in zip(alpha, beta))


def _apply_creator(poly: Dict[Monomial, complex], i: int) -> Dict[Monomial, complex]:
    unit = tuple(1 if m == i else 0 for m in range(len(next(iter(poly))[0])))
    out: Dict[Monomial, complex] = {}
    for (a, b), value in poly.items():
        key = (a, _plus(b, unit))
        out[key] = out.get(key, 0.0) + value
        if a[i] > 0:
            key = (_minus(a, unit), b)
            out[key] = out.get(key, 0.0) - a[i] * value
    return {key: value for key, value in out.items() if value != 0}


@lru_cache(maxsize=4096)
def _pab_terms(alpha: MultiIndex, beta: MultiIndex) -> Tuple[Tuple[Monomial, float], ...]:
    zero = tuple(0 for _ in alpha)
    poly: Dict[Monomial, complex] = {(tuple(beta), zero): (-1.0) ** sum(beta)}
    for i, power in enumerate(alpha):
        for _ in range(power):
            poly = _apply_creator(poly, i)
    norm = np.sqrt(_multi_factorial(alpha) * _multi_factorial(beta))
    return tuple(sorted((key, float(np.real(value)) / norm) for key, value in poly.items()))


def pab_polynomial(alpha: MultiIndex, beta: MultiIndex) -> SymbolPolynomial:
    """
    The polynomial (alpha! beta!)^{-1/2} (conj(z) - d/dz)^alpha (-z)^beta

    :param alpha: Antiholomorphic multi-index
    :type alpha: MultiIndex
    :param beta: Holomorphic multi-index
    :type beta: MultiIndex
    :raises CapExceeded: If a degree exceeds the factorial cap
    :return: Scalar polynomial
    :rtype: SymbolPolynomial
    """
    _check_cap(sum(alpha))
    _check_cap(sum(beta))
    return SymbolPolynomial(dict(_pab_terms(tuple(alpha), tuple(beta))), len(alpha))


def random_pab_symbol(half_dim: int, degree: int, rng: np.random.Generator) -> SymbolPolynomial:
    """Random complex combination of the p_{alpha beta} with |alpha| + |beta| <= degree"""
    indices = [m for m in product(range(degree + 1), repeat=half_dim) if sum(m) <= degree]
    symbol = SymbolPolynomial({}, half_dim)
    for alpha in indices:
        for beta in indices:
            if sum(alpha) + sum(beta) <= degree:
                symbol = symbol + pab_polynomial(alpha, beta).scaled(complex(rng.normal(), rng.normal()))
    return symbol


def pab_expansion(q: SymbolPolynomial) -> Dict[Tuple[MultiIndex, MultiIndex], np.ndarray]:
    """
    Coefficients of ``q`` in the basis p_{alpha beta}

    The leading monomial of p_{alpha beta} is z^beta conj(z)^alpha with coefficient
    (-1)^{|beta|} (alpha! beta!)^{-1/2}; every other monomial has lower total degree, so the
    expansion is a triangular elimination from the top degree down.

    :param q: Symbol polynomial
    :type q: SymbolPolynomial
    :return: Mapping (alpha, beta) to r x r coefficients
    :rtype: Dict[Tuple[MultiIndex, MultiIndex], np.ndarray]
    """
    remaining = {key: value.copy() for key, value in q.terms.items()}
    expansion: Dict[Tuple[MultiIndex, MultiIndex], np.ndarray] = {}
    while remaining:
        a, b = max(remaining, key=lambda m: (sum(m[0]) + sum(m[1]), m))
        coefficient = remaining.pop((a, b))
        lead = (-1.0) ** sum(a) / np.sqrt(_multi_factorial(a) * _multi_factorial(b))
        weight = coefficient / lead
        expansion[(b, a)] = expansion.get((b, a), 0) + weight
        for key, value in _pab_terms(b, a):
            if key == (a, b):
                continue
            updated = remaining.get(key, 0) - value * weight
            if np.max(np.abs(updated)) > DROP_TOLERANCE:
                remaining[key] = updated
            else:
                remaining.pop(key, None)
    return expansion


def op_quantize(q: SymbolPolynomial, p: Union[int, PolySpace]) -> np.ndarray:
    """
    Matrix of Op(q) restricted to antiholomorphic polynomials of degree at most ``p``

    Op maps p_{alpha beta} to the rank one operator |alpha><beta| between normalized monomials,
    so the matrix follows from :func:`pab_expansion`. Rows and columns use the flat index
    ``idx(alpha) * r + l`` of :class:`OscillatorBasis`.

    :param q: Symbol polynomial
    :type q: SymbolPolynomial
    :param p: Degree cap or a polynomial space whose antiholomorphic cap is used
    :type p: Union[int, PolySpace]
    :raises CapExceeded: If a degree of ``q`` exceeds the cap
    :return: Matrix of size (len(basis) r) x (len(basis) r)
    :rtype: np.ndarray
    """
    cap = p.anti_cap if isinstance(p, PolySpace) else int(p)
    _check_cap(cap)
    if q.holomorphic_degree > cap or q.antiholomorphic_degree > cap:
        raise ErrorCodes()(
            "CAP_EXCEEDED",
            f"degrees ({q.holomorphic_degree}, {q.antiholomorphic_degree}) above cap {cap}",
        )
    basis = OscillatorBasis(q.half_dim, cap)
    r = q.rank
    matrix = np.zeros((len(basis) * r, len(basis) * r), dtype=complex)
    for (alpha, beta), coefficient in pab_expansion(q).items():
        if alpha in basis and beta in basis:
            row, column = basis.index(alpha) * r, basis.index(beta) * r
            matrix[row : row + r, column : column + r] += coefficient
    return matrix


def _normalized_monomials(basis: OscillatorBasis, z: np.ndarray) -> np.ndarray:
    powers = np.array(basis.multi_indices).reshape(len(basis), basis.half_dim)
    norms = np.sqrt([_multi_factorial(alpha) for alpha in basis.multi_indices])
    return np.prod(z.conj()[..., None, :] ** powers, axis=-1) / norms


def quadrature_op(q: SymbolPolynomial, p: int, nodes: int = 40, seed: int = 0) -> np.ndarray:
    """
    Matrix of Op(q) from Gauss-Hermite quadrature of its integral kernel

        Op(q) f (u) = (2 pi)^{-n} int exp(u . conj(v) - |v|^2) q(u - v) f(v) dmu_E(v)

    Images of the normalized monomials are sampled at random points and fitted in the
    antiholomorphic monomials up to degree p + deg q. Only used to cross-check
    :func:`op_quantize`.

    :param q: Symbol polynomial
    :type q: SymbolPolynomial
    :param p: Degree cap of the domain and of the returned rows
    :type p: int
    :param nodes: Gauss-Hermite nodes per real dimension, defaults to 40
    :type nodes: int, optional
    :param seed: Seed of the sample points, defaults to 0
    :type seed: int, optional
    :return: Matrix comparable with ``op_quantize(q, p)``
    :rtype: np.ndarray
    """
    n, r = q.half_dim, q.rank
    domain = OscillatorBasis(n, p)
    target = OscillatorBasis(n, p + q.antiholomorphic_degree + q.holomorphic_degree)
    x, w = np.polynomial.hermite.hermgauss(nodes)
    grids = np.meshgrid(*([x] * (2 * n)), indexing="ij")
    weights = np.ones_like(grids[0])
    for axis in range(2 * n):
        weights = weights * np.meshgrid(*([w] * (2 * n)), indexing="ij")[axis]
    v = np.stack([grids[2 * i] + 1j * grids[2 * i + 1] for i in range(n)], axis=-1).reshape(-1, n)
    weights = weights.ravel() / np.pi**n
    f_values = _normalized_monomials(domain, v)

    rng = np.random.default_rng(seed)
    samples = 2 * len(target)
    radius = 0.8 * np.sqrt(rng.uniform(size=(samples, n)))
    angle = rng.uniform(0, 2 * np.pi, size=(samples, n))
    points = radius * np.exp(1j * angle)

    images = np.zeros((samples, r, len(domain), r), dtype=complex)
    for s, u in enumerate(points):
        kernel = weights * np.exp(v.conj() @ u)
        symbol = q.evaluate(u[None, :] - v)
        images[s] = np.einsum("m,mij,mb->ibj", kernel, symbol, f_values)

    design = _normalized_monomials(target, points)
    fitted, *_ = np.linalg.lstsq(design, images.reshape(samples, -1), rcond=None)
    fitted = fitted.reshape(len(target), r, len(domain), r)
    rows = [target.index(alpha) for alpha in domain.multi_indices]
    return fitted[rows].reshape(len(domain) * r, len(domain) * r)


def projector_symbol_polynomial(frame: PointFrame, interval: Tuple[float, float]) -> SymbolPolynomial:
    """
    sigma^I = sum over model levels (alpha, l) in the window of p_{alpha alpha} (x) zeta_l zeta_l^*

    :param frame: Pointwise frame
    :type frame: PointFrame
    :param interval: Window with endpoints off the model spectrum
    :type interval: Tuple[float, float]
    :return: Matrix valued symbol polynomial in the standard auxiliary frame
    :rtype: SymbolPolynomial
    """
    lo, hi = interval
    operator = box_operator(frame, cap_for(hi, frame.frequencies[0], frame.potential_values[0]))
    for end in interval:
        if np.any(np.abs(operator.eigenvalues - end) < 1e-8):
            raise ErrorCodes()("ENDPOINT_ON_SPECTRUM", f"endpoint {end} on a model level")
    symbol = SymbolPolynomial({}, frame.half_dim, frame.rank)
    for flat in np.flatnonzero((operator.eigenvalues > lo) & (operator.eigenvalues < hi)):
        alpha, aux = operator.label(int(flat))
        zeta = frame.potential_vectors[:, aux]
        symbol = symbol + pab_polynomial(alpha, alpha).tensor(np.outer(zeta, zeta.conj()))
    return symbol


def model_projector_kernel(
    frame: PointFrame, interval: Tuple[float, float], xi: np.ndarray, eta: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    Schwartz kernel P(eta + xi, eta) of the model spectral projector

        (2 pi)^{-n} exp(i omega(eta, xi) / 2 - |xi|_y^2 / 4) sigma^I(z(xi))

    :param frame: Pointwise frame
    :type frame: PointFrame
    :param interval: Window with endpoints off the model spectrum
    :type interval: Tuple[float, float]
    :param xi: Displacements of shape (..., 2n)
    :type xi: np.ndarray
    :param eta: Base points of shape (..., 2n), defaults to the origin
    :type eta: Optional[np.ndarray], optional
    :raises EndpointOnSpectrum: If an endpoint lies on a model level
    :return: Kernel values of shape (..., r, r)
    :rtype: np.ndarray
    """
    xi = np.asarray(xi, dtype=float)
    eta = np.zeros_like(xi) if eta is None else np.asarray(eta, dtype=float)
    symbol = projector_symbol_polynomial(frame, interval)
    prefactor = (2 * np.pi) ** (-frame.half_dim) * np.exp(
        0.5j * frame.omega(eta, xi) - 0.25 * frame.norm_sq(xi)
    )
    return prefactor[..., None, None] * symbol.evaluate(frame.complex_coordinates(xi))


@dataclass(frozen=True)
class NormalizationReport:
    expected: float
    value: float
    multiplicity: int

    @property
    def ratio(self) -> float:
        return self.value / (self.multiplicity * self.expected)


def normalization_report(frame: PointFrame) -> NormalizationReport:
    """
    Kernel trace at the diagonal for a window around the lowest model level, against
    (2 pi)^{-n} per level; any residual factor shows up in the ratio

    :param frame: Pointwise frame
    :type frame: PointFrame
    :return: Report
    :rtype: NormalizationReport
    """
    operator = box_operator(frame, 1)
    levels = np.unique(np.round(operator.eigenvalues, 12))
    lowest = levels[0]
    spacing = levels[1] - lowest if len(levels) > 1 else 1.0
    window = (lowest - 0.5 * spacing, lowest + 0.5 * spacing)
    multiplicity = int(np.sum(np.abs(operator.eigenvalues - lowest) < 1e-10))
    kernel = model_projector_kernel(frame, window, np.zeros(2 * frame.half_dim))
    report = NormalizationReport(
        expected=(2 * np.pi) ** (-frame.half_dim),
        value=float(np.real(np.trace(kernel))),
        multiplicity=multiplicity,
    )
    if abs(report.ratio - 1.0) > 1e-12:
        symbols_logger.warning(f"Model kernel normalization off by factor {report.ratio}")
    return report
