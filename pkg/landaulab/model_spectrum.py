"""
Pointwise model operators on truncated antiholomorphic polynomial spaces, the envelope of
their spectra, the Weyl density and the projector symbols of spectral windows.

Basis vectors of the model space are the normalized monomials conj(z)^alpha / sqrt(alpha!)
tensored with an orthonormal frame of the auxiliary fibre; flat index ``idx(alpha) * r + l``.
"""

from dataclasses import dataclass
from itertools import product
from math import factorial
from typing import Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np

from landaulab.errors import ErrorCodes
from landaulab.geometry import (
    GeometryField,
    PointFrame,
    frame_at,
    site_frequencies,
    site_potential_values,
)
from landaulab.intervals import IntervalUnion

model_logger = logging.getLogger("landaulab.model_spectrum")

ENDPOINT_TOLERANCE: float = 1e-8
MULTIPLICITY_TOLERANCE: float = 1e-10

MultiIndex = Tuple[int, ...]


class OscillatorBasis:
    """
    Multi-indices alpha with |alpha| <= cap in graded order, descending lexicographic per degree

    :param half_dim: Number of complex dimensions
    :type half_dim: int
    :param cap: Total degree cap
    :type cap: int
    """

    def __init__(self, half_dim: int, cap: int) -> None:
        if cap < 0:
            raise ErrorCodes()("CAP_EXCEEDED", f"negative degree cap {cap}")
        self.half_dim: int = half_dim
        self.cap: int = cap
        indices: List[MultiIndex] = []
        for degree in range(cap + 1):
            level = [alpha for alpha in product(range(degree + 1), repeat=half_dim) if sum(alpha) == degree]
            indices.extend(sorted(level, reverse=True))
        self.multi_indices: Tuple[MultiIndex, ...] = tuple(indices)
        self._lookup: Dict[MultiIndex, int] = {alpha: i for i, alpha in enumerate(indices)}

    def __len__(self) -> int:
        return len(self.multi_indices)

    def __iter__(self):
        return iter(self.multi_indices)

    def __contains__(self, alpha: MultiIndex) -> bool:
        return tuple(alpha) in self._lookup

    def index(self, alpha: MultiIndex) -> int:
        return self._lookup[tuple(alpha)]

    def shifted(self) -> np.ndarray:
        """Array of alpha_i + 1/2, shape (len, n)"""
        return np.array(self.multi_indices, dtype=float).reshape(len(self), self.half_dim) + 0.5

    def factorial(self, alpha: MultiIndex) -> float:
        return float(np.prod([factorial(a) for a in alpha]))


@dataclass
class ModelOperator:
    """
    Model operator at a point, diagonal in the basis conj(z)^alpha (x) zeta_l.

    ``change_of_basis`` maps coefficients in that eigenbasis to coefficients in the basis built
    from the standard frame of the auxiliary fibre.
    """

    frame: PointFrame
    basis: OscillatorBasis
    eigenvalues: np.ndarray
    change_of_basis: np.ndarray

    @property
    def dimension(self) -> int:
        return len(self.eigenvalues)

    @property
    def matrix(self) -> np.ndarray:
        """Matrix in the standard auxiliary frame"""
        return (self.change_of_basis * self.eigenvalues[None, :]) @ self.change_of_basis.conj().T

    def label(self, flat: int) -> Tuple[MultiIndex, int]:
        rank = self.frame.rank
        return self.basis.multi_indices[flat // rank], flat % rank


def cap_for(cutoff: float, min_frequency: float, min_potential: float) -> int:
    """Smallest degree cap p with p > (cutoff - min V) / min B"""
    return max(int(np.floor((cutoff - min_potential) / min_frequency)) + 1, 0)


def box_operator(frame: PointFrame, p: int) -> ModelOperator:
    """
    Model operator sum_i B_i (alpha_i + 1/2) + V_l on polynomials of degree at most ``p``

    :param frame: Pointwise frame
    :type frame: PointFrame
    :param p: Degree cap
    :type p: int
    :return: Diagonal model operator
    :rtype: ModelOperator
    """
    basis = OscillatorBasis(frame.half_dim, p)
    energies = basis.shifted() @ frame.frequencies
    eigenvalues = (energies[:, None] + frame.potential_values[None, :]).ravel()
    change = np.kron(np.eye(len(basis)), frame.potential_vectors)
    return ModelOperator(frame=frame, basis=basis, eigenvalues=eigenvalues, change_of_basis=change)


def _group_multiplicities(values: np.ndarray) -> List[Tuple[float, int]]:
    grouped: List[Tuple[float, int]] = []
    for value in np.sort(values):
        if grouped and abs(value - grouped[-1][0]) <= MULTIPLICITY_TOLERANCE * max(1.0, abs(value)):
            grouped[-1] = (grouped[-1][0], grouped[-1][1] + 1)
        else:
            grouped.append((float(value), 1))
    return grouped


def sigma_y(frame: PointFrame, cutoff: float) -> List[Tuple[float, int]]:
    """
    Model spectrum below a cutoff, as (eigenvalue, multiplicity) pairs in ascending order

    .. note:: The cutoff is exclusive; cutoffs are expected to lie in gaps.

    :param frame: Pointwise frame
    :type frame: PointFrame
    :param cutoff: Upper bound
    :type cutoff: float
    :return: Eigenvalues with multiplicities
    :rtype: List[Tuple[float, int]]
    """
    p = cap_for(cutoff, frame.frequencies[0], frame.potential_values[0])
    operator = box_operator(frame, p)
    return _group_multiplicities(operator.eigenvalues[operator.eigenvalues < cutoff])


def level_table(frame: PointFrame, cutoff: float) -> List[Tuple[float, MultiIndex, int]]:
    """Labelled model levels (eigenvalue, alpha, auxiliary index) below the cutoff"""
    p = cap_for(cutoff, frame.frequencies[0], frame.potential_values[0])
    operator = box_operator(frame, p)
    order = np.argsort(operator.eigenvalues, kind="stable")
    rows = []
    for flat in order:
        if operator.eigenvalues[flat] >= cutoff:
            break
        alpha, aux = operator.label(int(flat))
        rows.append((float(operator.eigenvalues[flat]), alpha, aux))
    return rows


def site_levels(geom: GeometryField, cutoff: float, p: Optional[int] = None) -> np.ndarray:
    """
    Sorted model eigenvalues at every site, shape (sites, D)

    :param geom: Valid geometry
    :type geom: GeometryField
    :param cutoff: Levels below this value are complete at every site
    :type cutoff: float
    :param p: Degree cap, defaults to the smallest cap complete below ``cutoff`` on the grid
    :type p: Optional[int], optional
    :return: Level table
    :rtype: np.ndarray
    """
    frequencies = site_frequencies(geom)
    potentials = site_potential_values(geom)
    needed = cap_for(cutoff, float(np.min(frequencies)), float(np.min(potentials)))
    if p is None:
        p = needed
    elif p < needed:
        model_logger.warning(f"Degree cap {p} below the cap {needed} needed for completeness under {cutoff}")
    basis = OscillatorBasis(geom.half_dim, p)
    energies = frequencies @ basis.shifted().T
    levels = (energies[:, :, None] + potentials[:, None, :]).reshape(geom.sites, -1)
    return np.sort(levels, axis=1)


def _branch_hulls(levels: np.ndarray, cutoff: float) -> List[Tuple[float, float]]:
    lows = levels.min(axis=0)
    highs = levels.max(axis=0)
    return [(float(lo), float(min(hi, cutoff))) for lo, hi in zip(lows, highs) if lo < cutoff]


def sigma_envelope(geom: GeometryField, cutoff: float, p: Optional[int] = None) -> IntervalUnion:
    """
    Union over the grid of the model spectra, as interval hulls of the sorted branches

    :param geom: Valid geometry
    :type geom: GeometryField
    :param cutoff: Truncation value
    :type cutoff: float
    :param p: Degree cap, defaults to None
    :type p: Optional[int], optional
    :return: Envelope truncated at ``cutoff``
    :rtype: IntervalUnion
    """
    envelope = IntervalUnion(_branch_hulls(site_levels(geom, cutoff, p), cutoff))
    model_logger.debug(f"Envelope below {cutoff}: {envelope}")
    return envelope


def envelope_refinement_error(geom: GeometryField, cutoff: float) -> List[float]:
    """
    One-sided estimate of how far the grid hull undershoots the true envelope, per component.

    Compares the branch hulls of the full grid with those of the half-resolution subgrid.

    :param geom: Valid geometry
    :type geom: GeometryField
    :param cutoff: Truncation value
    :type cutoff: float
    :return: Estimates aligned with the components of :func:`sigma_envelope`
    :rtype: List[float]
    """
    levels = site_levels(geom, cutoff)
    coarse_mask = np.all(np.array(np.unravel_index(np.arange(geom.sites), geom.shape)) % 2 == 0, axis=0)
    full = _branch_hulls(levels, cutoff)
    coarse = _branch_hulls(levels[coarse_mask], cutoff)
    envelope = IntervalUnion(full)
    errors = [0.0] * len(envelope)
    for (lo, hi), (clo, chi) in zip(full, coarse):
        component = envelope.component_index(0.5 * (lo + hi))
        errors[component] = max(errors[component], clo - lo, hi - chi)
    return errors


def continuity_modulus(geom: GeometryField, cutoff: float) -> float:
    """Largest jump of a sorted branch below ``cutoff`` between neighbouring sites"""
    levels = site_levels(geom, cutoff)
    keep = levels.min(axis=0) < cutoff
    if not np.any(keep):
        return 0.0
    branches = levels[:, keep].reshape(geom.shape + (-1,))
    modulus = 0.0
    for axis in range(geom.dim):
        modulus = max(modulus, float(np.max(np.abs(np.roll(branches, -1, axis=axis) - branches))))
    return modulus


def weyl_density(geom: GeometryField, lam: float) -> float:
    """
    v(lambda), the Liouville integral of the number of model levels at most ``lam``

    :param geom: Valid geometry
    :type geom: GeometryField
    :param lam: Spectral parameter
    :type lam: float
    :return: Quadrature of the Weyl density
    :rtype: float
    """
    counts = np.sum(site_levels(geom, lam + 1.0) <= lam, axis=1)
    return float(np.dot(counts, geom.liouville) * geom.cell_volume)


def weyl_table(geom: GeometryField, lambdas: Sequence[float]) -> List[Tuple[float, float]]:
    return [(float(lam), weyl_density(geom, lam)) for lam in lambdas]


def _check_endpoints(eigenvalues: np.ndarray, interval: Tuple[float, float]) -> None:
    for end in interval:
        close = np.abs(eigenvalues - end) < ENDPOINT_TOLERANCE
        if np.any(close):
            raise ErrorCodes()("ENDPOINT_ON_SPECTRUM", f"endpoint {end} within {ENDPOINT_TOLERANCE} of a level")


def projector_symbol(frame: PointFrame, interval: Tuple[float, float], p: Optional[int] = None) -> np.ndarray:
    """
    Spectral projector of the model operator onto the levels in ``interval``

    :param frame: Pointwise frame
    :type frame: PointFrame
    :param interval: Compact window (a, b)
    :type interval: Tuple[float, float]
    :param p: Degree cap, defaults to the cap complete below b
    :type p: Optional[int], optional
    :raises EndpointOnSpectrum: If an endpoint lies on a level
    :return: Hermitian projector matrix in the standard auxiliary frame
    :rtype: np.ndarray
    """
    lo, hi = interval
    if p is None:
        p = cap_for(hi, frame.frequencies[0], frame.potential_values[0])
    operator = box_operator(frame, p)
    _check_endpoints(operator.eigenvalues, interval)
    selected = (operator.eigenvalues > lo) & (operator.eigenvalues < hi)
    columns = operator.change_of_basis[:, selected]
    return columns @ columns.conj().T


@dataclass
class ProjectorField:
    """
    Projector matrices over a grid of base points with constant rank

    ``shape`` is the grid shape of the base points (sites of a torus or a parameter grid) and
    ``matrices`` has shape (prod(shape), D, D).
    """

    matrices: np.ndarray
    shape: Tuple[int, ...]
    rank: int
    interval: Optional[Tuple[float, float]] = None
    cap: Optional[int] = None
    half_dim: Optional[int] = None

    @property
    def dimension(self) -> int:
        return self.matrices.shape[-1]

    def at(self, multi_index: Tuple[int, ...]) -> np.ndarray:
        return self.matrices[int(np.ravel_multi_index(multi_index, self.shape, mode="wrap"))]


def _check_constant_rank(ranks: np.ndarray, shape: Tuple[int, ...]) -> None:
    grid = ranks.reshape(shape)
    for axis in range(len(shape)):
        jumps = np.argwhere(np.roll(grid, -1, axis=axis) != grid)
        if len(jumps):
            where = tuple(int(c) for c in jumps[0])
            raise ErrorCodes()(
                "RANK_JUMP", f"rank {grid[where]} at {where} differs from its neighbour along axis {axis}"
            )


def cluster_bundle(geom: GeometryField, interval: Tuple[float, float], p: Optional[int] = None) -> ProjectorField:
    """
    Projector field of the model levels inside ``interval`` over every grid site

    :param geom: Valid geometry
    :type geom: GeometryField
    :param interval: Window with endpoints in gaps of the envelope
    :type interval: Tuple[float, float]
    :param p: Degree cap, defaults to a cap complete below the upper end on the whole grid
    :type p: Optional[int], optional
    :raises RankJump: If the rank is not constant over the grid
    :return: Projector field
    :rtype: ProjectorField
    """
    if p is None:
        p = cap_for(
            interval[1],
            float(np.min(site_frequencies(geom))),
            float(np.min(site_potential_values(geom))),
        )
    matrices = np.stack([projector_symbol(frame_at(geom, site), interval, p) for site in range(geom.sites)])
    ranks = np.rint(np.real(np.trace(matrices, axis1=1, axis2=2))).astype(int)
    _check_constant_rank(ranks, geom.shape)
    model_logger.info(f"Cluster bundle over {interval} has rank {ranks[0]} with cap {p}")
    return ProjectorField(
        matrices=matrices,
        shape=geom.shape,
        rank=int(ranks[0]),
        interval=tuple(interval),
        cap=p,
        half_dim=geom.half_dim,
    )
