"""
First Chern numbers of projector fields over two-dimensional periodic grids and the
Riemann-Roch count rank(F) k d + c1(F) on T^2.

Sign convention: c1 is the Chern-Weil degree (i / 2 pi) int tr(P dP ^ dP) with dx ^ dy positive,
the same orientation in which the degree d = (1 / 2 pi) int omega of L is positive.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union
import logging

import numpy as np

from landaulab.errors import ErrorCodes
from landaulab.model_spectrum import ProjectorField

chern_logger = logging.getLogger("landaulab.chern")

TWO_PI = 2.0 * np.pi
OVERLAP_THRESHOLD: float = 1e-4
INTEGRALITY_TOLERANCE: float = 1e-3


@dataclass
class ChernData:
    """Chern number of a projector field with the plaquette loop phases it was summed from"""

    field: ProjectorField
    c1: int
    curvature: np.ndarray
    raw: float


def _frames(field: ProjectorField) -> np.ndarray:
    _, vectors = np.linalg.eigh(field.matrices)
    frames = vectors[..., field.dimension - field.rank :]
    return frames.reshape(field.shape + frames.shape[-2:])


def _check_plane(field: ProjectorField) -> None:
    if len(field.shape) != 2:
        raise ErrorCodes()("UNSUPPORTED_DIMENSION", f"projector field over a grid of shape {field.shape}")


def _link_variables(frames: np.ndarray, axis: int) -> np.ndarray:
    neighbour = np.roll(frames, -1, axis=axis)
    overlaps = np.linalg.det(np.swapaxes(frames.conj(), -1, -2) @ neighbour)
    smallest = float(np.min(np.abs(overlaps)))
    if smallest < OVERLAP_THRESHOLD:
        where = tuple(int(c) for c in np.unravel_index(np.argmin(np.abs(overlaps)), overlaps.shape))
        raise ErrorCodes()("SINGULAR_OVERLAP", f"|det| = {smallest:.2e} at {where} along axis {axis}")
    return overlaps / np.abs(overlaps)


def chern_data(field: ProjectorField) -> ChernData:
    """
    Lattice Chern number from plaquette products of normalized link overlap determinants

    :param field: Constant rank projector field over a periodic two-dimensional grid
    :type field: ProjectorField
    :raises UnsupportedDimension: If the grid is not two-dimensional
    :raises SingularOverlap: If an overlap determinant falls below 1e-4
    :return: Chern number and per-plaquette phases
    :rtype: ChernData
    """
    _check_plane(field)
    if field.rank == 0 or field.rank == field.dimension:
        return ChernData(field=field, c1=0, curvature=np.zeros(field.shape), raw=0.0)
    frames = _frames(field)
    first = _link_variables(frames, 0)
    second = _link_variables(frames, 1)
    loops = first * np.roll(second, -1, axis=0) / np.roll(first, -1, axis=1) / second
    curvature = np.angle(loops)
    raw = float(-np.sum(curvature) / TWO_PI)
    c1 = int(np.rint(raw))
    if abs(raw - c1) > INTEGRALITY_TOLERANCE:
        raise ErrorCodes()("SINGULAR_OVERLAP", f"loop phases sum to {raw:.6f}, not an integer")
    chern_logger.debug(f"Chern number {c1} from {curvature.size} plaquettes")
    return ChernData(field=field, c1=c1, curvature=curvature, raw=raw)


def fhs_chern(field: ProjectorField) -> int:
    """Integer first Chern number of a projector field, see :func:`chern_data`"""
    return chern_data(field).c1


def berry_curvature_oracle(field: ProjectorField) -> float:
    """
    Unrounded Chern number from -(1 / 2 pi) sum Im tr(P [d1 P, d2 P]) with central differences

    Only used to cross-check :func:`fhs_chern`; converges as the grid is refined.
    """
    _check_plane(field)
    matrices = field.matrices.reshape(field.shape + (field.dimension, field.dimension))
    d1 = 0.5 * (np.roll(matrices, -1, axis=0) - np.roll(matrices, 1, axis=0))
    d2 = 0.5 * (np.roll(matrices, -1, axis=1) - np.roll(matrices, 1, axis=1))
    commutator = d1 @ d2 - d2 @ d1
    density = np.imag(np.trace(matrices @ commutator, axis1=-2, axis2=-1))
    return float(-np.sum(density) / TWO_PI)


def harper_matrix(kx: float, ky: float, q: int, p: int = 1) -> np.ndarray:
    """
    Bloch Hamiltonian of the Harper model at flux p / q per plaquette, for kx in [0, 2 pi / q)
    and ky in [0, 2 pi)

    :param kx: Magnetic Brillouin zone momentum along x
    :type kx: float
    :param ky: Momentum along y
    :type ky: float
    :param q: Denominator of the flux, at least 3
    :type q: int
    :param p: Numerator of the flux, defaults to 1
    :type p: int, optional
    :return: Hermitian q x q matrix
    :rtype: np.ndarray
    """
    if q < 3:
        raise ErrorCodes()("USAGE", f"Harper matrix needs q >= 3, got {q}")
    sites = np.arange(q)
    matrix = np.diag(-2.0 * np.cos(ky + TWO_PI * p * sites / q)).astype(complex)
    for j in range(q - 1):
        matrix[j, j + 1] = -1.0
        matrix[j + 1, j] = -1.0
    matrix[q - 1, 0] += -np.exp(-1j * q * kx)
    matrix[0, q - 1] += -np.exp(1j * q * kx)
    return matrix


def _band_projectors(
    hamiltonian: Callable[[float, float], np.ndarray],
    bands: Sequence[int],
    nk: int,
    periods: Tuple[float, float],
) -> np.ndarray:
    projectors = []
    for i in range(nk):
        for j in range(nk):
            _, vectors = np.linalg.eigh(hamiltonian(periods[0] * i / nk, periods[1] * j / nk))
            chosen = vectors[:, list(bands)]
            projectors.append(chosen @ chosen.conj().T)
    return np.stack(projectors)


def hofstadter_projector_field(q: int, band: Union[int, Sequence[int]], nk: int, p: int = 1) -> ProjectorField:
    """
    Projector field of Harper bands over the magnetic Brillouin torus

    :param q: Flux denominator
    :type q: int
    :param band: Band index or indices, counted from the bottom
    :type band: Union[int, Sequence[int]]
    :param nk: Momentum samples per direction
    :type nk: int
    :param p: Flux numerator, defaults to 1
    :type p: int, optional
    :return: Projector field over an (nk, nk) grid
    :rtype: ProjectorField
    """
    bands = [band] if isinstance(band, (int, np.integer)) else list(band)
    matrices = _band_projectors(
        lambda kx, ky: harper_matrix(kx, ky, q, p), bands, nk, (TWO_PI / q, TWO_PI)
    )
    return ProjectorField(matrices=matrices, shape=(nk, nk), rank=len(bands))


def kubo_chern(
    hamiltonian: Callable[[float, float], np.ndarray],
    band: int,
    nk: int,
    periods: Tuple[float, float] = (TWO_PI, TWO_PI),
    step: float = 1e-6,
) -> float:
    """
    Chern number of an isolated band from velocity matrix elements

        c1 = -(1 / 2 pi) int 2 sum_{m != n} Im(<n|d1 h|m><m|d2 h|n>) / (E_n - E_m)^2 dk

    Velocities are central differences of ``hamiltonian``; the integral is a midpoint sum.

    :param hamiltonian: Bloch Hamiltonian h(k1, k2)
    :type hamiltonian: Callable[[float, float], np.ndarray]
    :param band: Band index counted from the bottom
    :type band: int
    :param nk: Samples per direction
    :type nk: int
    :param periods: Periods of the momentum torus, defaults to (2 pi, 2 pi)
    :type periods: Tuple[float, float], optional
    :param step: Finite difference step, defaults to 1e-6
    :type step: float, optional
    :return: Unrounded Chern number
    :rtype: float
    """
    total = 0.0
    cell = periods[0] * periods[1] / nk**2
    for i in range(nk):
        for j in range(nk):
            k1 = periods[0] * (i + 0.5) / nk
            k2 = periods[1] * (j + 0.5) / nk
            energies, vectors = np.linalg.eigh(hamiltonian(k1, k2))
            v1 = (hamiltonian(k1 + step, k2) - hamiltonian(k1 - step, k2)) / (2 * step)
            v2 = (hamiltonian(k1, k2 + step) - hamiltonian(k1, k2 - step)) / (2 * step)
            x1 = vectors.conj().T @ v1 @ vectors
            x2 = vectors.conj().T @ v2 @ vectors
            others = [m for m in range(len(energies)) if m != band]
            gaps = (energies[band] - energies[others]) ** 2
            total += 2.0 * np.sum(np.imag(x1[band, others] * x2[others, band]) / gaps) * cell
    return float(-total / TWO_PI)


def riemann_roch(k: int, d: int, field: ProjectorField, c1: Optional[int] = None) -> int:
    """
    Riemann-Roch number of L^k (x) F on T^2, rank(F) k d + c1(F)

    :param k: Tensor power
    :type k: int
    :param d: Degree of L
    :type d: int
    :param field: Cluster bundle
    :type field: ProjectorField
    :param c1: Chern number of the bundle, computed with :func:`fhs_chern` when omitted
    :type c1: Optional[int], optional
    :raises UnsupportedDimension: For bundles over T^4
    :return: Predicted cluster count
    :rtype: int
    """
    if field.half_dim is not None and field.half_dim != 1:
        raise ErrorCodes()("UNSUPPORTED_DIMENSION", f"half dimension {field.half_dim}")
    if c1 is None:
        c1 = fhs_chern(field)
    return int(field.rank * k * d + c1)
