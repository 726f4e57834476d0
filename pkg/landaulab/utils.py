from typing import Sequence, Tuple
import logging

import numpy as np

utils_logger = logging.getLogger("landaulab.utils")


def determine_log_level(verbose: bool, very_verbose: bool) -> int:
    """
    Determine the appropriate log level given user input

    :param verbose: User requested verbose output (info)
    :type verbose: bool
    :param very_verbose: User requested verbose output (debug)
    :type very_verbose: bool
    :return: Log level enum of logging library
    :rtype: int
    """
    info_or_warn: int = logging.INFO if verbose else logging.WARNING
    return logging.DEBUG if very_verbose else info_or_warn


def periodic_offset(delta: np.ndarray, grid: int) -> np.ndarray:
    """
    Shortest signed integer offsets on a periodic axis of length ``grid``, in (-grid/2, grid/2]

    :param delta: Integer differences
    :type delta: np.ndarray
    :param grid: Number of sites per axis
    :type grid: int
    :return: Wrapped offsets
    :rtype: np.ndarray
    """
    wrapped = np.mod(np.asarray(delta) + grid // 2, grid) - grid // 2
    if grid % 2 == 0:
        wrapped = np.where(wrapped == -(grid // 2), grid // 2, wrapped)
    return wrapped


def site_offsets(x: Sequence[int], y: Sequence[int], grid: int) -> np.ndarray:
    """Shortest periodic integer displacement from site ``y`` to site ``x``"""
    return periodic_offset(np.asarray(x, dtype=int) - np.asarray(y, dtype=int), grid)


def hermitian_part(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + np.swapaxes(matrix, -1, -2).conj())


def canonical_subspace_basis(vectors: np.ndarray, threshold: float = 1e-6) -> np.ndarray:
    """
    Deterministic orthonormal basis of the column span of ``vectors``

    The standard basis vectors are projected onto the span in index order and orthonormalized
    by Gram-Schmidt, so the result depends only on the subspace and not on how a solver chose
    to represent it.

    :param vectors: Matrix whose orthonormal columns span the subspace
    :type vectors: np.ndarray
    :param threshold: Norm below which a projected reference vector is skipped, defaults to 1e-6
    :type threshold: float, optional
    :return: Matrix of the same shape with canonical columns
    :rtype: np.ndarray
    """
    dim, rank = vectors.shape
    projector = vectors @ vectors.conj().T
    basis = []
    for index in range(dim):
        candidate = projector[:, index].astype(complex)
        for chosen in basis:
            candidate = candidate - chosen * np.vdot(chosen, candidate)
        norm = np.linalg.norm(candidate)
        if norm > threshold:
            basis.append(candidate / norm)
        if len(basis) == rank:
            break
    return np.stack(basis, axis=1)


def split_degenerate(values: np.ndarray, threshold: float) -> Tuple[Tuple[int, int], ...]:
    """Index ranges of consecutive sorted values whose neighbours differ by less than ``threshold``"""
    groups = []
    start = 0
    for index in range(1, len(values) + 1):
        if index == len(values) or abs(values[index] - values[index - 1]) >= threshold:
            groups.append((start, index))
            start = index
    return tuple(groups)


def smooth_bump(radius: np.ndarray, cutoff: float) -> np.ndarray:
    """
    Smooth radial cutoff, equal to one up to ``cutoff / 2`` and zero from ``cutoff`` on

    :param radius: Non-negative radii
    :type radius: np.ndarray
    :param cutoff: Outer radius of the support
    :type cutoff: float
    :return: Values in [0, 1]
    :rtype: np.ndarray
    """
    t = np.clip((np.asarray(radius, dtype=float) - 0.5 * cutoff) / (0.5 * cutoff), 0.0, 1.0)

    def _rise(s):
        return np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)

    return _rise(1.0 - t) / (_rise(1.0 - t) + _rise(t))
