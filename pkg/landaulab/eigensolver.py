"""
Lowest eigenpairs of the assembled operators.

All solvers work on the Hermitian form S = R^{1/2} H R^{-1/2}; eigenvectors phi of S map back to
sections psi = phi / sqrt(w), orthonormal in the weighted product. Reported eigenvalues are
those of k^{-1} H, or of H itself when k = 0.
"""

from dataclasses import dataclass, field, replace
from typing import Optional, Tuple, Union
import logging

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from landaulab.errors import ErrorCodes
from landaulab.lattice import LatticeSection, SparseHermitian
from landaulab.utils import hermitian_part

eigensolver_logger = logging.getLogger("landaulab.eigensolver")

DENSE_CAP: int = 6000
BREAKDOWN: float = 1e-12


@dataclass
class SolverSettings:
    """Knobs shared by :func:`solve` and the run configuration"""

    dense_cap: int = DENSE_CAP
    tol: float = 1e-9
    seed: int = 0
    margin: float = 0.5
    max_basis: int = 400
    max_iters: int = 200000
    keep_vectors: bool = True


@dataclass
class EigenSystem:
    """
    Eigenvalues of k^{-1} H below ``cutoff`` with weighted-orthonormal eigenvectors as columns

    ``cutoff`` is the certified range: every eigenvalue strictly below it is reported.
    """

    k: int
    eigenvalues: np.ndarray
    vectors: Optional[np.ndarray]
    residuals: np.ndarray
    cutoff: float
    weights: np.ndarray
    rank: int = 1
    grid: int = 0
    half_dim: int = 1
    method: str = "dense"
    iterations: int = 0
    seed: Optional[int] = None
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.eigenvalues)

    @property
    def sites(self) -> int:
        return len(self.weights) // self.rank

    def section(self, index: int) -> LatticeSection:
        return LatticeSection.from_flat(self.vectors[:, index], self.rank, self.k)

    def site_densities(self, indices: Optional[np.ndarray] = None) -> np.ndarray:
        """|psi_i(x)|^2 contracted over A, shape (sites, len(indices))"""
        if self.vectors is None:
            raise ErrorCodes()("USAGE", "eigen-data was stored without eigenvectors")
        chosen = self.vectors if indices is None else self.vectors[:, indices]
        return np.sum(np.abs(chosen.reshape(self.sites, self.rank, -1)) ** 2, axis=1)

    def orthonormality_defect(self) -> float:
        if self.vectors is None or not len(self):
            return 0.0
        gram = self.vectors.conj().T @ (self.weights[:, None] * self.vectors)
        return float(np.max(np.abs(gram - np.eye(len(self)))))


def _scale(k: int) -> float:
    return float(k) if k > 0 else 1.0


def _as_operator(H: Union[SparseHermitian, np.ndarray, sp.spmatrix]) -> SparseHermitian:
    if isinstance(H, SparseHermitian):
        return H
    matrix = sp.csr_matrix(H, dtype=complex)
    return SparseHermitian(matrix=matrix, weights=np.ones(matrix.shape[0]), k=0, grid=0, half_dim=1, rank=1)


def _residuals(symmetric: sp.csr_matrix, values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    if not len(values):
        return np.zeros(0)
    return np.linalg.norm(symmetric @ vectors - vectors * values[None, :], axis=0)


def _finish(
    H: SparseHermitian,
    values: np.ndarray,
    phi: np.ndarray,
    cutoff: float,
    method: str,
    iterations: int,
    seed: Optional[int],
    keep_vectors: bool,
) -> EigenSystem:
    scale = _scale(H.k)
    residuals = _residuals(H.symmetric(), values, phi) / scale
    vectors = phi / np.sqrt(H.weights)[:, None] if keep_vectors else None
    return EigenSystem(
        k=H.k,
        eigenvalues=values / scale,
        vectors=vectors,
        residuals=residuals,
        cutoff=cutoff,
        weights=H.weights,
        rank=H.rank,
        grid=H.grid,
        half_dim=H.half_dim,
        method=method,
        iterations=iterations,
        seed=seed,
    )


def dense_eig(
    H: Union[SparseHermitian, np.ndarray, sp.spmatrix],
    cutoff: Optional[float] = None,
    dense_cap: int = DENSE_CAP,
    keep_vectors: bool = True,
) -> EigenSystem:
    """
    All eigenpairs by a dense Hermitian solve

    Raw matrices are treated as operators with unit weights and k = 0.

    :param H: Operator or Hermitian matrix
    :type H: Union[SparseHermitian, np.ndarray, sp.spmatrix]
    :param cutoff: Keep eigenvalues strictly below this value, defaults to keeping all
    :type cutoff: Optional[float], optional
    :param dense_cap: Largest admissible dimension, defaults to 6000
    :type dense_cap: int, optional
    :param keep_vectors: Store eigenvectors, defaults to True
    :type keep_vectors: bool, optional
    :raises DimensionTooLarge: If the dimension exceeds ``dense_cap``
    :return: Eigen-data
    :rtype: EigenSystem
    """
    H = _as_operator(H)
    if H.dimension > dense_cap:
        raise ErrorCodes()("DIMENSION_TOO_LARGE", f"{H.dimension} > {dense_cap}")
    symmetric = H.symmetric().toarray()
    symmetric = hermitian_part(symmetric)
    values, phi = scipy.linalg.eigh(symmetric)
    scale = _scale(H.k)
    if cutoff is not None:
        keep = values / scale < cutoff
        values, phi = values[keep], phi[:, keep]
    system = _finish(
        H, values, phi, np.inf if cutoff is None else float(cutoff), "dense", 1, None, keep_vectors
    )
    bound = 1e-9 * max(1.0, float(np.max(np.abs(values)) if len(values) else 1.0)) / scale
    if len(system) and np.max(system.residuals) > bound:
        eigensolver_logger.warning(f"Dense residual {np.max(system.residuals):.3e} above {bound:.3e}")
    return system


def _orthogonalize(vector: np.ndarray, *bases: np.ndarray) -> np.ndarray:
    for _ in range(2):
        for basis in bases:
            if basis.shape[1]:
                vector = vector - basis @ (basis.conj().T @ vector)
    return vector


def _lanczos_run(
    symmetric: sp.csr_matrix,
    target: float,
    rng: np.random.Generator,
    tol: float,
    max_basis: int,
    budget: int,
) -> Tuple[np.ndarray, np.ndarray, int]:
    """Locked eigenpairs of ``symmetric`` below ``target`` and the number of matvecs used"""
    dimension = symmetric.shape[0]
    locked = np.zeros((dimension, 0), dtype=complex)
    norm_estimate = float(abs(symmetric).sum(axis=1).max())
    threshold = tol * max(1.0, norm_estimate)
    matvecs = 0
    idle_restarts = 0

    while idle_restarts < 2:
        start = rng.standard_normal(dimension) + 1j * rng.standard_normal(dimension)
        start = _orthogonalize(start, locked)
        if np.linalg.norm(start) < BREAKDOWN * np.sqrt(dimension):
            break
        steps = min(max_basis, dimension - locked.shape[1])
        basis = np.zeros((dimension, steps), dtype=complex)
        alphas, betas = [], []
        basis[:, 0] = start / np.linalg.norm(start)
        beta = 0.0
        used = 0
        for step in range(steps):
            image = symmetric @ basis[:, step]
            matvecs += 1
            alpha = float(np.real(np.vdot(basis[:, step], image)))
            image = image - alpha * basis[:, step]
            if step:
                image = image - betas[-1] * basis[:, step - 1]
            image = _orthogonalize(image, locked, basis[:, : step + 1])
            alphas.append(alpha)
            used = step + 1
            beta = float(np.linalg.norm(image))
            if beta < BREAKDOWN * max(1.0, norm_estimate) or step == steps - 1:
                break
            betas.append(beta)
            basis[:, step + 1] = image / beta
        if matvecs > budget:
            raise ErrorCodes()("NO_CONVERGENCE", f"{matvecs} matrix-vector products")

        ritz, coefficients = scipy.linalg.eigh_tridiagonal(np.array(alphas), np.array(betas[: used - 1]))
        estimates = beta * np.abs(coefficients[-1, :])
        below = ritz < target
        converged = below & (estimates <= threshold)
        gained = 0
        for column in (basis[:, :used] @ coefficients[:, converged]).T:
            column = _orthogonalize(column, locked)
            norm = np.linalg.norm(column)
            if norm > 0.5:
                locked = np.hstack([locked, (column / norm)[:, None]])
                gained += 1
        if gained:
            idle_restarts = 0
        elif np.any(below):
            idle_restarts = 0
        else:
            idle_restarts += 1

    if locked.shape[1] == 0:
        return np.zeros(0), locked, matvecs
    projected = locked.conj().T @ (symmetric @ locked)
    values, rotation = scipy.linalg.eigh(hermitian_part(projected))
    vectors = locked @ rotation
    keep = values < target
    return values[keep], vectors[:, keep], matvecs


def lanczos_lowest(
    H: SparseHermitian,
    cutoff: float,
    tol: float = 1e-9,
    seed: int = 0,
    margin: float = 0.5,
    max_basis: int = 400,
    max_iters: int = 200000,
    keep_vectors: bool = True,
) -> EigenSystem:
    """
    Eigenvalues of k^{-1} H below ``cutoff`` by Lanczos with full reorthogonalization and locking

    Each Krylov run starts from a random vector orthogonal to the locked space; runs repeat
    until two consecutive ones lock nothing new. The count below ``cutoff`` is certified by a
    second, independently seeded run up to ``cutoff + margin``.

    :param H: Operator
    :type H: SparseHermitian
    :param cutoff: Upper end of the requested range
    :type cutoff: float
    :param tol: Residual tolerance relative to the operator norm, defaults to 1e-9
    :type tol: float, optional
    :param seed: Seed of both start vector streams, defaults to 0
    :type seed: int, optional
    :param margin: Extension of the certification run, defaults to 0.5
    :type margin: float, optional
    :param max_basis: Krylov basis size per run, defaults to 400
    :type max_basis: int, optional
    :param max_iters: Budget of matrix-vector products per run, defaults to 200000
    :type max_iters: int, optional
    :param keep_vectors: Store eigenvectors, defaults to True
    :type keep_vectors: bool, optional
    :raises NoConvergence: If a run exceeds its budget
    :raises ClusterUnresolved: If the two runs disagree on the count below ``cutoff``
    :return: Eigen-data certified up to ``cutoff``
    :rtype: EigenSystem
    """
    scale = _scale(H.k)
    symmetric = H.symmetric()
    first, second = np.random.SeedSequence(seed).spawn(2)
    values, phi, used = _lanczos_run(
        symmetric, cutoff * scale, np.random.default_rng(first), tol, max_basis, max_iters
    )
    check, _, used_check = _lanczos_run(
        symmetric, (cutoff + margin) * scale, np.random.default_rng(second), tol, max_basis, max_iters
    )
    counted = int(np.sum(check < cutoff * scale))
    eigensolver_logger.info(f"Lanczos found {len(values)} eigenvalues, certification run {counted}")
    if counted != len(values):
        raise ErrorCodes()("CLUSTER_UNRESOLVED", f"{len(values)} against {counted} below {cutoff}")
    order = np.argsort(values)
    return _finish(
        H, values[order], phi[:, order], float(cutoff), "lanczos", used + used_check, seed, keep_vectors
    )


def solve(H: SparseHermitian, cutoff: float, settings: Optional[SolverSettings] = None) -> EigenSystem:
    """Dense solve up to the configured dimension cap, certified Lanczos above it"""
    settings = settings or SolverSettings()
    if H.dimension <= settings.dense_cap:
        return dense_eig(H, cutoff, settings.dense_cap, settings.keep_vectors)
    return lanczos_lowest(
        H,
        cutoff,
        tol=settings.tol,
        seed=settings.seed,
        margin=settings.margin,
        max_basis=settings.max_basis,
        max_iters=settings.max_iters,
        keep_vectors=settings.keep_vectors,
    )


def counting_function(es: EigenSystem, lam: float) -> int:
    """
    N(lambda, k), the number of eigenvalues at or below ``lam``

    :raises AboveCertifiedCutoff: If ``lam`` is above the certified range
    """
    if lam > es.cutoff:
        raise ErrorCodes()("ABOVE_CERTIFIED_CUTOFF", f"{lam} > {es.cutoff}")
    return int(np.sum(es.eigenvalues <= lam))


def shift(es: EigenSystem, constant: float) -> EigenSystem:
    """Eigen-data of k^{-1} H + c"""
    return replace(es, eigenvalues=es.eigenvalues + constant, cutoff=es.cutoff + constant)
