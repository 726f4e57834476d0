"""
Lattice discretization of the magnetic Laplacian on L^k (x) A over the torus.

Sections are stored as flat vectors with index ``site * r + l``. Forward covariant differences
read D_j u(x) = (U_j(x) u(x + e_j) - u(x)) / a, and the product of the four links around a
positively oriented plaquette equals exp(-i Phi_p) with Phi_p = k int_p omega.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple
import logging

import numpy as np
import scipy.io
import scipy.sparse as sp

from landaulab.errors import ErrorCodes
from landaulab.geometry import GeometryField, PointFrame
from landaulab.model_spectrum import OscillatorBasis
from landaulab.utils import periodic_offset, site_offsets, smooth_bump

lattice_logger = logging.getLogger("landaulab.lattice")

TWO_PI = 2.0 * np.pi
FLUX_TOLERANCE: float = 1e-6
HERMITICITY_TOLERANCE: float = 1e-12
SECTION_FORMAT_VERSION: int = 1


@dataclass
class GaugeLattice:
    """
    U(1) link variables of L^k on the periodic grid

    ``phases[j]`` holds the angles theta_j(x) with U_j(x) = exp(i theta_j(x)), shape (N,)*2n.
    ``flux[b]`` holds the plaquette fluxes k int_p omega of the (x_b, y_b) plane, shape (N, N).
    """

    k: int
    grid: int
    half_dim: int
    phases: np.ndarray
    flux: Tuple[np.ndarray, ...]
    degrees: Tuple[int, ...]

    @property
    def dim(self) -> int:
        return 2 * self.half_dim

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.grid,) * self.dim

    @property
    def links(self) -> np.ndarray:
        return np.exp(1j * self.phases)

    def link(self, axis: int, site: Tuple[int, ...]) -> complex:
        index = tuple(int(c) % self.grid for c in site)
        return complex(np.exp(1j * self.phases[axis][index]))

    def winding(self, block: int = 0) -> float:
        """Total flux of the (x_b, y_b) plane divided by 2 pi"""
        return float(self.flux[block].sum() / TWO_PI)


def _landau_block(flux: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Link angles of one T^2 plane for the plaquette fluxes ``flux[i, j]`` (i along x)

    y-links accumulate the fluxes to their left in each row; the winding is absorbed by the
    x-links of the last column.
    """
    grid = flux.shape[0]
    theta_y = np.zeros_like(flux)
    theta_y[1:, :] = -np.cumsum(flux, axis=0)[:-1, :]
    theta_x = np.zeros_like(flux)
    row_totals = flux.sum(axis=0)
    theta_x[grid - 1, 1:] = np.cumsum(row_totals)[:-1]
    return theta_x, theta_y


def _broadcast_block(values: np.ndarray, block: int, dim: int) -> np.ndarray:
    shape = [1] * dim
    shape[2 * block] = values.shape[0]
    shape[2 * block + 1] = values.shape[1]
    return values.reshape(shape)


def _assemble_gauge(geom: GeometryField, k: int, transposed: bool) -> GaugeLattice:
    if k < 0:
        raise ErrorCodes()("USAGE", f"tensor power must be non-negative, got {k}")
    phases = np.zeros((geom.dim,) + geom.shape)
    fluxes = []
    for block in range(geom.half_dim):
        flux = k * geom.plaquette_flux(block)
        winding = flux.sum() / TWO_PI
        expected = k * geom.degrees[block]
        if abs(winding - expected) > FLUX_TOLERANCE:
            raise ErrorCodes()("FLUX_MISMATCH", f"winding {winding:.9f} against k d = {expected}")
        if transposed:
            first, second = _landau_block(-flux.T)
            theta_x, theta_y = second.T, first.T
        else:
            theta_x, theta_y = _landau_block(flux)
        phases[2 * block] = np.broadcast_to(_broadcast_block(theta_x, block, geom.dim), geom.shape)
        phases[2 * block + 1] = np.broadcast_to(_broadcast_block(theta_y, block, geom.dim), geom.shape)
        fluxes.append(flux)
    return GaugeLattice(
        k=k, grid=geom.grid, half_dim=geom.half_dim, phases=phases, flux=tuple(fluxes), degrees=geom.degrees
    )


def build_gauge(geom: GeometryField, k: int) -> GaugeLattice:
    """
    Discrete Landau gauge with exact plaquette fluxes

    :param geom: Valid geometry
    :type geom: GeometryField
    :param k: Tensor power
    :type k: int
    :raises FluxMismatch: If the total flux differs from 2 pi k d by more than 1e-6 (in units of 2 pi)
    :return: Link variables
    :rtype: GaugeLattice
    """
    gauge = _assemble_gauge(geom, k, transposed=False)
    lattice_logger.debug(f"Landau gauge for k={k}, windings {[gauge.winding(b) for b in range(geom.half_dim)]}")
    return gauge


def alternate_gauge(geom: GeometryField, k: int) -> GaugeLattice:
    """Landau gauge accumulated along the other axis of every plane; same fluxes, different links"""
    return _assemble_gauge(geom, k, transposed=True)


def gauge_transform(gauge: GaugeLattice, chi: np.ndarray) -> GaugeLattice:
    """
    Apply U_j(x) -> exp(i chi(x)) U_j(x) exp(-i chi(x + e_j))

    :param gauge: Link variables
    :type gauge: GaugeLattice
    :param chi: Real gauge function of shape (N,)*2n
    :type chi: np.ndarray
    :return: Transformed link variables, identical fluxes
    :rtype: GaugeLattice
    """
    chi = np.asarray(chi, dtype=float).reshape(gauge.shape)
    phases = np.stack(
        [gauge.phases[axis] + chi - np.roll(chi, -1, axis=axis) for axis in range(gauge.dim)]
    )
    return GaugeLattice(
        k=gauge.k, grid=gauge.grid, half_dim=gauge.half_dim, phases=phases, flux=gauge.flux, degrees=gauge.degrees
    )


def loop_phase(gauge: GaugeLattice, x: Sequence[int], axes: Tuple[int, int] = (0, 1)) -> complex:
    """Product of the four links around the elementary plaquette at ``x`` in the plane ``axes``"""
    i, j = axes
    x = np.asarray(x, dtype=int)
    ei = np.eye(gauge.dim, dtype=int)[i]
    ej = np.eye(gauge.dim, dtype=int)[j]
    return (
        gauge.link(i, tuple(x))
        * gauge.link(j, tuple(x + ei))
        * np.conj(gauge.link(i, tuple(x + ej)))
        * np.conj(gauge.link(j, tuple(x)))
    )


@dataclass
class Perturbation:
    """
    Lower order terms: real first order coefficients ``first_order`` of shape (2n, sites) entering
    as the weighted Hermitian part of i a_j D_j, and a Hermitian zeroth order field
    ``zeroth_order`` of shape (sites, r, r). Neither is multiplied by k.
    """

    first_order: Optional[np.ndarray] = None
    zeroth_order: Optional[np.ndarray] = None


@dataclass
class SparseHermitian:
    """
    The operator H = R^{-1} K in CSR form, self-adjoint for <u, v> = sum_x v(x)^* u(x) w(x)

    ``weights`` holds w = rho_L a^{2n} repeated r times per site.
    """

    matrix: sp.csr_matrix
    weights: np.ndarray
    k: int
    grid: int
    half_dim: int
    rank: int
    metadata: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def symmetric(self) -> sp.csr_matrix:
        """R^{1/2} H R^{-1/2}, Hermitian in the Euclidean product"""
        root = np.sqrt(self.weights)
        return sp.csr_matrix(sp.diags(root) @ self.matrix @ sp.diags(1.0 / root))

    def inner(self, u: np.ndarray, v: np.ndarray) -> complex:
        return complex(np.sum(np.conj(v) * u * self.weights))

    def norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(np.sum(np.abs(u) ** 2 * self.weights)))

    def hermiticity_defect(self) -> float:
        symmetric = self.symmetric()
        defect = symmetric - symmetric.getH()
        return float(np.max(np.abs(defect.data))) if defect.nnz else 0.0

    def shifted(self, constant: float) -> "SparseHermitian":
        """H + c k Id, so the eigenvalues of k^{-1} H move by c (by c itself when k = 0)"""
        factor = self.k if self.k > 0 else 1
        shift = sp.identity(self.dimension, dtype=complex, format="csr") * (constant * factor)
        return SparseHermitian(
            matrix=sp.csr_matrix(self.matrix + shift),
            weights=self.weights,
            k=self.k,
            grid=self.grid,
            half_dim=self.half_dim,
            rank=self.rank,
            metadata=dict(self.metadata),
        )


@dataclass
class LatticeSection:
    """Values of a section of L^k (x) A, shape (sites, r)"""

    values: np.ndarray
    k: int

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    @classmethod
    def from_flat(cls, vector: np.ndarray, rank: int, k: int) -> "LatticeSection":
        return cls(values=np.asarray(vector, dtype=complex).reshape(-1, rank), k=k)

    def norm(self, weights: np.ndarray) -> float:
        return float(np.sqrt(np.sum(np.abs(self.flat) ** 2 * weights)))


def _shift_matrix(gauge: GaugeLattice, axis: int) -> sp.csr_matrix:
    sites = gauge.grid**gauge.dim
    multi = np.indices(gauge.shape).reshape(gauge.dim, -1)
    neighbour = multi.copy()
    neighbour[axis] = (neighbour[axis] + 1) % gauge.grid
    rows = np.arange(sites)
    columns = np.ravel_multi_index(tuple(neighbour), gauge.shape)
    return sp.csr_matrix((gauge.links[axis].ravel(), (rows, columns)), shape=(sites, sites))


def _difference_operators(gauge: GaugeLattice, rank: int, spacing: float) -> List[sp.csr_matrix]:
    sites = gauge.grid**gauge.dim
    identity = sp.identity(sites, dtype=complex, format="csr")
    auxiliary = sp.identity(rank, dtype=complex, format="csr")
    return [
        sp.csr_matrix(sp.kron((_shift_matrix(gauge, axis) - identity) / spacing, auxiliary))
        for axis in range(gauge.dim)
    ]


def _block_diagonal(blocks: np.ndarray) -> sp.csr_matrix:
    return sp.csr_matrix(sp.block_diag(list(blocks), format="csr"))


def assemble_laplacian(
    gauge: GaugeLattice, geom: GeometryField, perturbation: Optional[Perturbation] = None
) -> SparseHermitian:
    """
    Weighted discretization of 1/2 nabla^* nabla + k V (+ lower order terms)

    The stiffness form is K = 1/2 sum_ij D_i^* W_ij D_j + k R V with diagonal metric weights
    g^{jj} rho_L a^{2n} averaged over the two ends of each link and off-diagonal weights taken at
    the sites. The returned operator is H = R^{-1} K with R = diag(rho_L a^{2n}) (x) Id_r.

    :param gauge: Link variables, carries k
    :type gauge: GaugeLattice
    :param geom: Geometry the gauge was built on
    :type geom: GeometryField
    :param perturbation: Optional lower order terms, defaults to None
    :type perturbation: Optional[Perturbation], optional
    :raises NonHermitianAssembly: If the symmetrized matrix fails the Hermiticity check
    :return: Assembled operator
    :rtype: SparseHermitian
    """
    if gauge.grid != geom.grid or gauge.half_dim != geom.half_dim:
        raise ErrorCodes()("DIMENSION_MISMATCH", "gauge and geometry grids differ")
    k, rank, dim = gauge.k, geom.rank, geom.dim
    site_weights = geom.liouville * geom.cell_volume
    inverse_metric = np.linalg.inv(geom.metric)
    differences = _difference_operators(gauge, rank, geom.spacing)

    stiffness = sp.csr_matrix((geom.sites * rank, geom.sites * rank), dtype=complex)
    for i in range(dim):
        values = (inverse_metric[:, i, i] * site_weights).reshape(geom.shape)
        midpoint = 0.5 * (values + np.roll(values, -1, axis=i))
        weight = sp.diags(np.repeat(midpoint.ravel(), rank))
        stiffness = stiffness + 0.5 * differences[i].getH() @ weight @ differences[i]
        for j in range(i + 1, dim):
            cross = inverse_metric[:, i, j] * site_weights
            if np.max(np.abs(cross)) == 0:
                continue
            weight = sp.diags(np.repeat(cross, rank))
            term = differences[i].getH() @ weight @ differences[j]
            stiffness = stiffness + 0.5 * (term + term.getH())

    weights = np.repeat(site_weights, rank)
    mass = sp.diags(weights)
    if k != 0:
        stiffness = stiffness + k * mass @ _block_diagonal(geom.potential)

    if perturbation is not None:
        if perturbation.first_order is not None:
            for axis in range(dim):
                coefficient = np.repeat(np.asarray(perturbation.first_order[axis], dtype=float), rank)
                if not np.any(coefficient):
                    continue
                drift = 1j * sp.diags(coefficient) @ differences[axis]
                stiffness = stiffness + 0.5 * (mass @ drift + drift.getH() @ mass)
        if perturbation.zeroth_order is not None:
            stiffness = stiffness + mass @ _block_diagonal(perturbation.zeroth_order)

    stiffness = sp.csr_matrix(stiffness)
    root = np.sqrt(weights)
    symmetric = sp.diags(1.0 / root) @ stiffness @ sp.diags(1.0 / root)
    defect = symmetric - symmetric.getH()
    scale = max(1.0, float(np.max(np.abs(symmetric.data)))) if symmetric.nnz else 1.0
    if defect.nnz and np.max(np.abs(defect.data)) > HERMITICITY_TOLERANCE * scale:
        raise ErrorCodes()("NON_HERMITIAN_ASSEMBLY", f"defect {np.max(np.abs(defect.data)):.3e}")

    operator = SparseHermitian(
        matrix=sp.csr_matrix(sp.diags(1.0 / weights) @ stiffness),
        weights=weights,
        k=k,
        grid=geom.grid,
        half_dim=geom.half_dim,
        rank=rank,
        metadata={"perturbed": perturbation is not None},
    )
    lattice_logger.debug(f"Assembled operator of dimension {operator.dimension}, nnz {operator.matrix.nnz}")
    return operator


def matvec(H: SparseHermitian, v: LatticeSection) -> LatticeSection:
    """
    y = H v

    :raises DimensionMismatch: If the section does not live on the operator's grid
    """
    if v.flat.shape[0] != H.dimension:
        raise ErrorCodes()("DIMENSION_MISMATCH", f"operator {H.dimension}, section {v.flat.shape[0]}")
    return LatticeSection.from_flat(H.matrix @ v.flat, H.rank, v.k)


def _staircase_product(gauge: GaugeLattice, start: Sequence[int], steps: Sequence[int]) -> complex:
    cursor = np.array(start, dtype=int)
    product = 1.0 + 0.0j
    for axis, count in enumerate(steps):
        for _ in range(abs(int(count))):
            if count > 0:
                product *= gauge.link(axis, tuple(cursor))
                cursor[axis] += 1
            else:
                cursor[axis] -= 1
                product *= np.conj(gauge.link(axis, tuple(cursor)))
    return product


def _straightening_phase(geom: GeometryField, k: int, y: Sequence[int], steps: np.ndarray) -> float:
    xi = steps * geom.spacing
    midpoint = (np.asarray(y, dtype=float) * geom.spacing + 0.5 * xi)[None, :]
    form = geom.form_at(midpoint)[0]
    return float(0.5 * k * np.sum(np.triu(form, 1) * np.outer(xi, xi)))


def transport_frame(
    gauge: GaugeLattice,
    y: Sequence[int],
    x: Sequence[int],
    geom: Optional[GeometryField] = None,
    straighten: bool = False,
) -> complex:
    """
    Parallel frame F_y(x) of L^k at x, normalized to 1 at y

    The frame is the conjugate link product along the axis ordered staircase path from y to
    the shortest periodic representative of x. With ``straighten`` the phase enclosed between
    the staircase and the straight segment is removed using omega at the segment midpoint.

    :param gauge: Link variables
    :type gauge: GaugeLattice
    :param y: Base site
    :type y: Sequence[int]
    :param x: Target site
    :type x: Sequence[int]
    :param geom: Geometry, required when ``straighten`` is set, defaults to None
    :type geom: Optional[GeometryField], optional
    :param straighten: Correct to the straight segment, defaults to False
    :type straighten: bool, optional
    :return: Unimodular phase
    :rtype: complex
    """
    steps = site_offsets(x, y, gauge.grid)
    frame = np.conj(_staircase_product(gauge, y, steps))
    if straighten:
        if geom is None:
            raise ErrorCodes()("USAGE", "straightened transport needs the geometry")
        frame *= np.exp(-1j * _straightening_phase(geom, gauge.k, y, steps))
    return complex(frame)


def transport_field(gauge: GaugeLattice, y: Sequence[int], geom: Optional[GeometryField] = None) -> np.ndarray:
    """
    The frame F_y at every site at once, shape (sites,)

    Link angles are accumulated axis by axis along the same staircase paths as
    :func:`transport_frame`; passing ``geom`` applies the straightening phase.
    """
    dim, grid = gauge.dim, gauge.grid
    y = np.asarray(y, dtype=int) % grid
    offsets = periodic_offset(np.arange(grid), grid)
    angle = np.zeros(())
    for axis in range(dim):
        theta = gauge.phases[axis][tuple(slice(None) if a <= axis else int(y[a]) for a in range(dim))]
        rolled = np.roll(theta, -int(y[axis]), axis=axis)
        forward = np.cumsum(rolled, axis=axis) - rolled
        backward = -np.cumsum(np.flip(rolled, axis=axis), axis=axis)
        ahead = offsets >= 0
        segment = np.where(
            ahead,
            np.take(forward, np.clip(offsets, 0, None), axis=axis),
            np.take(backward, np.clip(-offsets - 1, 0, None), axis=axis),
        )
        angle = angle[..., None] + np.roll(segment, int(y[axis]), axis=axis)
    frame = np.exp(-1j * angle).ravel()
    if geom is not None:
        multi = np.indices(gauge.shape).reshape(dim, -1).T
        xi = periodic_offset(multi - y[None, :], grid) * geom.spacing
        form = geom.form_at(y[None, :] * geom.spacing + 0.5 * xi)
        phase = 0.5 * gauge.k * np.einsum("sij,ij,si,sj->s", form, np.triu(np.ones((dim, dim)), 1), xi, xi)
        frame = frame * np.exp(-1j * phase)
    return frame


def _norm_matrix(frame: PointFrame) -> np.ndarray:
    """Gram matrix Q of the y-norm, |xi|_y^2 = xi^T Q xi"""
    dim = 2 * frame.half_dim
    basis = np.eye(dim)
    diagonal = frame.norm_sq(basis)
    pairs = frame.norm_sq(basis[:, None, :] + basis[None, :, :])
    return 0.5 * (pairs - diagonal[:, None] - diagonal[None, :])


def largest_cutoff(frame: PointFrame) -> float:
    """Largest y-norm radius whose ball fits inside half a period along every axis"""
    extent = np.sqrt(np.diag(np.linalg.inv(_norm_matrix(frame))))
    return float(0.5 / np.max(extent))


def polynomial_values(coefficients: np.ndarray, cap: int, z: np.ndarray, rank: int) -> np.ndarray:
    """
    Values of sum c_{alpha l} conj(z)^alpha / sqrt(alpha!) e_l at complex points z of shape (..., n)

    :return: Array of shape (..., r)
    """
    basis = OscillatorBasis(z.shape[-1], cap)
    coefficients = np.asarray(coefficients, dtype=complex).reshape(len(basis), rank)
    powers = np.array(basis.multi_indices).reshape(len(basis), basis.half_dim)
    norms = np.sqrt([basis.factorial(alpha) for alpha in basis.multi_indices])
    monomials = np.prod(np.conj(z)[..., None, :] ** powers, axis=-1) / norms
    return monomials @ coefficients


def peaked_section(
    gauge: GaugeLattice,
    geom: GeometryField,
    frame: PointFrame,
    coefficients: np.ndarray,
    cap: int,
    cutoff: Optional[float] = None,
) -> LatticeSection:
    """
    Gaussian quasimode k^{n/2} F_y(x) exp(-k |xi|_y^2 / 4) f(sqrt(k) xi) psi(xi) around the
    frame's base site

    ``coefficients`` lists f in the normalized monomials conj(z)^alpha / sqrt(alpha!) (x) e_l,
    flat index ``idx(alpha) * r + l`` of :class:`OscillatorBasis` with degree cap ``cap``. The
    bump psi equals one up to half the cutoff, measured in the y-norm.

    :param gauge: Link variables, carries k
    :type gauge: GaugeLattice
    :param geom: Geometry
    :type geom: GeometryField
    :param frame: Frame at a grid site
    :type frame: PointFrame
    :param coefficients: Polynomial coefficients
    :type coefficients: np.ndarray
    :param cap: Degree cap of the coefficient layout
    :type cap: int
    :param cutoff: Support radius, defaults to the largest one fitting in the torus
    :type cutoff: Optional[float], optional
    :raises CutoffTooSmall: If the cutoff is below 5 k^{-1/2}
    :raises SectionWrapsTorus: If the support does not fit inside half a period
    :return: Section of L^k (x) A
    :rtype: LatticeSection
    """
    k = gauge.k
    if frame.site is None:
        raise ErrorCodes()("USAGE", "peaked sections need a frame at a grid site")
    if k < 1:
        raise ErrorCodes()("USAGE", "peaked sections need k >= 1")
    fitting = largest_cutoff(frame)
    cutoff = 0.98 * fitting if cutoff is None else float(cutoff)
    if cutoff < 5.0 / np.sqrt(k):
        raise ErrorCodes()("CUTOFF_TOO_SMALL", f"cutoff {cutoff:.4f} below {5.0 / np.sqrt(k):.4f}")
    if cutoff > fitting:
        raise ErrorCodes()("SECTION_WRAPS_TORUS", f"cutoff {cutoff:.4f} above {fitting:.4f}")

    y = np.array(geom.site_multi_index(frame.site))
    multi = np.indices(geom.shape).reshape(geom.dim, -1).T
    xi = periodic_offset(multi - y[None, :], geom.grid) * geom.spacing
    norm_sq = frame.norm_sq(xi)
    z = frame.complex_coordinates(np.sqrt(k) * xi)
    profile = (
        k ** (0.5 * geom.half_dim)
        * np.exp(-0.25 * k * norm_sq)
        * smooth_bump(np.sqrt(norm_sq), cutoff)
        * transport_field(gauge, y, geom)
    )
    values = profile[:, None] * polynomial_values(coefficients, cap, z, geom.rank)
    return LatticeSection(values=values, k=k)


def save_npz(H: SparseHermitian, path: Path) -> None:
    """Write the CSR arrays, the weights and the header fields to a compressed ``.npz`` file"""
    matrix = sp.csr_matrix(H.matrix)
    np.savez_compressed(
        path,
        data=matrix.data,
        indices=matrix.indices,
        indptr=matrix.indptr,
        shape=np.array(matrix.shape),
        weights=H.weights,
        header=np.array([H.k, H.grid, H.half_dim, H.rank, SECTION_FORMAT_VERSION]),
    )


def load_npz(path: Path) -> SparseHermitian:
    with np.load(path) as payload:
        k, grid, half_dim, rank, _ = (int(v) for v in payload["header"])
        matrix = sp.csr_matrix(
            (payload["data"], payload["indices"], payload["indptr"]), shape=tuple(payload["shape"])
        )
        return SparseHermitian(
            matrix=matrix, weights=payload["weights"], k=k, grid=grid, half_dim=half_dim, rank=rank
        )


def write_matrix_market(H: SparseHermitian, path: Path) -> None:
    """Matrix-Market dump of the Hermitian form R^{1/2} H R^{-1/2}"""
    scipy.io.mmwrite(
        str(path),
        H.symmetric(),
        comment=f"landaulab k={H.k} grid={H.grid} half_dim={H.half_dim} rank={H.rank}",
        field="complex",
        symmetry="hermitian",
    )
