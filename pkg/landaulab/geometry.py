"""
Torus geometry (metric g, symplectic form omega, potential V) sampled on a periodic grid and the
pointwise linear algebra derived from it: the endomorphism j_B, the magnetic frequencies B_i,
an h-orthonormal frame of T^{1,0} and the eigen-decomposition of V.

Coordinates on T^{2n} = [0, 1)^{2n} are ordered (x1, y1, x2, y2). Matrices act on column
vectors, ``form[i, j] = omega(e_i, e_j)``.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple, Union
import logging

import numpy as np

from landaulab.errors import ErrorCodes
from landaulab.utils import canonical_subspace_basis, split_degenerate

geometry_logger = logging.getLogger("landaulab.geometry")

TWO_PI = 2.0 * np.pi
FREQUENCY_FLOOR: float = 1e-8
DEGENERACY_THRESHOLD: float = 1e-8
FLUX_SNAP_TOLERANCE: float = 1e-6
FORM_THRESHOLD: float = 1e-10
GAUSS_NODES = np.array([-0.5 / np.sqrt(3.0), 0.5 / np.sqrt(3.0)])

ScalarField = Callable[[np.ndarray], np.ndarray]


def _as_field(value: Union[float, ScalarField]) -> ScalarField:
    if callable(value):
        return value
    constant = float(value)
    return lambda points: np.full(np.shape(points)[:-1], constant)


class TensorField:
    """
    Matrix valued field on the torus assembled from scalar component fields.

    :param size: Matrix size
    :type size: int
    :param kind: One of ``"symmetric"``, ``"antisymmetric"`` or ``"hermitian"``
    :type kind: str
    :param components: Real parts of the entries with ``i <= j`` (``i < j`` for two-forms)
    :type components: Dict[Tuple[int, int], Union[float, ScalarField]]
    :param imaginary: Imaginary parts of Hermitian entries with ``i < j``, defaults to None
    :type imaginary: Optional[Dict[Tuple[int, int], Union[float, ScalarField]]], optional
    """

    def __init__(
        self,
        size: int,
        kind: str,
        components: Dict[Tuple[int, int], Union[float, ScalarField]],
        imaginary: Optional[Dict[Tuple[int, int], Union[float, ScalarField]]] = None,
    ) -> None:
        if kind not in ("symmetric", "antisymmetric", "hermitian"):
            raise ErrorCodes()("USAGE", f"unknown tensor kind '{kind}'")
        for i, j in components:
            if not (0 <= i < size and 0 <= j < size) or i > j or (kind == "antisymmetric" and i == j):
                raise ErrorCodes()("USAGE", f"component ({i}, {j}) not allowed for a {kind} {size}x{size} field")
        self.size: int = size
        self.kind: str = kind
        self.components: Dict[Tuple[int, int], ScalarField] = {
            key: _as_field(value) for key, value in components.items()
        }
        self.imaginary: Dict[Tuple[int, int], ScalarField] = {
            key: _as_field(value) for key, value in (imaginary or {}).items()
        }

    @classmethod
    def identity(cls, size: int) -> "TensorField":
        return cls(size, "symmetric", {(i, i): 1.0 for i in range(size)})

    @classmethod
    def zeros(cls, size: int) -> "TensorField":
        return cls(size, "hermitian", {})

    @classmethod
    def two_form(cls, components: Dict[Tuple[int, int], Union[float, ScalarField]], size: int = 2) -> "TensorField":
        return cls(size, "antisymmetric", components)

    def component(self, i: int, j: int) -> Optional[ScalarField]:
        return self.components.get((i, j))

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        dtype = complex if self.kind == "hermitian" else float
        values = np.zeros(points.shape[:-1] + (self.size, self.size), dtype=dtype)
        for (i, j), fn in self.components.items():
            sample = fn(points)
            values[..., i, j] += sample
            if i != j:
                values[..., j, i] += -sample if self.kind == "antisymmetric" else sample
        for (i, j), fn in self.imaginary.items():
            sample = fn(points)
            values[..., i, j] += 1j * sample
            values[..., j, i] -= 1j * sample
        return values


@dataclass(frozen=True)
class TorusConfig:
    """
    Field specification of a flat torus geometry

    ``degrees`` optionally declares the integer flux per 2-cycle (x_j, y_j); when omitted the
    nearest integer of the computed flux is used.
    """

    half_dim: int
    grid: int
    form: TensorField
    metric: Optional[TensorField] = None
    potential: Optional[TensorField] = None
    rank: int = 1
    degrees: Optional[Tuple[int, ...]] = None

    @property
    def dim(self) -> int:
        return 2 * self.half_dim


@dataclass
class GeometryField:
    """Validated grid samples of g, omega and V together with degrees and the Liouville density"""

    config: TorusConfig
    points: np.ndarray
    metric: np.ndarray
    form: np.ndarray
    potential: np.ndarray
    degrees: Tuple[int, ...]
    flux_scale: Tuple[float, ...]
    liouville: np.ndarray

    @property
    def half_dim(self) -> int:
        return self.config.half_dim

    @property
    def dim(self) -> int:
        return 2 * self.config.half_dim

    @property
    def grid(self) -> int:
        return self.config.grid

    @property
    def spacing(self) -> float:
        return 1.0 / self.config.grid

    @property
    def rank(self) -> int:
        return self.config.rank

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.grid,) * self.dim

    @property
    def sites(self) -> int:
        return self.grid**self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    def site_index(self, site: Union[int, Tuple[int, ...]]) -> int:
        if isinstance(site, (int, np.integer)):
            return int(site)
        return int(np.ravel_multi_index(tuple(int(c) % self.grid for c in site), self.shape))

    def site_multi_index(self, site: Union[int, Tuple[int, ...]]) -> Tuple[int, ...]:
        return tuple(int(c) for c in np.unravel_index(self.site_index(site), self.shape))

    def form_at(self, points: np.ndarray) -> np.ndarray:
        """Two-form at arbitrary points, including the flux normalization applied at build time"""
        values = self.config.form(points)
        for block, scale in enumerate(self.flux_scale):
            values[..., 2 * block, 2 * block + 1] *= scale
            values[..., 2 * block + 1, 2 * block] *= scale
        return values

    def plaquette_flux(self, block: int = 0) -> np.ndarray:
        """
        Integral of omega over every elementary cell of the (x_block, y_block) plane.

        The integral uses the tensor 2-point Gauss rule per axis. The remaining coordinates are
        fixed at zero, which is exact for block separable forms.

        :param block: Index of the 2-cycle, defaults to 0
        :type block: int, optional
        :return: Array of shape (N, N), cell fluxes indexed by their lower corner
        :rtype: np.ndarray
        """
        return _block_flux(self.config.form, self.config, block) * self.flux_scale[block]


def _block_flux(form: TensorField, config: TorusConfig, block: int) -> np.ndarray:
    grid = config.grid
    spacing = 1.0 / grid
    centers = (np.arange(grid) + 0.5) * spacing
    nodes = (centers[:, None] + GAUSS_NODES[None, :] * spacing).ravel()
    xs, ys = np.meshgrid(nodes, nodes, indexing="ij")
    points = np.zeros(xs.shape + (config.dim,))
    points[..., 2 * block] = xs
    points[..., 2 * block + 1] = ys
    component = form.component(2 * block, 2 * block + 1)
    if component is None:
        return np.zeros((grid, grid))
    values = component(points).reshape(grid, 2, grid, 2)
    return values.mean(axis=(1, 3)) * spacing**2


def _pfaffian(form: np.ndarray) -> np.ndarray:
    if form.shape[-1] == 2:
        return form[..., 0, 1]
    return (
        form[..., 0, 1] * form[..., 2, 3]
        - form[..., 0, 2] * form[..., 1, 3]
        + form[..., 0, 3] * form[..., 1, 2]
    )


def _check_block_separable(config: TorusConfig, samples: np.ndarray) -> None:
    shape = (config.grid,) * config.dim
    for i in range(config.dim):
        for j in range(i + 1, config.dim):
            in_block = i % 2 == 0 and j == i + 1
            values = samples[:, i, j].reshape(shape)
            if not in_block:
                if np.max(np.abs(values)) > 1e-12:
                    raise ErrorCodes()("UNSUPPORTED_FIELD", f"mixed component omega[{i},{j}] must vanish on T^4")
                continue
            others = tuple(axis for axis in range(config.dim) if axis not in (i, j))
            reference = values
            for axis in others:
                reference = np.take(reference, [0], axis=axis)
            if not np.allclose(values, np.broadcast_to(reference, shape), atol=1e-12):
                raise ErrorCodes()(
                    "UNSUPPORTED_FIELD", f"omega[{i},{j}] must depend on coordinates {i} and {j} only"
                )


def build_geometry(config: TorusConfig) -> GeometryField:
    """
    Sample and validate a torus geometry.

    The flux per 2-cycle is snapped to the nearest integer by a uniform rescaling of the
    corresponding block of omega when it lies within 1e-6 relative of that integer.

    :param config: Field specification
    :type config: TorusConfig
    :raises NonPositiveMetric: If g is not symmetric positive definite at some site
    :raises NonSymplectic: If omega is degenerate or negatively oriented at some site
    :raises NonIntegralFlux: If a flux is not a positive integer multiple of 2 pi
    :raises UnsupportedField: If a T^4 two-form is not block separable
    :return: Validated geometry
    :rtype: GeometryField
    """
    if config.half_dim not in (1, 2):
        raise ErrorCodes()("USAGE", f"half dimension must be 1 or 2, got {config.half_dim}")
    if config.grid < 2:
        raise ErrorCodes()("USAGE", f"grid resolution must be at least 2, got {config.grid}")
    if config.rank < 1:
        raise ErrorCodes()("USAGE", f"auxiliary rank must be positive, got {config.rank}")

    dim = config.dim
    axes = np.meshgrid(*([np.arange(config.grid) / config.grid] * dim), indexing="ij")
    points = np.stack([axis.ravel() for axis in axes], axis=-1)

    metric_field = config.metric or TensorField.identity(dim)
    metric = np.asarray(metric_field(points), dtype=float)
    if metric.shape[-1] != dim:
        raise ErrorCodes()("USAGE", f"metric must be {dim}x{dim}")
    if np.max(np.abs(metric - np.swapaxes(metric, -1, -2))) > 1e-12:
        raise ErrorCodes()("NON_POSITIVE_METRIC", "metric is not symmetric")
    smallest = np.linalg.eigvalsh(metric)[:, 0]
    if np.min(smallest) <= 0:
        worst = int(np.argmin(smallest))
        raise ErrorCodes()("NON_POSITIVE_METRIC", f"eigenvalue {smallest[worst]:.3e} at site {worst}")

    if config.form.size != dim:
        raise ErrorCodes()("USAGE", f"two-form must be {dim}x{dim}")
    raw_form = np.asarray(config.form(points), dtype=float)
    if config.half_dim == 2:
        _check_block_separable(config, raw_form)

    degrees = []
    scales = []
    for block in range(config.half_dim):
        flux = _block_flux(config.form, config, block).sum() / TWO_PI
        degree = int(np.rint(flux))
        if abs(flux - degree) > FLUX_SNAP_TOLERANCE * max(1.0, abs(flux)):
            raise ErrorCodes()("NON_INTEGRAL_FLUX", f"flux {flux:.8f} x 2 pi on 2-cycle {block}")
        if degree <= 0:
            raise ErrorCodes()("NON_INTEGRAL_FLUX", f"degree {degree} on 2-cycle {block} is not positive")
        if config.degrees is not None and config.degrees[block] != degree:
            raise ErrorCodes()(
                "NON_INTEGRAL_FLUX", f"declared degree {config.degrees[block]} but flux gives {degree}"
            )
        degrees.append(degree)
        scales.append(degree / flux)
    geometry_logger.debug(f"Degrees {degrees}, flux normalization factors {scales}")

    form = raw_form.copy()
    for block, scale in enumerate(scales):
        form[:, 2 * block, 2 * block + 1] *= scale
        form[:, 2 * block + 1, 2 * block] *= scale
    liouville = _pfaffian(form)
    if np.min(liouville) <= FORM_THRESHOLD:
        worst = int(np.argmin(liouville))
        raise ErrorCodes()("NON_SYMPLECTIC", f"Liouville density {liouville[worst]:.3e} at site {worst}")

    potential_field = config.potential or TensorField.zeros(config.rank)
    if potential_field.size != config.rank:
        raise ErrorCodes()("USAGE", f"potential must be {config.rank}x{config.rank}")
    potential = np.asarray(potential_field(points), dtype=complex)

    return GeometryField(
        config=config,
        points=points,
        metric=metric,
        form=form,
        potential=potential,
        degrees=tuple(degrees),
        flux_scale=tuple(scales),
        liouville=liouville,
    )


def liouville_volume(geom: GeometryField) -> float:
    """
    Riemann sum of the Liouville density over the grid

    :param geom: Valid geometry
    :type geom: GeometryField
    :return: Total Liouville volume
    :rtype: float
    """
    return float(np.sum(geom.liouville) * geom.cell_volume)


@dataclass(frozen=True)
class PointFrame:
    """
    Pointwise linear data of the geometry at a base point y.

    ``frame`` holds the vectors u_i (columns) spanning T^{1,0}_y, h-orthonormal for
    h(u, v) = omega(u, conj(v)) / i.
    """

    point: np.ndarray
    metric: np.ndarray
    form: np.ndarray
    j_b: np.ndarray
    frequencies: np.ndarray
    frame: np.ndarray
    potential_values: np.ndarray
    potential_vectors: np.ndarray
    complex_structure: np.ndarray = field(repr=False)
    site: Optional[int] = None

    @property
    def half_dim(self) -> int:
        return len(self.frequencies)

    @property
    def rank(self) -> int:
        return len(self.potential_values)

    def complex_coordinates(self, xi: np.ndarray) -> np.ndarray:
        """Coordinates z with xi = sum_i z_i u_i + conj(z_i u_i)"""
        return -1j * (np.asarray(xi, dtype=float) @ self.form) @ self.frame.conj()

    def norm_sq(self, xi: np.ndarray) -> np.ndarray:
        """|xi|_y^2 = omega(xi, j xi) = 2 |z|^2"""
        return 2.0 * np.sum(np.abs(self.complex_coordinates(xi)) ** 2, axis=-1)

    def omega(self, xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
        return np.einsum("...i,ij,...j->...", np.asarray(xi, dtype=float), self.form, np.asarray(eta, dtype=float))


def _inverse_sqrt(metric: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    values, vectors = np.linalg.eigh(metric)
    inv_sqrt = (vectors * values[..., None, :] ** -0.5) @ np.swapaxes(vectors, -1, -2)
    sqrt = (vectors * values[..., None, :] ** 0.5) @ np.swapaxes(vectors, -1, -2)
    return inv_sqrt, sqrt


def _rotated_form(metric: np.ndarray, form: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    inv_sqrt, sqrt = _inverse_sqrt(metric)
    rotated = -inv_sqrt @ form @ inv_sqrt
    return rotated, inv_sqrt, sqrt


def frame_from_tensors(
    metric: np.ndarray,
    form: np.ndarray,
    potential: Optional[np.ndarray] = None,
    point: Optional[np.ndarray] = None,
    site: Optional[int] = None,
) -> PointFrame:
    """
    Pointwise frame from raw metric, two-form and potential matrices.

    The frequencies come from the Hermitian matrix i K with K = -G^{-1/2} Omega G^{-1/2}, whose
    eigenvalues are +-B_i. Eigenvectors w of eigenvalue -B_i give u_i = G^{-1/2} w / sqrt(B_i).
    Within clusters of equal B_i (and equal V eigenvalues) the basis is fixed by projecting the
    standard basis in index order.

    :param metric: Symmetric positive 2n x 2n matrix
    :type metric: np.ndarray
    :param form: Antisymmetric 2n x 2n matrix
    :type form: np.ndarray
    :param potential: Hermitian r x r matrix, defaults to the 1x1 zero matrix
    :type potential: Optional[np.ndarray], optional
    :param point: Coordinates of the base point, defaults to None
    :type point: Optional[np.ndarray], optional
    :param site: Flat grid index of the base point, defaults to None
    :type site: Optional[int], optional
    :raises DegenerateForm: If the smallest frequency is below 1e-8
    :return: Pointwise frame
    :rtype: PointFrame
    """
    metric = np.asarray(metric, dtype=float)
    form = np.asarray(form, dtype=float)
    half_dim = metric.shape[0] // 2
    rotated, inv_sqrt, _ = _rotated_form(metric, form)
    values, vectors = np.linalg.eigh(1j * rotated)

    frequencies = -values[:half_dim][::-1]
    if frequencies[0] < FREQUENCY_FLOOR:
        raise ErrorCodes()("DEGENERATE_FORM", f"B_1 = {frequencies[0]:.3e}")
    negative = vectors[:, :half_dim][:, ::-1]
    for start, stop in split_degenerate(frequencies, DEGENERACY_THRESHOLD):
        negative[:, start:stop] = canonical_subspace_basis(negative[:, start:stop])
    frame = (inv_sqrt @ negative) / np.sqrt(frequencies)[None, :]

    signs = np.sign(values)
    structure = np.real(inv_sqrt @ (-1j * (vectors * signs[None, :]) @ vectors.conj().T) @ np.linalg.inv(inv_sqrt))
    j_b = -np.linalg.solve(metric, form)

    potential = np.zeros((1, 1), dtype=complex) if potential is None else np.asarray(potential, dtype=complex)
    potential_values, potential_vectors = np.linalg.eigh(potential)
    for start, stop in split_degenerate(potential_values, DEGENERACY_THRESHOLD):
        potential_vectors[:, start:stop] = canonical_subspace_basis(potential_vectors[:, start:stop])

    return PointFrame(
        point=np.zeros(2 * half_dim) if point is None else np.asarray(point, dtype=float),
        metric=metric,
        form=form,
        j_b=j_b,
        frequencies=frequencies,
        frame=frame,
        potential_values=potential_values,
        potential_vectors=potential_vectors,
        complex_structure=structure,
        site=site,
    )


def frame_at(geom: GeometryField, y: Union[int, Tuple[int, ...]]) -> PointFrame:
    """
    Pointwise frame at a grid site

    :param geom: Valid geometry
    :type geom: GeometryField
    :param y: Flat site index or multi-index
    :type y: Union[int, Tuple[int, ...]]
    :return: Frame with ascending frequencies and V eigenvalues
    :rtype: PointFrame
    """
    index = geom.site_index(y)
    return frame_from_tensors(
        geom.metric[index], geom.form[index], geom.potential[index], point=geom.points[index], site=index
    )


def site_frequencies(geom: GeometryField) -> np.ndarray:
    """
    Magnetic frequencies at every site, shape (sites, n), ascending per site

    :param geom: Valid geometry
    :type geom: GeometryField
    :return: Frequencies
    :rtype: np.ndarray
    """
    rotated, _, _ = _rotated_form(geom.metric, geom.form)
    values = np.linalg.eigvalsh(1j * rotated)
    return -values[:, : geom.half_dim][:, ::-1]


def site_potential_values(geom: GeometryField) -> np.ndarray:
    """Eigenvalues of V at every site, shape (sites, r), ascending per site"""
    return np.linalg.eigvalsh(geom.potential)


def magnetic_length(geom: GeometryField, k: int) -> float:
    """(k max B)^{-1/2}, the smallest localization length of the tensor power k"""
    return float((k * np.max(site_frequencies(geom))) ** -0.5)
