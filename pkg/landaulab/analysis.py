"""
Comparison of computed spectra and eigenvectors with the model predictions: cluster counts,
distances to the envelope, Weyl laws, projector kernels, functional calculus and Garding bounds.

Kernel comparisons use moduli only, which do not depend on the gauge.
"""

from typing import Callable, List, Optional, Sequence, Tuple
import logging

import numpy as np

from landaulab.eigensolver import EigenSystem
from landaulab.errors import ErrorCodes
from landaulab.geometry import GeometryField, PointFrame, frame_at, site_frequencies
from landaulab.intervals import IntervalUnion
from landaulab.model_spectrum import sigma_y, site_levels, weyl_density
from landaulab.symbols import model_projector_kernel
from landaulab.types import (
    BoundsCheck,
    ClusterReport,
    ComponentRecord,
    FunctionalCalculusValue,
    GaussianFit,
    KernelSlice,
    LocalWeylValue,
    RRComparison,
    ScalingFit,
    WeylComparison,
)
from landaulab.utils import hermitian_part, periodic_offset

analysis_logger = logging.getLogger("landaulab.analysis")

VALUE_FLOOR: float = 1e-14
MEASURABLE_FLOOR: float = 1e-12
MIN_K_VALUES: int = 4
MIN_RADII: int = 6
GAUSSIAN_RANGE: float = 4.0
ENDPOINT_MARGIN: float = 1e-6


def cluster_tolerance(geom: GeometryField, k: int, envelope: IntervalUnion) -> float:
    """
    Attachment tolerance max(5 a^2 k max B, a^2 k (top^2 + max B^2) / 2, 3 k^{-1/2} mean width),
    at most 0.45 times the smallest gap

    The middle term bounds the lattice shift of a level at height ``top``, the largest envelope
    value; it is about twice the shift of the discrete Landau levels.

    :param geom: Geometry of the run
    :type geom: GeometryField
    :param k: Tensor power
    :type k: int
    :param envelope: Envelope below the cutoff
    :type envelope: IntervalUnion
    :return: Tolerance delta
    :rtype: float
    """
    widths = envelope.widths()
    width_scale = float(np.mean(widths)) if widths else 0.0
    top = envelope[len(envelope) - 1][1] if len(envelope) else 0.0
    max_frequency = float(np.max(site_frequencies(geom)))
    delta = max(
        5.0 * geom.spacing**2 * k * max_frequency,
        0.5 * geom.spacing**2 * k * (top**2 + max_frequency**2),
        3.0 * width_scale / np.sqrt(max(k, 1)),
    )
    return float(min(delta, 0.45 * envelope.min_gap()))


def _check_cutoff(es: EigenSystem, envelope: IntervalUnion, cutoff: float) -> None:
    if cutoff > es.cutoff:
        raise ErrorCodes()("ABOVE_CERTIFIED_CUTOFF", f"{cutoff} > {es.cutoff}")
    if envelope.contains(cutoff):
        raise ErrorCodes()("CUTOFF_INSIDE_SIGMA", f"{cutoff} in {envelope}")


def detect_clusters(
    es: EigenSystem,
    envelope: IntervalUnion,
    cutoff: float,
    tolerance: float,
    predicted: Optional[Sequence[int]] = None,
) -> ClusterReport:
    """
    Attach every eigenvalue at or below ``cutoff`` to the nearest envelope component within
    ``tolerance``; the rest are orphans

    :param es: Eigen-data
    :type es: EigenSystem
    :param envelope: Envelope
    :type envelope: IntervalUnion
    :param cutoff: Upper end of the analysed range, in a gap
    :type cutoff: float
    :param tolerance: Attachment tolerance
    :type tolerance: float
    :param predicted: Riemann-Roch counts per component, defaults to None
    :type predicted: Optional[Sequence[int]], optional
    :raises CutoffInsideSigma: If the cutoff lies in the envelope
    :raises AboveCertifiedCutoff: If the cutoff is above the certified range
    :return: Report
    :rtype: ClusterReport
    """
    _check_cutoff(es, envelope, cutoff)
    truncated = envelope.truncate(cutoff)
    attached: List[List[float]] = [[] for _ in truncated]
    orphans: List[float] = []
    for value in es.eigenvalues[es.eigenvalues <= cutoff]:
        component = truncated.component_index(float(value), tolerance)
        if component is None:
            orphans.append(float(value))
        else:
            attached[component].append(float(value))
    components = [
        ComponentRecord(
            interval=interval,
            count=len(values),
            lowest=min(values, default=None),
            highest=max(values, default=None),
            max_distance=float(np.max(IntervalUnion([interval]).distances(values))) if values else 0.0,
        )
        for interval, values in zip(truncated, attached)
    ]
    if orphans:
        analysis_logger.warning(f"k={es.k}: {len(orphans)} eigenvalues outside the envelope by more than {tolerance}")
    return ClusterReport(
        k=es.k,
        envelope=truncated.to_list(),
        cutoff=cutoff,
        tolerance=tolerance,
        components=components,
        orphans=orphans,
        predicted=None if predicted is None else [int(v) for v in predicted],
    )


def counting_vs_rr(report: ClusterReport, rr_values: Sequence[int]) -> List[RRComparison]:
    """
    Exact comparison of cluster counts with Riemann-Roch numbers, plus an empty-gap check for
    every gap between components

    :param report: Cluster report
    :type report: ClusterReport
    :param rr_values: Predicted count per component, in order
    :type rr_values: Sequence[int]
    :return: One row per component and per gap
    :rtype: List[RRComparison]
    """
    rows = [
        RRComparison(f"component {index}", component.count, int(predicted))
        for index, (component, predicted) in enumerate(zip(report.components, rr_values))
    ]
    envelope = IntervalUnion(tuple(interval) for interval in report.envelope)
    for index, (lo, hi) in enumerate(envelope.gaps()):
        inside = sum(1 for value in report.orphans if lo < value < hi)
        rows.append(RRComparison(f"gap {index}", inside, 0))
    return rows


def max_distance(es: EigenSystem, envelope: IntervalUnion, cutoff: float) -> float:
    """max over eigenvalues at or below ``cutoff`` of the distance to the envelope"""
    values = es.eigenvalues[es.eigenvalues <= cutoff]
    if not len(values):
        return 0.0
    return float(np.max(envelope.distances(values)))


def fit_power_law(ks: Sequence[int], values: Sequence[float]) -> ScalingFit:
    """
    Least squares fit of log10 value against log10 k

    :raises InsufficientKGrid: With fewer than four tensor powers
    """
    if len(ks) < MIN_K_VALUES or len(set(ks)) < MIN_K_VALUES:
        raise ErrorCodes()("INSUFFICIENT_K_GRID", f"got {len(set(ks))} distinct k values")
    x = np.log10(np.asarray(ks, dtype=float))
    y = np.log10(np.maximum(np.asarray(values, dtype=float), VALUE_FLOOR))
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return ScalingFit(
        ks=[int(k) for k in ks],
        values=[float(v) for v in values],
        slope=float(slope),
        intercept=float(intercept),
        residual=residual,
        measurable=bool(np.min(values) > MEASURABLE_FLOOR),
    )


def distance_scaling(
    systems: Sequence[EigenSystem], envelopes: Sequence[IntervalUnion], cutoff: float
) -> ScalingFit:
    """
    Fitted exponent of max dist(lambda, Sigma) against k over a family of runs

    :param systems: Eigen-data for at least four tensor powers
    :type systems: Sequence[EigenSystem]
    :param envelopes: Envelope of each run's geometry, in the order of ``systems``
    :type envelopes: Sequence[IntervalUnion]
    :param cutoff: Upper end of the analysed range
    :type cutoff: float
    :raises InsufficientKGrid: With fewer than four tensor powers
    :return: Fit
    :rtype: ScalingFit
    """
    return _scaling(systems, envelopes, cutoff, max_distance, "Distance")


def endpoint_defect(es: EigenSystem, envelope: IntervalUnion, cutoff: float) -> float:
    """
    max over complete envelope components [l, u] of |min lambda - l| and |u - max lambda|, the
    eigenvalues taken from the component's window. Zero when no component has eigenvalues.
    """
    components = list(envelope.truncate(cutoff))
    defect = 0.0
    for (lo, hi), (below, above) in zip(components, component_windows(envelope, cutoff)):
        if hi >= cutoff:
            continue
        attached = es.eigenvalues[(es.eigenvalues >= below) & (es.eigenvalues <= above)]
        if len(attached):
            defect = max(defect, abs(float(attached.min()) - lo), abs(hi - float(attached.max())))
    return defect


def endpoint_scaling(
    systems: Sequence[EigenSystem], envelopes: Sequence[IntervalUnion], cutoff: float
) -> ScalingFit:
    """
    Fitted exponent of :func:`endpoint_defect` against k. Measures how fast clusters fill their
    envelope components, which stays meaningful when every eigenvalue already lies in Sigma.

    :raises InsufficientKGrid: With fewer than four tensor powers
    """
    return _scaling(systems, envelopes, cutoff, endpoint_defect, "Endpoint defect")


def _scaling(
    systems: Sequence[EigenSystem],
    envelopes: Sequence[IntervalUnion],
    cutoff: float,
    measure: Callable[[EigenSystem, IntervalUnion, float], float],
    label: str,
) -> ScalingFit:
    if len(systems) != len(envelopes):
        raise ErrorCodes()("USAGE", f"{len(systems)} eigen-systems against {len(envelopes)} envelopes")
    ks = [es.k for es in systems]
    fit = fit_power_law(ks, [measure(es, envelope, cutoff) for es, envelope in zip(systems, envelopes)])
    analysis_logger.info(f"{label} exponent {fit.slope:.3f} (residual {fit.residual:.3f})")
    return fit


def global_weyl(es: EigenSystem, geom: GeometryField, lam: float, envelope: IntervalUnion) -> WeylComparison:
    """
    N(lambda, k) against (k / 2 pi)^n v(lambda)

    :raises LambdaOnSigma: If ``lam`` lies in the envelope
    """
    if envelope.contains(lam):
        raise ErrorCodes()("LAMBDA_ON_SIGMA", f"{lam} in {envelope}")
    if lam > es.cutoff:
        raise ErrorCodes()("ABOVE_CERTIFIED_CUTOFF", f"{lam} > {es.cutoff}")
    count = int(np.sum(es.eigenvalues <= lam))
    prediction = (es.k / (2 * np.pi)) ** geom.half_dim * weyl_density(geom, lam)
    comparison = WeylComparison(k=es.k, lam=lam, count=count, prediction=prediction)
    if not comparison.defined:
        analysis_logger.info(f"Weyl prediction vanishes at {lam}, ratio undefined")
    return comparison


def _window_multiplicity(frame: PointFrame, window: Tuple[float, float]) -> int:
    a, b = window
    levels = sigma_y(frame, b + 1.0)
    for value, _ in levels:
        if min(abs(value - a), abs(value - b)) < ENDPOINT_MARGIN:
            raise ErrorCodes()("ENDPOINT_ON_SIGMA_Y", f"window {window} touches level {value} at site {frame.site}")
    return int(sum(multiplicity for value, multiplicity in levels if a <= value <= b))


def _window_indices(es: EigenSystem, window: Tuple[float, float]) -> np.ndarray:
    a, b = window
    if b > es.cutoff:
        raise ErrorCodes()("ABOVE_CERTIFIED_CUTOFF", f"{b} > {es.cutoff}")
    return np.flatnonzero((es.eigenvalues >= a) & (es.eigenvalues <= b))


def local_weyl(es: EigenSystem, geom: GeometryField, y: int, a: float, b: float) -> LocalWeylValue:
    """
    sum over eigenvalues in [a, b] of |Psi_i(y)|^2, with the leading term (k / 2 pi)^n m

    :param es: Eigen-data with eigenvectors
    :type es: EigenSystem
    :param geom: Geometry
    :type geom: GeometryField
    :param y: Flat site index
    :type y: int
    :param a: Lower window end
    :type a: float
    :param b: Upper window end
    :type b: float
    :raises EndpointOnSigmaY: If an end lies on a model level at ``y``
    :return: Value and prediction
    :rtype: LocalWeylValue
    """
    multiplicity = _window_multiplicity(frame_at(geom, y), (a, b))
    indices = _window_indices(es, (a, b))
    value = float(np.sum(es.site_densities(indices)[y])) if len(indices) else 0.0
    return LocalWeylValue(
        k=es.k, site=int(y), window=(a, b), value=value, multiplicity=multiplicity, half_dim=geom.half_dim
    )


def local_weyl_field(es: EigenSystem, a: float, b: float) -> np.ndarray:
    """The local count at every site, shape (sites,)"""
    indices = _window_indices(es, (a, b))
    if not len(indices):
        return np.zeros(es.sites)
    return es.site_densities(indices).sum(axis=1)


def projector_trace(es: EigenSystem, window: Tuple[float, float]) -> float:
    """Weighted trace of the spectral projector onto the window, an integer up to round-off"""
    site_weights = es.weights[:: es.rank]
    return float(np.dot(local_weyl_field(es, *window), site_weights))


def _kernel_block(es: EigenSystem, indices: np.ndarray, x: int, y: int) -> np.ndarray:
    vectors = es.vectors[:, indices].reshape(es.sites, es.rank, -1)
    return vectors[x] @ vectors[y].conj().T


def projector_kernel_slice(
    es: EigenSystem,
    geom: GeometryField,
    window: Tuple[float, float],
    x: int,
    direction: Sequence[int],
    radius: float,
) -> KernelSlice:
    """
    |Pi_k(x + xi, x)| along the lattice ray x + t e, t = 0, 1, ..., while |xi|_x <= radius

    :param es: Eigen-data with eigenvectors
    :type es: EigenSystem
    :param geom: Geometry
    :type geom: GeometryField
    :param window: Spectral window with ends in gaps
    :type window: Tuple[float, float]
    :param x: Flat base site
    :type x: int
    :param direction: Integer lattice direction e
    :type direction: Sequence[int]
    :param radius: Largest |xi|_x, measured in the model norm at x
    :type radius: float
    :return: Slice
    :rtype: KernelSlice
    """
    frame = frame_at(geom, x)
    indices = _window_indices(es, window)
    base = np.array(geom.site_multi_index(x))
    step = np.asarray(direction, dtype=int)
    offsets, norms, values = [], [], []
    for t in range(geom.grid // 2 + 1):
        lattice_offset = periodic_offset(t * step, geom.grid)
        if not np.array_equal(lattice_offset, t * step):
            break
        xi = lattice_offset * geom.spacing
        norm_sq = float(frame.norm_sq(xi))
        if np.sqrt(norm_sq) > radius:
            break
        target = geom.site_index(tuple(base + lattice_offset))
        offsets.append(xi.tolist())
        norms.append(norm_sq)
        values.append(float(np.linalg.norm(_kernel_block(es, indices, target, x))))
    return KernelSlice(
        k=es.k, site=int(x), direction=[int(c) for c in step], offsets=offsets, norms=norms, values=values
    )


def model_kernel_slice(
    frame: PointFrame, window: Tuple[float, float], offsets: np.ndarray, k: int
) -> np.ndarray:
    """
    Model prediction k^n |P(sqrt(k) xi, 0)| of the lattice kernel moduli at displacements ``offsets``

    :param frame: Frame at the base site
    :type frame: PointFrame
    :param window: Spectral window
    :type window: Tuple[float, float]
    :param offsets: Displacements of shape (m, 2n)
    :type offsets: np.ndarray
    :param k: Tensor power
    :type k: int
    :return: Moduli, shape (m,)
    :rtype: np.ndarray
    """
    kernel = model_projector_kernel(frame, window, np.sqrt(k) * np.asarray(offsets, dtype=float))
    return k**frame.half_dim * np.linalg.norm(kernel, axis=(-2, -1))


def gaussian_profile_fit(kernel_slice: KernelSlice) -> GaussianFit:
    """
    Decay coefficient c of |Pi_k| / |Pi_k(x, x)| = exp(-c k |xi|_x^2), fitted through the peak
    over the samples with k |xi|_x^2 <= 4

    :param kernel_slice: Slice starting at xi = 0
    :type kernel_slice: KernelSlice
    :raises InsufficientSamples: With fewer than six radii in range or for k = 0
    :return: Fit
    :rtype: GaussianFit
    """
    k = kernel_slice.k
    if k < 1:
        raise ErrorCodes()("INSUFFICIENT_SAMPLES", "no Gaussian regime at k = 0")
    t = k * np.asarray(kernel_slice.norms, dtype=float)
    values = np.asarray(kernel_slice.values, dtype=float)
    if not len(values) or t[0] != 0.0:
        raise ErrorCodes()("INSUFFICIENT_SAMPLES", "slice does not start at the base point")
    peak = float(values[0])
    keep = (t > 0) & (t <= GAUSSIAN_RANGE) & (values > VALUE_FLOOR)
    if len(np.unique(t[keep])) < MIN_RADII or peak <= VALUE_FLOOR:
        raise ErrorCodes()("INSUFFICIENT_SAMPLES", f"{len(np.unique(t[keep]))} radii in range")
    logs = np.log(values[keep] / peak)
    coefficient = float(-np.dot(t[keep], logs) / np.dot(t[keep], t[keep]))
    residual = float(np.sqrt(np.mean((logs + coefficient * t[keep]) ** 2)))
    return GaussianFit(coefficient=coefficient, samples=int(np.sum(keep)), peak=peak, residual=residual)


def functional_calculus_diag(
    es: EigenSystem,
    geom: GeometryField,
    g: Callable[[np.ndarray], np.ndarray],
    y: int,
    support_end: float,
    envelope: IntervalUnion,
) -> FunctionalCalculusValue:
    """
    (2 pi / k)^n sum_i g(lambda_i) |Psi_i(y)|^2 against tr g(model operator at y)

    ``g`` is applied only below ``support_end``, which has to lie in a gap of the envelope
    inside the certified range.

    :raises SupportExceedsCertifiedRange: If ``support_end`` is above the certified cutoff or
        inside the envelope
    """
    if support_end > es.cutoff or envelope.contains(support_end):
        raise ErrorCodes()("SUPPORT_EXCEEDS_CERTIFIED_RANGE", f"support end {support_end}")
    indices = np.flatnonzero(es.eigenvalues <= support_end)
    lattice = 0.0
    if len(indices):
        weights = np.asarray(g(es.eigenvalues[indices]), dtype=float)
        lattice = float(np.dot(es.site_densities(indices)[y], weights)) * (2 * np.pi / es.k) ** geom.half_dim
    levels = sigma_y(frame_at(geom, y), support_end)
    model = float(sum(multiplicity * float(g(np.array([value]))[0]) for value, multiplicity in levels))
    return FunctionalCalculusValue(k=es.k, site=int(y), lattice=lattice, model=model)


def window_extremes(geom: GeometryField, window: Tuple[float, float]) -> Tuple[float, float]:
    """min and max over the grid of the model levels inside the window"""
    a, b = window
    levels = site_levels(geom, b + 1.0)
    inside = (levels >= a) & (levels <= b)
    if not np.any(inside):
        return float("nan"), float("nan")
    return float(np.min(levels[inside])), float(np.max(levels[inside]))


def garding_bounds(
    es: EigenSystem, geom: GeometryField, window: Tuple[float, float], tolerance: float
) -> BoundsCheck:
    """
    Eigenvalues in the window against [min f-, max f+] where f-+ are the extreme model levels
    in the window over the grid

    :param es: Eigen-data
    :type es: EigenSystem
    :param geom: Geometry
    :type geom: GeometryField
    :param window: Window with ends in gaps
    :type window: Tuple[float, float]
    :param tolerance: Allowed excess
    :type tolerance: float
    :return: Check with the measured margin
    :rtype: BoundsCheck
    """
    lower, upper = window_extremes(geom, window)
    values = es.eigenvalues[_window_indices(es, window)]
    return BoundsCheck(window=window, lower=lower, upper=upper, values=[float(v) for v in values], tolerance=tolerance)


def toeplitz_bounds(
    es: EigenSystem, window: Tuple[float, float], multiplier: np.ndarray, tolerance: float
) -> BoundsCheck:
    """
    Spectrum of the compression <Psi_i, f Psi_j> of a multiplication operator to the cluster
    in ``window``, against [min f, max f]

    :param es: Eigen-data with eigenvectors
    :type es: EigenSystem
    :param window: Window with ends in gaps
    :type window: Tuple[float, float]
    :param multiplier: Real function values per site, shape (sites,)
    :type multiplier: np.ndarray
    :param tolerance: Allowed excess
    :type tolerance: float
    :return: Check
    :rtype: BoundsCheck
    """
    indices = _window_indices(es, window)
    multiplier = np.asarray(multiplier, dtype=float)
    vectors = es.vectors[:, indices]
    weighted = (np.repeat(multiplier, es.rank) * es.weights)[:, None] * vectors
    compressed = vectors.conj().T @ weighted
    values = np.linalg.eigvalsh(hermitian_part(compressed)) if len(indices) else np.zeros(0)
    return BoundsCheck(
        window=window,
        lower=float(multiplier.min()),
        upper=float(multiplier.max()),
        values=[float(v) for v in values],
        tolerance=tolerance,
    )


def component_windows(envelope: IntervalUnion, cutoff: float) -> List[Tuple[float, float]]:
    """
    One window per envelope component below ``cutoff``, reaching halfway into the neighbouring
    gaps; the last window ends halfway between the top component and the cutoff
    """
    components = list(envelope.truncate(cutoff))
    windows = []
    for index, (lo, hi) in enumerate(components):
        if index:
            below = 0.5 * (components[index - 1][1] + lo)
        else:
            below = lo - 0.5 * max(hi - lo, 1.0)
        if index + 1 < len(components):
            above = 0.5 * (hi + components[index + 1][0])
        else:
            above = 0.5 * (hi + cutoff)
        windows.append((float(below), float(above)))
    return windows
