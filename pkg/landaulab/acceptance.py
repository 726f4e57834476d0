"""
The acceptance suite: ten desk-scale experiments comparing lattice spectra with the model
predictions. Every criterion is a function returning a :class:`CriterionResult`; the geometries
are fixed here, only solver settings come from the run configuration.
"""

from typing import Callable, Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np
from tqdm.contrib.concurrent import thread_map

from landaulab.analysis import (
    cluster_tolerance,
    component_windows,
    counting_vs_rr,
    detect_clusters,
    distance_scaling,
    endpoint_scaling,
    fit_power_law,
    gaussian_profile_fit,
    global_weyl,
    local_weyl,
    projector_kernel_slice,
)
from landaulab.chern import riemann_roch
from landaulab.eigensolver import EigenSystem, SolverSettings, dense_eig, lanczos_lowest, solve
from landaulab.errors import LandaulabException
from landaulab.expressions import parse_expression
from landaulab.geometry import (
    GeometryField,
    TensorField,
    TorusConfig,
    build_geometry,
    frame_at,
    frame_from_tensors,
)
from landaulab.intervals import IntervalUnion
from landaulab.lattice import (
    Perturbation,
    alternate_gauge,
    assemble_laplacian,
    build_gauge,
    gauge_transform,
    matvec,
    peaked_section,
)
from landaulab.model_spectrum import OscillatorBasis, cluster_bundle, projector_symbol, sigma_envelope, sigma_y
from landaulab.symbols import (
    PolySpace,
    ladder_matrices,
    model_projector_kernel,
    normalization_report,
    op_quantize,
    projector_symbol_polynomial,
    quadrature_op,
    random_pab_symbol,
)
from landaulab.types import CriterionResult, ScalingFit
from landaulab.utils import hermitian_part

acceptance_logger = logging.getLogger("landaulab.acceptance")

TWO_PI = 2.0 * np.pi
LEVEL_CUTOFF: float = 3.0 * TWO_PI
VARIATION: float = 0.15


def constant_field(grid: int, degree: int = 1) -> TorusConfig:
    """g = Id, omega = 2 pi d dx ^ dy, V = 0 on T^2"""
    return TorusConfig(half_dim=1, grid=grid, form=TensorField.two_form({(0, 1): TWO_PI * degree}))


def varying_field(grid: int, degree: int = 1, amplitude: float = VARIATION) -> TorusConfig:
    """omega = 2 pi d (1 + amplitude cos 2 pi x cos 2 pi y) dx ^ dy"""
    density = parse_expression(
        {
            "sum": [1.0, {"prod": [{"cos": [1, 0]}, {"cos": [0, 1]}], "amp": amplitude}],
            "amp": degree,
            "units": "2pi",
        },
        2,
    )
    return TorusConfig(half_dim=1, grid=grid, form=TensorField.two_form({(0, 1): density}))


def lattice_spectrum(
    geom: GeometryField,
    k: int,
    cutoff: float,
    solver: SolverSettings,
    perturbation: Optional[Perturbation] = None,
) -> EigenSystem:
    """Eigen-data of k^{-1} Delta_k below ``cutoff`` in the Landau gauge"""
    operator = assemble_laplacian(build_gauge(geom, k), geom, perturbation)
    return solve(operator, cutoff, solver)


def _complete_components(envelope, cutoff: float) -> List[Tuple[float, float]]:
    return [(lo, hi) for lo, hi in envelope.truncate(cutoff) if hi < cutoff]


def cluster_counting(solver: SolverSettings, ks: Sequence[int] = (4, 6, 8, 12), grid: int = 48) -> CriterionResult:
    """Every cluster of the constant field carries exactly the Riemann-Roch number k d of eigenvalues"""
    geom = build_geometry(constant_field(grid))
    envelope = sigma_envelope(geom, LEVEL_CUTOFF)
    windows = component_windows(envelope, LEVEL_CUTOFF)
    bundles = [cluster_bundle(geom, window) for window in windows]
    rows, passed = {}, True
    for k in ks:
        es = lattice_spectrum(geom, k, LEVEL_CUTOFF, solver)
        predicted = [riemann_roch(k, geom.degrees[0], bundle) for bundle in bundles]
        report = detect_clusters(es, envelope, LEVEL_CUTOFF, cluster_tolerance(geom, k, envelope), predicted)
        comparisons = counting_vs_rr(report, predicted)
        ok = report.contained and all(row.passed for row in comparisons)
        passed = passed and ok
        rows[str(k)] = {"counts": report.counts, "predicted": predicted, "orphans": report.orphans, "passed": ok}
    return CriterionResult(1, "cluster counting equals Riemann-Roch", passed, {"runs": rows})


def gaps_are_empty(solver: SolverSettings, ks: Sequence[int] = (8, 12, 16), min_grid: int = 48) -> CriterionResult:
    """The middle half of every gap between complete envelope components holds no eigenvalue"""
    rows, passed = {}, True
    for k in ks:
        geom = build_geometry(varying_field(max(min_grid, 4 * k)))
        envelope = sigma_envelope(geom, LEVEL_CUTOFF)
        es = lattice_spectrum(geom, k, LEVEL_CUTOFF, solver)
        components = _complete_components(envelope, LEVEL_CUTOFF)
        counts = []
        for (_, lo), (hi, _) in zip(components, components[1:]):
            quarter = 0.25 * (hi - lo)
            counts.append(int(np.sum((es.eigenvalues > lo + quarter) & (es.eigenvalues < hi - quarter))))
        ok = not any(counts)
        passed = passed and ok
        rows[str(k)] = {"grid": geom.grid, "gap_counts": counts, "passed": ok}
    return CriterionResult(2, "gaps are empty", passed, {"runs": rows})


def _scaling_run(
    torus: Callable[[int], TorusConfig], ks: Sequence[int], solver: SolverSettings, grid_factor: int
) -> Tuple[List[EigenSystem], List[IntervalUnion]]:
    systems, envelopes = [], []
    for k in ks:
        geom = build_geometry(torus(max(16, grid_factor * k)))
        envelopes.append(sigma_envelope(geom, LEVEL_CUTOFF))
        systems.append(lattice_spectrum(geom, k, LEVEL_CUTOFF, solver))
    return systems, envelopes


def _decays(fit: ScalingFit, exponent: float) -> bool:
    return fit.measurable and fit.slope <= exponent and fit.residual < 0.15


def distance_scaling_criterion(
    solver: SolverSettings, ks: Sequence[int] = (4, 6, 8, 12), grid_factor: int = 4
) -> CriterionResult:
    """
    Exponent of the largest distance to the envelope for the constant field, at most -0.7, and
    of the endpoint defect of the clusters for the varying field, at most -0.4, both with fit
    residual below 0.15. Every envelope is computed on the grid of its own run. A fit whose
    values vanish is not measurable and fails.
    """
    systems, envelopes = _scaling_run(lambda grid: constant_field(grid), ks, solver, grid_factor)
    constant = distance_scaling(systems, envelopes, LEVEL_CUTOFF)
    systems, envelopes = _scaling_run(lambda grid: varying_field(grid), ks, solver, grid_factor)
    varying = endpoint_scaling(systems, envelopes, LEVEL_CUTOFF)
    varying_distances = distance_scaling(systems, envelopes, LEVEL_CUTOFF)
    details = {
        "constant": constant.to_dict(),
        "varying": varying.to_dict(),
        "varying_distances": varying_distances.values,
        "parity_gap": constant.slope + 1.0,
    }
    for name, fit in (("constant", constant), ("varying", varying)):
        if not fit.measurable:
            acceptance_logger.warning(f"Distance scaling of the {name} field is not measurable: {fit.values}")
    return CriterionResult(3, "distance scaling", _decays(constant, -0.7) and _decays(varying, -0.4), details)


def weyl_law(solver: SolverSettings, ks: Sequence[int] = (6, 8, 12), grid: int = 48) -> CriterionResult:
    """Global Weyl law in the first gap of the varying field"""
    geom = build_geometry(varying_field(grid))
    envelope = sigma_envelope(geom, LEVEL_CUTOFF)
    first, second = envelope[0], envelope[1]
    lam = 0.5 * (first[1] + second[0])
    deviations, rows = [], {}
    for k in ks:
        comparison = global_weyl(lattice_spectrum(geom, k, lam, solver), geom, lam, envelope)
        deviation = abs(comparison.ratio - 1.0)
        deviations.append(deviation)
        rows[str(k)] = comparison.to_dict()
    monotone = all(later <= earlier + 1e-12 for earlier, later in zip(deviations, deviations[1:]))
    passed = deviations[-1] <= 0.10 and monotone
    return CriterionResult(4, "global Weyl law", passed, {"lambda": lam, "runs": rows, "deviations": deviations})


def local_weyl_law(solver: SolverSettings, k: int = 12, grid: int = 48, samples: int = 5) -> CriterionResult:
    """Local counts around the two lowest levels and inside gaps of the constant field"""
    geom = build_geometry(constant_field(grid))
    es = lattice_spectrum(geom, k, LEVEL_CUTOFF, solver)
    sites = [geom.site_index(((i * grid) // samples, (3 * i * grid) // samples % grid)) for i in range(samples)]
    level_windows = [(0.0, 2 * np.pi), (2 * np.pi, 4 * np.pi)]
    gap_windows = [(1.6 * np.pi, 2.4 * np.pi), (3.6 * np.pi, 4.4 * np.pi)]
    level_values, gap_values = [], []
    for site in sites:
        for window in level_windows:
            value = local_weyl(es, geom, site, *window)
            level_values.append(abs(value.rescaled - value.multiplicity))
        for window in gap_windows:
            gap_values.append(local_weyl(es, geom, site, *window).rescaled)
    passed = max(level_values) <= 0.15 and max(gap_values) <= 1e-3
    return CriterionResult(
        5,
        "local Weyl law",
        passed,
        {"sites": sites, "level_deviation": max(level_values), "gap_value": max(gap_values)},
    )


def kernel_gaussian(solver: SolverSettings, k: int = 12, grid: int = 48) -> CriterionResult:
    """Gaussian decay exp(-k |xi|^2 / 4) of the first cluster's projector kernel and its peak value"""
    geom = build_geometry(constant_field(grid))
    envelope = sigma_envelope(geom, LEVEL_CUTOFF)
    window = component_windows(envelope, LEVEL_CUTOFF)[0]
    es = lattice_spectrum(geom, k, LEVEL_CUTOFF, solver)
    radius = float(np.sqrt(1.5 * 4.0 / k))
    kernel_slice = projector_kernel_slice(es, geom, window, 0, (1, 0), radius)
    fit = gaussian_profile_fit(kernel_slice)
    report = normalization_report(frame_at(geom, 0))
    rescaled_peak = (TWO_PI / k) ** geom.half_dim * fit.peak
    expected_peak = TWO_PI**geom.half_dim * report.value
    peak_ratio = rescaled_peak / expected_peak
    passed = 0.225 <= fit.coefficient <= 0.275 and abs(peak_ratio - 1.0) <= 0.10
    return CriterionResult(
        6,
        "projector kernel Gaussian",
        passed,
        {"fit": fit.to_dict(), "peak_ratio": peak_ratio, "normalization_ratio": report.ratio},
    )


def _section_residual(k: int, alpha: int, degree: int, points_per_k: int) -> float:
    grid = points_per_k * k
    geom = build_geometry(varying_field(grid, degree=degree))
    gauge = build_gauge(geom, k)
    operator = assemble_laplacian(gauge, geom)
    frame = frame_at(geom, (grid // 8, 0))
    basis = OscillatorBasis(1, 2)
    coefficients = np.zeros(len(basis), dtype=complex)
    coefficients[basis.index((alpha,))] = 1.0
    section = peaked_section(gauge, geom, frame, coefficients, 2)
    level = float(frame.frequencies[0] * (alpha + 0.5) + frame.potential_values[0])
    image = matvec(operator, section)
    residual = image.flat / k - level * section.flat
    return operator.norm(residual) / operator.norm(section.flat)


def peaked_section_residual(
    solver: SolverSettings, ks: Sequence[int] = (4, 6, 8), degree: int = 24, points_per_k: int = 40
) -> CriterionResult:
    """Residuals of peaked quasimodes for f = 1, conj(z), conj(z)^2 halve roughly like k^{-1/2}"""
    ratios, rows = [], {}
    for alpha in range(3):
        for k in ks:
            small = _section_residual(k, alpha, degree, points_per_k)
            large = _section_residual(2 * k, alpha, degree, points_per_k)
            ratios.append(large / small)
            rows[f"{alpha}/{k}"] = {"r_k": small, "r_2k": large, "ratio": large / small}
    passed = all(0.3 <= ratio <= 0.9 for ratio in ratios)
    return CriterionResult(7, "peaked section residual", passed, {"runs": rows})


def _first_order_perturbation(geom: GeometryField) -> Perturbation:
    x, y = geom.points[:, 0], geom.points[:, 1]
    return Perturbation(first_order=np.stack([np.cos(TWO_PI * y), np.sin(TWO_PI * x)]))


def _cluster_means(es: EigenSystem, windows: Sequence[Tuple[float, float]]) -> List[float]:
    means = []
    for lo, hi in windows:
        inside = es.eigenvalues[(es.eigenvalues > lo) & (es.eigenvalues < hi)]
        means.append(float(np.mean(inside)) if len(inside) else float("nan"))
    return means


def lower_order_robustness(
    solver: SolverSettings, ks: Sequence[int] = (4, 6, 8, 12), grid: int = 48
) -> CriterionResult:
    """A first order term with sup norm one moves cluster means by O(k^{-1/2}) and keeps the counts"""
    geom = build_geometry(constant_field(grid))
    envelope = sigma_envelope(geom, LEVEL_CUTOFF)
    windows = component_windows(envelope, LEVEL_CUTOFF)
    perturbation = _first_order_perturbation(geom)
    shifts, rows, counts_equal = [], {}, True
    for k in ks:
        tolerance = cluster_tolerance(geom, k, envelope)
        plain_es = lattice_spectrum(geom, k, LEVEL_CUTOFF, solver)
        perturbed_es = lattice_spectrum(geom, k, LEVEL_CUTOFF, solver, perturbation)
        plain = detect_clusters(plain_es, envelope, LEVEL_CUTOFF, tolerance)
        perturbed = detect_clusters(perturbed_es, envelope, LEVEL_CUTOFF, tolerance)
        counts_equal = counts_equal and plain.counts == perturbed.counts and perturbed.contained
        moved = np.abs(np.subtract(_cluster_means(perturbed_es, windows), _cluster_means(plain_es, windows)))
        shifts.append(float(np.nanmax(moved)))
        rows[str(k)] = {"counts": plain.counts, "perturbed_counts": perturbed.counts, "shift": shifts[-1]}
    fit = fit_power_law(list(ks), shifts)
    passed = counts_equal and fit.slope <= -0.4
    return CriterionResult(8, "lower order robustness", passed, {"runs": rows, "fit": fit.to_dict()})


def _ccr_defect(space: PolySpace) -> float:
    annihilators, creators = ladder_matrices(space)
    open_columns = [m for m, (_, b) in enumerate(space.monomials) if sum(b) < space.anti_cap]
    defect = 0.0
    for i, lower in enumerate(annihilators):
        for j, upper in enumerate(creators):
            commutator = lower @ upper - upper @ lower
            expected = np.eye(len(space)) if i == j else np.zeros((len(space), len(space)))
            defect = max(defect, float(np.max(np.abs((commutator - expected)[:, open_columns]))))
    return defect


def _quadrature_defect(seed: int) -> float:
    """Largest gap between the quadrature oracle and op_quantize on random symbols, n <= 2, caps <= 3"""
    rng = np.random.default_rng(seed)
    defect = 0.0
    for half_dim in (1, 2):
        for cap in range(4):
            q = random_pab_symbol(half_dim, cap, rng)
            defect = max(defect, float(np.max(np.abs(quadrature_op(q, cap) - op_quantize(q, cap)))))
    return defect


def _test_frame():
    metric = np.array([[1.3, 0.2, 0.0, 0.1], [0.2, 0.9, 0.0, 0.0], [0.0, 0.0, 1.1, 0.3], [0.1, 0.0, 0.3, 1.0]])
    form = np.zeros((4, 4))
    form[0, 1], form[2, 3] = 1.7, 2.6
    form = form - form.T
    potential = np.array([[0.4, 0.3 - 0.2j], [0.3 + 0.2j, 1.1]])
    return frame_from_tensors(metric, form, potential)


def model_algebra(
    solver: SolverSettings, samples: int = 12, seed: int = 0
) -> CriterionResult:
    """
    Algebraic self-checks of the model layer: canonical commutation relations, quantization
    against quadrature, projector symbols against model projectors and positivity of the model
    kernel
    """
    ccr = max(_ccr_defect(PolySpace(1, 4, 4)), _ccr_defect(PolySpace(2, 2, 3)))
    quadrature = _quadrature_defect(seed)

    frame = _test_frame()
    levels = [value for value, _ in sigma_y(frame, 20.0)]
    window = (levels[0] - 0.5, 0.5 * (levels[1] + levels[2]))
    cap = 3
    symbol = projector_symbol_polynomial(frame, window)
    projector = float(np.max(np.abs(op_quantize(symbol, cap) - projector_symbol(frame, window, cap))))

    rng = np.random.default_rng(seed)
    points = rng.normal(scale=1.5, size=(samples, 2 * frame.half_dim))
    r = frame.rank
    block = np.zeros((samples * r, samples * r), dtype=complex)
    for i in range(samples):
        kernels = model_projector_kernel(frame, window, points[i] - points, points)
        for j in range(samples):
            block[i * r : (i + 1) * r, j * r : (j + 1) * r] = kernels[j]
    lowest = float(np.min(np.linalg.eigvalsh(hermitian_part(block))))

    passed = ccr <= 1e-12 and quadrature <= 1e-8 and projector <= 1e-10 and lowest >= -1e-8
    details = {"ccr": ccr, "quadrature": quadrature, "projector": projector, "kernel_min_eigenvalue": lowest}
    return CriterionResult(9, "model algebra", passed, details)


def gauge_and_solver_agreement(
    solver: SolverSettings, k: int = 6, grid: int = 40, seed: int = 0
) -> CriterionResult:
    """Spectra agree across gauges and between the dense and the Lanczos solver"""
    geom = build_geometry(varying_field(grid))
    envelope = sigma_envelope(geom, LEVEL_CUTOFF)
    cutoff = 0.5 * (envelope[0][1] + envelope[1][0])
    gauge = build_gauge(geom, k)
    rng = np.random.default_rng(seed)
    chi = rng.uniform(0, TWO_PI, size=geom.shape)
    reference = dense_eig(assemble_laplacian(gauge, geom), cutoff, keep_vectors=False).eigenvalues
    deviations = {}
    for label, other in [
        ("transformed", gauge_transform(gauge, chi)),
        ("alternate", alternate_gauge(geom, k)),
    ]:
        values = dense_eig(assemble_laplacian(other, geom), cutoff, keep_vectors=False).eigenvalues
        deviations[label] = float(np.max(np.abs(values - reference))) if len(values) == len(reference) else np.inf
    iterative = lanczos_lowest(
        assemble_laplacian(gauge, geom),
        cutoff,
        tol=min(solver.tol, 1e-11),
        seed=solver.seed,
        margin=solver.margin,
        max_basis=solver.max_basis,
        max_iters=solver.max_iters,
        keep_vectors=False,
    ).eigenvalues
    solver_gap = (
        float(np.max(np.abs(iterative - reference))) if len(iterative) == len(reference) else float("inf")
    )
    passed = max(deviations.values()) <= 1e-10 and solver_gap <= 1e-8
    return CriterionResult(
        10,
        "gauge and solver agreement",
        passed,
        {"gauges": deviations, "lanczos": solver_gap, "count": len(reference)},
    )


ACCEPTANCE_CRITERIA: List[Callable[[SolverSettings], CriterionResult]] = [
    cluster_counting,
    gaps_are_empty,
    distance_scaling_criterion,
    weyl_law,
    local_weyl_law,
    kernel_gaussian,
    peaked_section_residual,
    lower_order_robustness,
    model_algebra,
    gauge_and_solver_agreement,
]


def _guarded(criterion: Callable[[SolverSettings], CriterionResult], number: int, solver: SolverSettings):
    try:
        return criterion(solver)
    except LandaulabException as error:
        acceptance_logger.error(f"Criterion {number} aborted: {error}")
        return CriterionResult(number, criterion.__name__, False, {"error": str(error)})


def run_acceptance(
    solver: SolverSettings, threads: int = 1, only: Optional[Sequence[int]] = None
) -> List[CriterionResult]:
    """
    Run the acceptance suite, optionally restricted to the criteria numbered in ``only``

    A criterion raising a library error counts as failed; the others still run.

    :param solver: Solver settings shared by all criteria
    :type solver: SolverSettings
    :param threads: Worker threads, defaults to 1
    :type threads: int, optional
    :param only: Criterion numbers (1-based), defaults to all
    :type only: Optional[Sequence[int]], optional
    :return: Results in criterion order
    :rtype: List[CriterionResult]
    """
    chosen = [
        (number, criterion)
        for number, criterion in enumerate(ACCEPTANCE_CRITERIA, start=1)
        if only is None or number in only
    ]
    results = thread_map(
        lambda entry: _guarded(entry[1], entry[0], solver),
        chosen,
        max_workers=threads,
        desc="Acceptance",
    )
    for result in results:
        acceptance_logger.info(f"Criterion {result.number} ({result.name}): {'PASS' if result.passed else 'FAIL'}")
    return list(results)
