from argparse import Namespace
from pathlib import Path
from time import perf_counter
import logging
from typing import Callable, Dict, List, Tuple

import numpy as np
from tqdm.contrib.concurrent import thread_map

from landaulab.acceptance import run_acceptance
from landaulab.analysis import (
    cluster_tolerance,
    counting_vs_rr,
    detect_clusters,
    distance_scaling,
    endpoint_scaling,
    garding_bounds,
    gaussian_profile_fit,
    global_weyl,
    local_weyl,
    local_weyl_field,
    model_kernel_slice,
    projector_kernel_slice,
    projector_trace,
    MIN_K_VALUES,
)
from landaulab.chern import (
    berry_curvature_oracle,
    chern_data,
    harper_matrix,
    hofstadter_projector_field,
    kubo_chern,
    riemann_roch,
)
from landaulab.config import (
    CACHE_FORMAT_VERSION,
    CONFIG_FORMAT_VERSION,
    REPORT_FORMAT_VERSION,
    RunConfig,
    load_config,
)
from landaulab.eigensolver import EigenSystem, solve
from landaulab.errors import CutoffTooSmall, InsufficientSamples, LandaulabException, SectionWrapsTorus, UsageError
from landaulab.exits import ExitCodes
from landaulab.geometry import GeometryField, frame_at
from landaulab.intervals import IntervalUnion
from landaulab.lattice import (
    SECTION_FORMAT_VERSION,
    assemble_laplacian,
    build_gauge,
    peaked_section,
    write_matrix_market,
)
from landaulab.model_spectrum import (
    OscillatorBasis,
    cluster_bundle,
    continuity_modulus,
    envelope_refinement_error,
    level_table,
    sigma_envelope,
    weyl_table,
)
from landaulab.storage import (
    EigenCache,
    write_csv,
    write_heatmap,
    write_json_report,
    write_kernel_slice,
    write_level_table,
    read_manifest,
    write_manifest,
    write_records,
    write_section,
    write_sigma_table,
    write_weyl_table,
)
from landaulab.symbols import normalization_report
from landaulab.types import RunManifest
from landaulab.utils import determine_log_level

cli_logger = logging.getLogger("landaulab")

MANIFEST_NAME: str = "manifest.json"
CACHE_DIR: str = "cache"
WEYL_TABLE_POINTS: int = 65


def _setup_logging(args: Namespace, name: str) -> logging.Logger:
    logging.basicConfig(
        level=determine_log_level(args.verbose, args.very_verbose),
        format="%(asctime)s [%(name)s %(levelname)s]: %(message)s",
    )
    for handler in logging.root.handlers:
        handler.addFilter(logging.Filter("landaulab"))
        handler.setLevel(determine_log_level(args.verbose, args.very_verbose))
    command_logger = logging.getLogger(f"landaulab.{name}")
    command_logger.debug(f"CLI tool started with the following args: {vars(args)}")
    return command_logger


def _prepare(args: Namespace) -> Tuple[RunConfig, RunManifest, IntervalUnion]:
    """
    Load the configuration, apply the command line overrides and run the preflight checks

    :raises UsageError: For unusable configurations
    """
    assert args.threads >= 1, "Number of threads must be at least one"
    config = load_config(args.config).with_overrides(seed=args.seed, dense_cap=args.dense_cap, output=args.out)
    envelope = config.preflight()
    config.output.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        config.config_hash(),
        {
            "config": CONFIG_FORMAT_VERSION,
            "cache": CACHE_FORMAT_VERSION,
            "report": REPORT_FORMAT_VERSION,
            "section": SECTION_FORMAT_VERSION,
        },
    )
    manifest_path = config.output / MANIFEST_NAME
    if manifest_path.exists():
        try:
            previous = read_manifest(manifest_path)
        except (ValueError, KeyError, TypeError):
            previous = None
        if previous is not None and previous.config_hash == manifest.config_hash:
            manifest = previous
    return config, manifest, envelope


def _artifact(config: RunConfig, manifest: RunManifest, name: str) -> Path:
    manifest.add_artifact(name)
    return config.output / name


def _stage(manifest: RunManifest, name: str, body: Callable[[], None]) -> None:
    """Run one stage, recording its status and wall time even if it fails"""
    start = perf_counter()
    try:
        body()
    except Exception as error:
        manifest.record_stage(name, "failed", perf_counter() - start, f"{type(error).__name__}: {error}")
        raise
    manifest.record_stage(name, "ok", perf_counter() - start)


def _execute(args: Namespace, name: str, stages: Callable[[RunConfig, RunManifest, IntervalUnion], int]) -> int:
    """
    Common frame of every command: logging, preflight, the stages and the manifest.
    Library errors are mapped onto exit codes.
    """
    command_logger = _setup_logging(args, name)
    config = manifest = None
    try:
        config, manifest, envelope = _prepare(args)
        command_logger.info(f"Passed preconditions, config hash {manifest.config_hash[:16]}")
        status = stages(config, manifest, envelope)
    except (UsageError, AssertionError) as error:
        command_logger.error(f"Usage error in stage '{name}': {error}")
        status = ExitCodes.E_USAGE.value
    except LandaulabException as error:
        command_logger.error(f"Numerical failure in stage '{name}': {type(error).__name__}: {error}")
        status = ExitCodes.E_NUMERICS.value
    finally:
        if manifest is not None and config is not None:
            write_manifest(config.output / MANIFEST_NAME, manifest)
    if status != ExitCodes.E_OK.value:
        exit(status)
    return status


def _sample_sites(geom: GeometryField, samples: int) -> List[int]:
    """Sites spread along the main diagonal of the grid"""
    return [geom.site_index(tuple([(i * geom.grid) // samples] * geom.dim)) for i in range(samples)]


def _eigensystems(
    config: RunConfig, manifest: RunManifest, threads: int, export_matrix: bool = False
) -> Dict[int, Tuple[GeometryField, EigenSystem]]:
    """
    Eigen-data of every configured k, taken from the cache when the config hash matches.
    Solves run in worker threads, the cache is written from the calling thread only.
    """
    geometries = {k: config.geometry(k) for k in config.ks}
    cache = EigenCache(config.output / CACHE_DIR / "eigencache.sqlite")
    cache.connect_database()
    if not cache.check_for_cache_table():
        cache.create_cache_table()

    systems = {k: cache.lookup(manifest.config_hash, k) for k in config.ks}
    missing = [k for k in config.ks if systems[k] is None]
    cli_logger.info(f"{len(config.ks) - len(missing)} cache hits, solving k in {missing}")

    def _solve(k: int) -> EigenSystem:
        geom = geometries[k]
        operator = assemble_laplacian(build_gauge(geom, k), geom, config.build_perturbation(geom))
        if export_matrix:
            write_matrix_market(operator, _artifact(config, manifest, f"operator_k{k}.mtx"))
        return solve(operator, config.cutoff, config.solver)

    fresh = thread_map(_solve, missing, max_workers=threads, desc="Solving") if missing else []
    for k, es in zip(missing, fresh):
        cache.store(manifest.config_hash, es, config.solver.tol)
        systems[k] = es
    cache.export_summary_csv(_artifact(config, manifest, f"{CACHE_DIR}/summary.csv"))
    cache.disconnect_database()
    return {k: (geometries[k], systems[k]) for k in config.ks}


def model(args: Namespace) -> int:
    """
    Envelope, Weyl density and spot reports of the model operators

    :param args: CLI args
    :type args: Namespace
    """

    def _stages(config: RunConfig, manifest: RunManifest, envelope: IntervalUnion) -> int:
        geom = config.geometry()

        def _envelope() -> None:
            write_sigma_table(
                _artifact(config, manifest, "sigma.csv"), envelope, envelope_refinement_error(geom, config.cutoff)
            )
            lambdas = config.analysis.weyl_points or list(np.linspace(0.0, config.cutoff, WEYL_TABLE_POINTS))
            write_weyl_table(_artifact(config, manifest, "weyl_density.csv"), weyl_table(geom, lambdas))

        def _spots() -> None:
            reports = []
            for site in _sample_sites(geom, config.analysis.samples):
                frame = frame_at(geom, site)
                write_level_table(_artifact(config, manifest, f"levels_site{site}.csv"), site, level_table(frame, config.cutoff))
                normalization = normalization_report(frame)
                reports.append(
                    {
                        "site": site,
                        "point": geom.points[site],
                        "frequencies": frame.frequencies,
                        "potential_values": frame.potential_values,
                        "normalization": vars(normalization),
                        "normalization_ratio": normalization.ratio,
                    }
                )
            write_json_report(
                _artifact(config, manifest, "model.json"),
                {
                    "envelope": envelope.to_list(),
                    "continuity_modulus": continuity_modulus(geom, config.cutoff),
                    "degrees": geom.degrees,
                    "sites": reports,
                },
            )

        _stage(manifest, "model.envelope", _envelope)
        _stage(manifest, "model.spots", _spots)
        return ExitCodes.E_OK.value

    return _execute(args, "model", _stages)


def spectrum(args: Namespace) -> int:
    """
    Solve every tensor power and store the eigen-data

    :param args: CLI args
    :type args: Namespace
    """

    def _stages(config: RunConfig, manifest: RunManifest, envelope: IntervalUnion) -> int:
        results: Dict[int, Tuple[GeometryField, EigenSystem]] = {}

        def _solve() -> None:
            results.update(_eigensystems(config, manifest, args.threads, getattr(args, "export_matrix", False)))

        def _report() -> None:
            summary = []
            for k, (geom, es) in results.items():
                write_csv(
                    _artifact(config, manifest, f"spectrum_k{k}.csv"),
                    ["index", "eigenvalue", "residual"],
                    [(index, value, residual) for index, (value, residual) in enumerate(zip(es.eigenvalues, es.residuals))],
                )
                summary.append(
                    {
                        "k": k,
                        "grid": geom.grid,
                        "method": es.method,
                        "count": len(es),
                        "iterations": es.iterations,
                        "max_residual": float(np.max(es.residuals)) if len(es) else 0.0,
                        "orthonormality_defect": es.orthonormality_defect(),
                        "cached": bool(es.metadata.get("cached", False)),
                    }
                )
            write_json_report(_artifact(config, manifest, "spectrum.json"), {"cutoff": config.cutoff, "runs": summary})

        _stage(manifest, "spectrum.solve", _solve)
        _stage(manifest, "spectrum.report", _report)
        return ExitCodes.E_OK.value

    return _execute(args, "spectrum", _stages)


def clusters(args: Namespace) -> int:
    """
    Cluster reports, Riemann-Roch comparisons, distance scaling and Garding bounds

    :param args: CLI args
    :type args: Namespace
    """

    def _stages(config: RunConfig, manifest: RunManifest, envelope: IntervalUnion) -> int:
        results: Dict[int, Tuple[GeometryField, EigenSystem]] = {}
        _stage(manifest, "clusters.solve", lambda: results.update(_eigensystems(config, manifest, args.threads)))

        base = config.geometry()
        windows = config.windows(envelope)

        def _clusters() -> None:
            bundles = [cluster_bundle(base, window) for window in windows] if base.half_dim == 1 else None
            for k, (geom, es) in results.items():
                k_envelope = sigma_envelope(geom, config.cutoff)
                predicted = None
                if bundles is not None:
                    predicted = [riemann_roch(k, geom.degrees[0], bundle) for bundle in bundles]
                tolerance = cluster_tolerance(geom, k, k_envelope)
                report = detect_clusters(es, k_envelope, config.cutoff, tolerance, predicted)
                write_json_report(_artifact(config, manifest, f"clusters_k{k}.json"), report)
                if predicted is not None:
                    write_records(_artifact(config, manifest, f"rr_k{k}.csv"), counting_vs_rr(report, predicted))
                traces = [projector_trace(es, window) for window in windows] if es.vectors is not None else []
                bounds = [garding_bounds(es, geom, window, tolerance) for window in windows]
                write_records(_artifact(config, manifest, f"garding_k{k}.csv"), bounds)
                write_json_report(
                    _artifact(config, manifest, f"traces_k{k}.json"), {"windows": windows, "traces": traces}
                )

        def _scaling() -> None:
            if len(results) < MIN_K_VALUES:
                cli_logger.warning(f"Distance scaling skipped, needs {MIN_K_VALUES} tensor powers")
                return
            systems = [es for _, es in results.values()]
            envelopes = [sigma_envelope(geom, config.cutoff) for geom, _ in results.values()]
            write_json_report(
                _artifact(config, manifest, "scaling.json"),
                {
                    "distance": distance_scaling(systems, envelopes, config.cutoff),
                    "endpoint": endpoint_scaling(systems, envelopes, config.cutoff),
                },
            )

        _stage(manifest, "clusters.report", _clusters)
        _stage(manifest, "clusters.scaling", _scaling)
        return ExitCodes.E_OK.value

    return _execute(args, "clusters", _stages)


def weyl(args: Namespace) -> int:
    """
    Global Weyl law in every gap and local Weyl law at sampled sites

    :param args: CLI args
    :type args: Namespace
    """

    def _stages(config: RunConfig, manifest: RunManifest, envelope: IntervalUnion) -> int:
        results: Dict[int, Tuple[GeometryField, EigenSystem]] = {}
        _stage(manifest, "weyl.solve", lambda: results.update(_eigensystems(config, manifest, args.threads)))
        windows = config.windows(envelope)

        def _global() -> None:
            lambdas = config.analysis.weyl_points
            if lambdas is None:
                lambdas = [0.5 * (lo + hi) for lo, hi in envelope.gaps()] + [config.cutoff]
            rows = [
                global_weyl(es, geom, lam, sigma_envelope(geom, config.cutoff))
                for k, (geom, es) in results.items()
                for lam in lambdas
            ]
            write_records(_artifact(config, manifest, "weyl_global.csv"), rows)

        def _local() -> None:
            rows = []
            for k, (geom, es) in results.items():
                if es.vectors is None:
                    cli_logger.warning(f"k={k}: eigen-data without eigenvectors, local Weyl law skipped")
                    continue
                for site in _sample_sites(geom, config.analysis.samples):
                    rows += [local_weyl(es, geom, site, *window) for window in windows]
                if geom.dim == 2 and windows:
                    field = local_weyl_field(es, *windows[0]).reshape(geom.shape) * (2 * np.pi / k) ** geom.half_dim
                    write_heatmap(_artifact(config, manifest, f"local_weyl_k{k}.csv"), field)
            write_records(_artifact(config, manifest, "weyl_local.csv"), rows)

        _stage(manifest, "weyl.global", _global)
        _stage(manifest, "weyl.local", _local)
        return ExitCodes.E_OK.value

    return _execute(args, "weyl", _stages)


def kernel(args: Namespace) -> int:
    """
    Projector kernel slices and Gaussian fits at the largest tensor power

    :param args: CLI args
    :type args: Namespace
    """

    def _stages(config: RunConfig, manifest: RunManifest, envelope: IntervalUnion) -> int:
        results: Dict[int, Tuple[GeometryField, EigenSystem]] = {}
        _stage(manifest, "kernel.solve", lambda: results.update(_eigensystems(config, manifest, args.threads)))

        def _slices() -> None:
            k = max(config.ks)
            geom, es = results[k]
            if k < 1 or es.vectors is None:
                raise UsageError(f"kernel slices need k >= 1 and eigenvectors (k={k})")
            fits = []
            for w, window in enumerate(config.windows(envelope)):
                for site in _sample_sites(geom, config.analysis.samples):
                    for d, direction in enumerate(config.analysis.kernel_directions):
                        kernel_slice = projector_kernel_slice(
                            es, geom, window, site, direction, config.analysis.kernel_radius
                        )
                        model_values = model_kernel_slice(frame_at(geom, site), window, np.array(kernel_slice.offsets), k)
                        write_kernel_slice(
                            _artifact(config, manifest, f"kernel_k{k}_w{w}_s{site}_d{d}.csv"), kernel_slice, model_values
                        )
                        try:
                            fit = gaussian_profile_fit(kernel_slice).to_dict()
                        except InsufficientSamples as error:
                            cli_logger.warning(f"No Gaussian fit for window {window} at site {site}: {error}")
                            fit = None
                        fits.append({"window": window, "site": site, "direction": direction, "fit": fit})
            write_json_report(_artifact(config, manifest, "kernel.json"), {"k": k, "fits": fits})

        def _sections() -> None:
            k = max(config.ks)
            geom, es = results[k]
            if len(es):
                write_section(_artifact(config, manifest, f"section_k{k}_lowest.csv"), es.section(0))
            site = _sample_sites(geom, config.analysis.samples)[0]
            coefficients = np.zeros(len(OscillatorBasis(geom.half_dim, 0)) * geom.rank, dtype=complex)
            coefficients[0] = 1.0
            try:
                section = peaked_section(build_gauge(geom, k), geom, frame_at(geom, site), coefficients, 0)
            except (CutoffTooSmall, SectionWrapsTorus) as error:
                cli_logger.warning(f"No peaked section at k={k}: {error}")
                return
            write_section(_artifact(config, manifest, f"section_k{k}_peaked_s{site}.csv"), section)

        _stage(manifest, "kernel.slices", _slices)
        _stage(manifest, "kernel.sections", _sections)
        return ExitCodes.E_OK.value

    return _execute(args, "kernel", _stages)


def chern(args: Namespace) -> int:
    """
    Chern numbers of the cluster bundles and of the Harper reference bands

    :param args: CLI args
    :type args: Namespace
    """

    def _stages(config: RunConfig, manifest: RunManifest, envelope: IntervalUnion) -> int:
        geom = config.geometry()
        report: Dict[str, list] = {"bundles": [], "harper": []}

        def _bundles() -> None:
            if geom.half_dim != 1:
                cli_logger.warning("Cluster bundle Chern numbers are only computed on T^2")
                return
            for w, window in enumerate(config.windows(envelope)):
                data = chern_data(cluster_bundle(geom, window))
                write_heatmap(_artifact(config, manifest, f"curvature_w{w}.csv"), data.curvature)
                report["bundles"].append(
                    {
                        "window": window,
                        "rank": data.field.rank,
                        "c1": data.c1,
                        "raw": data.raw,
                        "berry": berry_curvature_oracle(data.field),
                        "riemann_roch": {str(k): riemann_roch(k, geom.degrees[0], data.field, data.c1) for k in config.ks},
                    }
                )

        def _harper() -> None:
            q, nk = config.analysis.hofstadter_q, config.analysis.chern_grid
            for band in range(q):
                data = chern_data(hofstadter_projector_field(q, band, nk))
                write_heatmap(_artifact(config, manifest, f"harper_curvature_b{band}.csv"), data.curvature)
                kubo = kubo_chern(lambda kx, ky: harper_matrix(kx, ky, q), band, nk, (2 * np.pi / q, 2 * np.pi))
                report["harper"].append({"band": band, "c1": data.c1, "kubo": kubo})

        _stage(manifest, "chern.bundles", _bundles)
        _stage(manifest, "chern.harper", _harper)
        write_json_report(_artifact(config, manifest, "chern.json"), report)
        return ExitCodes.E_OK.value

    return _execute(args, "chern", _stages)


def accept(args: Namespace) -> int:
    """
    Run the acceptance suite, exit with E_ACCEPTANCE_FAILED if any criterion fails

    :param args: CLI args
    :type args: Namespace
    """

    def _stages(config: RunConfig, manifest: RunManifest, envelope: IntervalUnion) -> int:
        results = []
        _stage(
            manifest,
            "accept",
            lambda: results.extend(run_acceptance(config.solver, args.threads, getattr(args, "only", None))),
        )
        write_json_report(
            _artifact(config, manifest, "acceptance.json"),
            {"passed": all(result.passed for result in results), "criteria": results},
        )
        failed = [result.number for result in results if not result.passed]
        if failed:
            cli_logger.error(f"Acceptance criteria {failed} failed")
            return ExitCodes.E_ACCEPTANCE_FAILED.value
        return ExitCodes.E_OK.value

    return _execute(args, "accept", _stages)
