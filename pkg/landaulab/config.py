"""
JSON run configurations.

A configuration names a torus geometry, the tensor powers to run, the spectral cutoff and the
solver and analysis settings; see ``docs/chapters/config.rst`` for the schema. Everything that
influences numerics enters :meth:`RunConfig.config_hash`.
"""

from copy import deepcopy
from dataclasses import dataclass, field, replace
from hashlib import sha256
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple
import json
import logging

import numpy as np

from landaulab.analysis import component_windows
from landaulab.eigensolver import SolverSettings
from landaulab.errors import ErrorCodes
from landaulab.expressions import parse_expression
from landaulab.geometry import GeometryField, TensorField, TorusConfig, build_geometry, site_frequencies
from landaulab.intervals import IntervalUnion
from landaulab.lattice import FLUX_TOLERANCE, HERMITICITY_TOLERANCE, SECTION_FORMAT_VERSION, Perturbation
from landaulab.model_spectrum import continuity_modulus, sigma_envelope

config_logger = logging.getLogger("landaulab.config")

CONFIG_FORMAT_VERSION: int = 1
CACHE_FORMAT_VERSION: int = 1
REPORT_FORMAT_VERSION: int = 1
ENDPOINT_MARGIN_FACTOR: float = 3.0
POINTS_PER_MAGNETIC_LENGTH: float = 6.0
_NON_NUMERIC_KEYS = ("name", "output")


def _pair(key: str) -> Tuple[int, int]:
    try:
        i, j = (int(part) for part in key.split(","))
    except ValueError as exc:
        raise ErrorCodes()("USAGE", f"component key '{key}' is not of the form 'i,j'") from exc
    return i, j


def parse_tensor(spec: Any, size: int, kind: str, coordinates: int) -> Optional[TensorField]:
    """
    Build a tensor field from its JSON description

    Accepted shapes are ``null`` or ``"identity"``, ``{"diag": [term, ...]}`` and
    ``{"components": {"i,j": term}, "imag": {"i,j": term}}``. Two-forms may also be given as
    the bare component mapping ``{"0,1": term}``.

    :param spec: JSON value
    :type spec: Any
    :param size: Matrix size
    :type size: int
    :param kind: ``"symmetric"``, ``"antisymmetric"`` or ``"hermitian"``
    :type kind: str
    :param coordinates: Number of torus coordinates the terms depend on
    :type coordinates: int
    :raises UsageError: For malformed descriptions
    :return: Tensor field, None for ``null``
    :rtype: Optional[TensorField]
    """
    if spec is None:
        return None
    if spec == "identity":
        if kind == "antisymmetric":
            raise ErrorCodes()("USAGE", "a two-form cannot be the identity")
        return TensorField(size, kind, {(i, i): 1.0 for i in range(size)})
    if not isinstance(spec, dict):
        raise ErrorCodes()("USAGE", f"tensor description must be an object, got {spec!r}")
    if "diag" in spec:
        terms = spec["diag"]
        if not isinstance(terms, list) or len(terms) != size:
            raise ErrorCodes()("USAGE", f"'diag' needs {size} terms")
        return TensorField(size, kind, {(i, i): parse_expression(term, coordinates) for i, term in enumerate(terms)})
    components = spec.get("components", spec if kind == "antisymmetric" else None)
    if components is None:
        raise ErrorCodes()("USAGE", f"tensor description needs 'diag' or 'components', got {sorted(spec)}")
    real = {_pair(key): parse_expression(term, coordinates) for key, term in components.items()}
    imaginary = {_pair(key): parse_expression(term, coordinates) for key, term in spec.get("imag", {}).items()}
    return TensorField(size, kind, real, imaginary or None)


def parse_torus(spec: Dict) -> TorusConfig:
    """
    :param spec: The ``geometry`` object of a run configuration
    :type spec: Dict
    :return: Field specification
    :rtype: TorusConfig
    """
    try:
        half_dim = int(spec["half_dim"])
        grid = int(spec["grid"])
        form_spec = spec["form"]
    except KeyError as exc:
        raise ErrorCodes()("USAGE", f"geometry misses the key {exc}") from exc
    dim = 2 * half_dim
    rank = int(spec.get("rank", 1))
    degrees = spec.get("degrees")
    return TorusConfig(
        half_dim=half_dim,
        grid=grid,
        form=parse_tensor(form_spec, dim, "antisymmetric", dim),
        metric=parse_tensor(spec.get("metric"), dim, "symmetric", dim),
        potential=parse_tensor(spec.get("potential"), rank, "hermitian", dim),
        rank=rank,
        degrees=None if degrees is None else tuple(int(d) for d in degrees),
    )


@dataclass
class AnalysisSettings:
    """Sampling choices of the analysis stages"""

    samples: int = 5
    kernel_directions: List[List[int]] = field(default_factory=lambda: [[1, 0], [0, 1]])
    kernel_radius: float = 1.0
    weyl_points: Optional[List[float]] = None
    chern_grid: int = 24
    hofstadter_q: int = 3


@dataclass
class RunConfig:
    """
    Parsed run configuration

    ``raw`` keeps the JSON object (after command line overrides) that the hash is computed from.
    """

    name: str
    torus: TorusConfig
    ks: List[int]
    cutoff: float
    intervals: Optional[List[Tuple[float, float]]]
    solver: SolverSettings
    analysis: AnalysisSettings
    grid_factor: int
    perturbation: Optional[Dict[str, Any]]
    output: Path
    raw: Dict[str, Any] = field(repr=False, default_factory=dict)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        """
        :raises UsageError: For missing keys, an empty k list or malformed fields
        """
        data = deepcopy(data)
        if "geometry" not in data:
            raise ErrorCodes()("USAGE", "configuration needs a 'geometry' object")
        ks = [int(k) for k in data.get("ks", [])]
        if not ks:
            raise ErrorCodes()("USAGE", "the list of tensor powers 'ks' is empty")
        if any(k < 0 for k in ks):
            raise ErrorCodes()("USAGE", f"tensor powers must be non-negative, got {ks}")
        if "cutoff" not in data:
            raise ErrorCodes()("USAGE", "configuration needs a spectral 'cutoff'")
        intervals = data.get("intervals")
        solver = SolverSettings(**data.get("solver", {}))
        analysis = AnalysisSettings(**data.get("analysis", {}))
        perturbation = data.get("perturbation")
        if perturbation is not None and not set(perturbation) <= {"first_order", "zeroth_order"}:
            raise ErrorCodes()("USAGE", f"unknown perturbation keys {sorted(perturbation)}")
        return cls(
            name=str(data.get("name", "run")),
            torus=parse_torus(data["geometry"]),
            ks=sorted(set(ks)),
            cutoff=float(data["cutoff"]),
            intervals=None if intervals is None else [(float(a), float(b)) for a, b in intervals],
            solver=solver,
            analysis=analysis,
            grid_factor=int(data.get("grid_factor", 4)),
            perturbation=perturbation,
            output=Path(data.get("output", "landaulab-out")),
            raw=data,
        )

    def grid_for(self, k: int) -> int:
        """Grid resolution used at tensor power k, max(N, c k)"""
        return max(self.torus.grid, self.grid_factor * k)

    def geometry(self, k: Optional[int] = None) -> GeometryField:
        """Geometry on the configured grid, or on the scheduled grid of tensor power ``k``"""
        grid = self.torus.grid if k is None else self.grid_for(k)
        return build_geometry(replace(self.torus, grid=grid))

    def build_perturbation(self, geom: GeometryField) -> Optional[Perturbation]:
        """Lower order terms sampled on the sites of ``geom``"""
        if self.perturbation is None:
            return None
        first_order = None
        if "first_order" in self.perturbation:
            terms = self.perturbation["first_order"]
            if len(terms) != geom.dim:
                raise ErrorCodes()("USAGE", f"first order perturbation needs {geom.dim} coefficients")
            first_order = np.stack([parse_expression(term, geom.dim)(geom.points) for term in terms])
        zeroth_order = None
        if "zeroth_order" in self.perturbation:
            tensor = parse_tensor(self.perturbation["zeroth_order"], geom.rank, "hermitian", geom.dim)
            zeroth_order = np.asarray(tensor(geom.points), dtype=complex)
        return Perturbation(first_order=first_order, zeroth_order=zeroth_order)

    def with_overrides(
        self, seed: Optional[int] = None, dense_cap: Optional[int] = None, output: Optional[Path] = None
    ) -> "RunConfig":
        """Apply command line overrides; seed and dense cap enter the hash, the output directory does not"""
        data = deepcopy(self.raw)
        solver = dict(data.get("solver", {}))
        if seed is not None:
            solver["seed"] = int(seed)
        if dense_cap is not None:
            solver["dense_cap"] = int(dense_cap)
        if solver:
            data["solver"] = solver
        if output is not None:
            data["output"] = str(output)
        return RunConfig.from_dict(data)

    def config_hash(self) -> str:
        """
        SHA-256 over the canonical JSON of the configuration, the format versions and the
        tolerance defaults
        """
        numeric = {key: value for key, value in self.raw.items() if key not in _NON_NUMERIC_KEYS}
        payload = {
            "config": numeric,
            "versions": {
                "config": CONFIG_FORMAT_VERSION,
                "cache": CACHE_FORMAT_VERSION,
                "report": REPORT_FORMAT_VERSION,
                "section": SECTION_FORMAT_VERSION,
            },
            "tolerances": {
                "flux": FLUX_TOLERANCE,
                "hermiticity": HERMITICITY_TOLERANCE,
                "solver": vars(self.solver),
                "grid_factor": self.grid_factor,
            },
        }
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return sha256(canonical.encode("utf-8")).hexdigest()

    def windows(self, envelope: IntervalUnion) -> List[Tuple[float, float]]:
        """
        The configured intervals, or one window per envelope component reaching halfway into
        the neighbouring gaps
        """
        if self.intervals is not None:
            return list(self.intervals)
        return component_windows(envelope, self.cutoff)

    def preflight(self) -> IntervalUnion:
        """
        Check the resolution rule at the largest k and that the cutoff and every interval end
        clear the envelope by three times the grid modulus of continuity

        :raises ResolutionTooCoarse: If the grid of the largest k resolves less than six points
            per magnetic length
        :raises CutoffInsideSigma: If the cutoff is too close to the envelope
        :raises EndpointOnSpectrum: If an interval end is too close to the envelope
        :return: Envelope below the cutoff on the configured grid
        :rtype: IntervalUnion
        """
        largest = max(self.ks)
        geom = self.geometry(largest)
        if largest > 0:
            max_frequency = float(np.max(site_frequencies(geom)))
            bound = np.sqrt(2 * np.pi / max_frequency) / (POINTS_PER_MAGNETIC_LENGTH * np.sqrt(largest))
            if geom.spacing > bound:
                raise ErrorCodes()(
                    "RESOLUTION", f"spacing {geom.spacing:.4f} above {bound:.4f} at k={largest} (N={geom.grid})"
                )
        base = self.geometry()
        envelope = sigma_envelope(base, self.cutoff)
        margin = ENDPOINT_MARGIN_FACTOR * continuity_modulus(base, self.cutoff)
        if envelope.contains(self.cutoff, margin):
            raise ErrorCodes()("CUTOFF_INSIDE_SIGMA", f"cutoff {self.cutoff} within {margin:.3e} of {envelope}")
        for window in self.windows(envelope):
            for end in window:
                if envelope.contains(end, margin):
                    raise ErrorCodes()("ENDPOINT_ON_SPECTRUM", f"interval end {end} within {margin:.3e} of {envelope}")
        config_logger.info(f"Preflight passed for '{self.name}': envelope {envelope}, margin {margin:.3e}")
        return envelope


def load_config(path: Path) -> RunConfig:
    """
    Read a JSON run configuration

    :param path: Configuration file
    :type path: Path
    :raises UsageError: If the file does not exist or is not valid JSON
    :return: Parsed configuration
    :rtype: RunConfig
    """
    try:
        with open(path, "rt", encoding="utf-8") as config_file:
            data = json.load(config_file)
    except FileNotFoundError as exc:
        raise ErrorCodes()("USAGE", f"configuration {path} does not exist") from exc
    except json.JSONDecodeError as exc:
        raise ErrorCodes()("USAGE", f"configuration {path} is not valid JSON: {exc}") from exc
    config = RunConfig.from_dict(data)
    config_logger.debug(f"Loaded configuration '{config.name}' with hash {config.config_hash()}")
    return config
