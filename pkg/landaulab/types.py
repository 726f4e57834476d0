"""
Report records emitted by the analysis stages and the acceptance suite.
"""

from json import dumps
from typing import Any, Dict, List, Optional, Tuple

import numpy as np


def _encode(value: Any) -> Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return vars(value)


class LandaulabBaseType:
    def to_dict(self) -> Dict[str, Any]:
        return {key: value for key, value in self.__dict__.items() if not key.startswith("_")}

    def json(self) -> str:
        return dumps(self.to_dict(), default=_encode)


class ComponentRecord(LandaulabBaseType):
    def __init__(
        self,
        interval: Tuple[float, float],
        count: int,
        lowest: Optional[float],
        highest: Optional[float],
        max_distance: float,
    ) -> None:
        """
        Eigenvalues attached to one component of the envelope

        :param interval: The component [l, u]
        :type interval: Tuple[float, float]
        :param count: Number of attached eigenvalues
        :type count: int
        :param lowest: Smallest attached eigenvalue, None if there is none
        :type lowest: Optional[float]
        :param highest: Largest attached eigenvalue, None if there is none
        :type highest: Optional[float]
        :param max_distance: Largest distance of an attached eigenvalue to the component
        :type max_distance: float
        """
        self.interval: Tuple[float, float] = tuple(interval)
        self.count: int = count
        self.lowest: Optional[float] = lowest
        self.highest: Optional[float] = highest
        self.max_distance: float = max_distance


class ClusterReport(LandaulabBaseType):
    def __init__(
        self,
        k: int,
        envelope: List[List[float]],
        cutoff: float,
        tolerance: float,
        components: List[ComponentRecord],
        orphans: List[float],
        predicted: Optional[List[int]] = None,
    ) -> None:
        self.k: int = k
        self.envelope: List[List[float]] = envelope
        self.cutoff: float = cutoff
        self.tolerance: float = tolerance
        self.components: List[ComponentRecord] = components
        self.orphans: List[float] = orphans
        self.predicted: Optional[List[int]] = predicted

    @property
    def counts(self) -> List[int]:
        return [component.count for component in self.components]

    @property
    def total(self) -> int:
        return sum(self.counts) + len(self.orphans)

    @property
    def contained(self) -> bool:
        return not self.orphans


class RRComparison(LandaulabBaseType):
    def __init__(self, label: str, count: int, predicted: int) -> None:
        self.label: str = label
        self.count: int = count
        self.predicted: int = predicted
        self.passed: bool = count == predicted


class ScalingFit(LandaulabBaseType):
    def __init__(
        self, ks: List[int], values: List[float], slope: float, intercept: float, residual: float, measurable: bool = True
    ) -> None:
        """
        Least squares line through (log10 k, log10 value)

        :param residual: Root mean square residual in log10 units
        :type residual: float
        :param measurable: False if some value sits at the floor, where the slope means nothing, defaults to True
        :type measurable: bool, optional
        """
        self.ks: List[int] = ks
        self.values: List[float] = values
        self.slope: float = slope
        self.intercept: float = intercept
        self.residual: float = residual
        self.measurable: bool = measurable


class WeylComparison(LandaulabBaseType):
    def __init__(self, k: int, lam: float, count: int, prediction: float) -> None:
        self.k: int = k
        self.lam: float = lam
        self.count: int = count
        self.prediction: float = prediction
        self.defined: bool = prediction > 0
        self.ratio: float = count / prediction if prediction > 0 else float("nan")


class LocalWeylValue(LandaulabBaseType):
    def __init__(self, k: int, site: int, window: Tuple[float, float], value: float, multiplicity: int, half_dim: int) -> None:
        self.k: int = k
        self.site: int = site
        self.window: Tuple[float, float] = tuple(window)
        self.value: float = value
        self.multiplicity: int = multiplicity
        self.prediction: float = (k / (2 * np.pi)) ** half_dim * multiplicity
        self.rescaled: float = (2 * np.pi / k) ** half_dim * value


class KernelSlice(LandaulabBaseType):
    def __init__(
        self,
        k: int,
        site: int,
        direction: List[float],
        offsets: List[List[float]],
        norms: List[float],
        values: List[float],
    ) -> None:
        """
        Kernel moduli |Pi_k(x + xi, x)| along one lattice ray

        :param offsets: Displacements xi in torus coordinates
        :type offsets: List[List[float]]
        :param norms: |xi|_x^2 for every displacement
        :type norms: List[float]
        :param values: Frobenius norms of the kernel blocks
        :type values: List[float]
        """
        self.k: int = k
        self.site: int = site
        self.direction: List[float] = direction
        self.offsets: List[List[float]] = offsets
        self.norms: List[float] = norms
        self.values: List[float] = values


class GaussianFit(LandaulabBaseType):
    def __init__(self, coefficient: float, samples: int, peak: float, residual: float) -> None:
        self.coefficient: float = coefficient
        self.samples: int = samples
        self.peak: float = peak
        self.residual: float = residual


class FunctionalCalculusValue(LandaulabBaseType):
    def __init__(self, k: int, site: int, lattice: float, model: float) -> None:
        self.k: int = k
        self.site: int = site
        self.lattice: float = lattice
        self.model: float = model
        self.deviation: float = abs(lattice - model) / abs(model) if model != 0 else abs(lattice)


class BoundsCheck(LandaulabBaseType):
    def __init__(self, window: Tuple[float, float], lower: float, upper: float, values: List[float], tolerance: float) -> None:
        """
        Eigenvalues expected inside [lower, upper] up to ``tolerance``; ``margin`` is the largest
        observed excess
        """
        self.window: Tuple[float, float] = tuple(window)
        self.lower: float = lower
        self.upper: float = upper
        self.values: List[float] = values
        self.tolerance: float = tolerance
        excess = [max(lower - v, v - upper, 0.0) for v in values]
        self.margin: float = max(excess, default=0.0)
        self.outliers: List[float] = [v for v, e in zip(values, excess) if e > tolerance]
        self.passed: bool = not self.outliers


class CriterionResult(LandaulabBaseType):
    def __init__(self, number: int, name: str, passed: bool, details: Optional[Dict[str, Any]] = None) -> None:
        self.number: int = number
        self.name: str = name
        self.passed: bool = bool(passed)
        self.details: Dict[str, Any] = details or {}


class StageRecord(LandaulabBaseType):
    def __init__(self, status: str, wall_time: float, detail: Optional[str] = None) -> None:
        self.status: str = status
        self.wall_time: float = wall_time
        self.detail: Optional[str] = detail


class RunManifest(LandaulabBaseType):
    def __init__(
        self,
        config_hash: str,
        versions: Dict[str, int],
        artifacts: Optional[List[str]] = None,
        stages: Optional[Dict[str, StageRecord]] = None,
    ) -> None:
        """
        Index of everything a run wrote

        :param config_hash: Hash of the configuration the run used
        :type config_hash: str
        :param versions: Format versions of configuration, cache, reports and sections
        :type versions: Dict[str, int]
        :param artifacts: Paths relative to the output directory, defaults to None
        :type artifacts: Optional[List[str]], optional
        :param stages: Status and wall time per stage, defaults to None
        :type stages: Optional[Dict[str, StageRecord]], optional
        """
        self.config_hash: str = config_hash
        self.versions: Dict[str, int] = dict(versions)
        self.artifacts: List[str] = list(artifacts or [])
        self.stages: Dict[str, StageRecord] = dict(stages or {})

    def add_artifact(self, path: str) -> None:
        if path not in self.artifacts:
            self.artifacts.append(path)

    def record_stage(self, name: str, status: str, wall_time: float, detail: Optional[str] = None) -> None:
        self.stages[name] = StageRecord(status, wall_time, detail)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunManifest":
        stages = {name: StageRecord(**record) for name, record in data.get("stages", {}).items()}
        return cls(data["config_hash"], data["versions"], data.get("artifacts"), stages)
