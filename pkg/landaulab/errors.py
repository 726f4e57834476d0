"""
Exception hierarchy of landaulab and the registry mapping error codes to exception classes
"""

from typing import Dict, Callable, Optional, Union


class LandaulabException(Exception):
    """Base class of every error raised by landaulab"""


class GeometryException(LandaulabException):
    """Errors, that fall into the 'geometry' module"""


class ModelSpectrumException(LandaulabException):
    """Errors, that fall into the 'model_spectrum' module"""


class SymbolException(LandaulabException):
    """Errors, that fall into the 'symbols' module"""


class LatticeException(LandaulabException):
    """Errors, that fall into the 'lattice' module"""


class EigensolverException(LandaulabException):
    """Errors, that fall into the 'eigensolver' module"""


class TopologyException(LandaulabException):
    """Errors, that fall into the 'chern' module"""


class AnalysisException(LandaulabException):
    """Errors, that fall into the 'analysis' module"""


class ConfigurationException(LandaulabException):
    """Errors, that fall into the 'config' module and the command line runner"""


class NonSymplectic(GeometryException):
    """The two-form is degenerate or negatively oriented somewhere on the grid"""


class NonIntegralFlux(GeometryException):
    """The total flux of the two-form is not an integer multiple of 2 pi"""


class NonPositiveMetric(GeometryException):
    """The metric is not symmetric positive definite somewhere on the grid"""


class DegenerateForm(GeometryException):
    """A magnetic frequency is numerically zero"""


class UnsupportedField(GeometryException):
    """The field is valid but outside of what the lattice layer can discretize"""


class EndpointOnSpectrum(ModelSpectrumException):
    """An interval endpoint lies on the model spectrum"""


class RankJump(ModelSpectrumException):
    """The rank of a projector field changes between neighbouring grid points"""


class CapExceeded(SymbolException):
    """A polynomial degree exceeds the caps of the polynomial space"""


class FluxMismatch(LatticeException):
    """Plaquette fluxes do not add up to 2 pi times k times the degree"""


class NonHermitianAssembly(LatticeException):
    """The assembled operator is not Hermitian for the weighted inner product"""


class CutoffTooSmall(LatticeException):
    """The cutoff radius of a peaked section is below the admissible minimum"""


class SectionWrapsTorus(LatticeException):
    """The support of a peaked section does not fit into half a period"""


class DimensionMismatch(LatticeException):
    """Operator and section dimensions disagree"""


class DimensionTooLarge(EigensolverException):
    """The operator is too large for the dense solver"""


class NoConvergence(EigensolverException):
    """The Lanczos iteration exceeded its matrix-vector product budget"""


class ClusterUnresolved(EigensolverException):
    """Independent Lanczos runs disagree on the number of eigenvalues below the cutoff"""


class AboveCertifiedCutoff(EigensolverException):
    """A spectral query was made above the cutoff the eigen-data is certified for"""


class SingularOverlap(TopologyException):
    """A link overlap determinant vanishes, the grid is too coarse or the rank jumps"""


class UnsupportedDimension(TopologyException):
    """The operation is only implemented for half dimension one"""


class CutoffInsideSigma(AnalysisException):
    """The spectral cutoff lies inside the envelope"""


class InsufficientKGrid(AnalysisException):
    """Too few tensor powers for a scaling fit"""


class LambdaOnSigma(AnalysisException):
    """The Weyl law was queried at a discontinuity point of the Weyl density"""


class EndpointOnSigmaY(AnalysisException):
    """A local Weyl window endpoint lies on the pointwise model spectrum"""


class InsufficientSamples(AnalysisException):
    """Too few kernel samples inside the Gaussian regime"""


class SupportExceedsCertifiedRange(AnalysisException):
    """The support of a spectral function reaches above the certified cutoff"""


class UsageError(ConfigurationException):
    """The run configuration or command line arguments are unusable"""


class ResolutionTooCoarse(ConfigurationException):
    """The lattice spacing does not resolve the magnetic length"""


class ErrorCodes:
    KNOWN_ERROR_CODES: Dict[str, Dict[str, Union[str, Callable]]] = {
        "NON_SYMPLECTIC": {
            "msg": "Two-form is degenerate or negatively oriented",
            "cls": NonSymplectic,
        },
        "NON_INTEGRAL_FLUX": {
            "msg": "Flux per 2-cycle is not a positive integer multiple of 2 pi",
            "cls": NonIntegralFlux,
        },
        "NON_POSITIVE_METRIC": {
            "msg": "Metric is not symmetric positive definite",
            "cls": NonPositiveMetric,
        },
        "DEGENERATE_FORM": {
            "msg": "Smallest magnetic frequency below threshold",
            "cls": DegenerateForm,
        },
        "UNSUPPORTED_FIELD": {
            "msg": "Field cannot be discretized by the lattice layer",
            "cls": UnsupportedField,
        },
        "ENDPOINT_ON_SPECTRUM": {
            "msg": "Interval endpoint lies on the model spectrum",
            "cls": EndpointOnSpectrum,
        },
        "RANK_JUMP": {
            "msg": "Projector rank changes across the grid - endpoints too close to the envelope "
            "or grid too coarse",
            "cls": RankJump,
        },
        "CAP_EXCEEDED": {
            "msg": "Polynomial degree exceeds the space caps",
            "cls": CapExceeded,
        },
        "FLUX_MISMATCH": {
            "msg": "Total plaquette flux deviates from 2 pi k d",
            "cls": FluxMismatch,
        },
        "NON_HERMITIAN_ASSEMBLY": {
            "msg": "Assembled operator fails the weighted Hermiticity check",
            "cls": NonHermitianAssembly,
        },
        "CUTOFF_TOO_SMALL": {
            "msg": "Peaked section cutoff below 5 k^(-1/2)",
            "cls": CutoffTooSmall,
        },
        "SECTION_WRAPS_TORUS": {
            "msg": "Peaked section support exceeds half a period - increase the degree or k",
            "cls": SectionWrapsTorus,
        },
        "DIMENSION_MISMATCH": {
            "msg": "Operator and section dimensions disagree",
            "cls": DimensionMismatch,
        },
        "DIMENSION_TOO_LARGE": {
            "msg": "Dimension exceeds the dense solver cap",
            "cls": DimensionTooLarge,
        },
        "NO_CONVERGENCE": {
            "msg": "Lanczos iteration exceeded its matrix-vector product budget",
            "cls": NoConvergence,
        },
        "CLUSTER_UNRESOLVED": {
            "msg": "Eigenvalue counts below the cutoff are not reproducible - block restart needed",
            "cls": ClusterUnresolved,
        },
        "ABOVE_CERTIFIED_CUTOFF": {
            "msg": "Query above the certified cutoff of the eigen-data",
            "cls": AboveCertifiedCutoff,
        },
        "SINGULAR_OVERLAP": {
            "msg": "Link overlap determinant below threshold",
            "cls": SingularOverlap,
        },
        "UNSUPPORTED_DIMENSION": {
            "msg": "Operation requires half dimension one",
            "cls": UnsupportedDimension,
        },
        "CUTOFF_INSIDE_SIGMA": {
            "msg": "Cutoff lies inside the envelope",
            "cls": CutoffInsideSigma,
        },
        "INSUFFICIENT_K_GRID": {
            "msg": "Scaling fit needs at least four tensor powers",
            "cls": InsufficientKGrid,
        },
        "LAMBDA_ON_SIGMA": {
            "msg": "Weyl law queried inside the envelope",
            "cls": LambdaOnSigma,
        },
        "ENDPOINT_ON_SIGMA_Y": {
            "msg": "Local window endpoint lies on the pointwise model spectrum",
            "cls": EndpointOnSigmaY,
        },
        "INSUFFICIENT_SAMPLES": {
            "msg": "Gaussian fit needs at least six radii within two magnetic lengths",
            "cls": InsufficientSamples,
        },
        "SUPPORT_EXCEEDS_CERTIFIED_RANGE": {
            "msg": "Function support reaches above the certified cutoff",
            "cls": SupportExceedsCertifiedRange,
        },
        "USAGE": {
            "msg": "Invalid run configuration",
            "cls": UsageError,
        },
        "RESOLUTION": {
            "msg": "Lattice spacing exceeds one sixth of the magnetic length",
            "cls": ResolutionTooCoarse,
        },
    }

    def __call__(self, code: str, detail: Optional[str] = None) -> LandaulabException:
        entry = ErrorCodes.KNOWN_ERROR_CODES[code]
        message = entry["msg"] if detail is None else f"{entry['msg']}: {detail}"
        return entry["cls"](message)
