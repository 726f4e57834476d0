from landaulab.geometry import TorusConfig, TensorField, build_geometry, frame_at
from landaulab.lattice import build_gauge, assemble_laplacian
from landaulab.eigensolver import SolverSettings, solve
from landaulab.config import RunConfig, load_config
from landaulab.storage import EigenCache
import landaulab.types as Types
import landaulab.errors as Errors
from landaulab.exits import ExitCodes
from landaulab import cli

__all__ = [
    "TorusConfig",
    "TensorField",
    "build_geometry",
    "frame_at",
    "build_gauge",
    "assemble_laplacian",
    "SolverSettings",
    "solve",
    "RunConfig",
    "load_config",
    "EigenCache",
    "Types",
    "Errors",
    "ExitCodes",
    "cli",
]
