"""
Closed-form field expressions accepted in run configurations.

A term is a JSON value of one of the following shapes::

    3.5
    {"const": 1.0}
    {"cos": [1, 0], "amp": 0.15}          # amp * cos(2 pi (1 x + 0 y))
    {"sin": [0, 2]}
    {"sum": [term, term, ...]}
    {"prod": [term, term, ...]}
    {"grid": [[...], ...]}                 # periodic samples, multilinear in between

Every term may carry ``"amp"`` (a multiplier) and ``"units": "2pi"`` (multiplies by 2 pi).
"""

from typing import Any, Dict, Optional, Union
import logging

import numpy as np

from landaulab.errors import ErrorCodes

expressions_logger = logging.getLogger("landaulab.expressions")

TWO_PI = 2.0 * np.pi
_KEYS = {"const", "cos", "sin", "sum", "prod", "grid"}


class FieldExpression:
    """
    Scalar function on the unit torus built from a whitelisted expression tree.

    Instances are callables mapping points of shape ``(..., dim)`` to values of shape ``(...)``.
    """

    def __init__(self, kind: str, dim: int, payload: Any, scale: float = 1.0) -> None:
        self.kind: str = kind
        self.dim: int = dim
        self.payload: Any = payload
        self.scale: float = scale

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if points.shape[-1] != self.dim:
            raise ErrorCodes()(
                "USAGE", f"expression of dimension {self.dim} evaluated at {points.shape[-1]}-d points"
            )
        match self.kind:
            case "const":
                values = np.full(points.shape[:-1], float(self.payload))
            case "cos":
                values = np.cos(TWO_PI * points @ self.payload)
            case "sin":
                values = np.sin(TWO_PI * points @ self.payload)
            case "sum":
                values = sum(term(points) for term in self.payload)
            case "prod":
                values = np.ones(points.shape[:-1])
                for term in self.payload:
                    values = values * term(points)
            case "grid":
                values = _multilinear(self.payload, points)
            case _:
                raise ErrorCodes()("USAGE", f"unknown expression kind '{self.kind}'")
        return self.scale * values


def _multilinear(samples: np.ndarray, points: np.ndarray) -> np.ndarray:
    grid = samples.shape[0]
    scaled = np.mod(points, 1.0) * grid
    lower = np.floor(scaled).astype(int)
    frac = scaled - lower
    values = np.zeros(points.shape[:-1])
    dim = points.shape[-1]
    for corner in range(2**dim):
        bits = [(corner >> axis) & 1 for axis in range(dim)]
        weight = np.ones(points.shape[:-1])
        index = []
        for axis, bit in enumerate(bits):
            weight = weight * (frac[..., axis] if bit else 1.0 - frac[..., axis])
            index.append(np.mod(lower[..., axis] + bit, grid))
        values = values + weight * samples[tuple(index)]
    return values


def parse_expression(term: Union[float, int, Dict, None], dim: int) -> FieldExpression:
    """
    Parse a JSON expression tree into a :class:`FieldExpression`

    :param term: JSON value of the expression
    :type term: Union[float, int, Dict, None]
    :param dim: Number of torus coordinates
    :type dim: int
    :raises UsageError: For unknown keys, wrong wave vector lengths or malformed grids
    :return: Callable expression
    :rtype: FieldExpression
    """
    if term is None:
        return FieldExpression("const", dim, 0.0)
    if isinstance(term, (int, float)) and not isinstance(term, bool):
        return FieldExpression("const", dim, float(term))
    if not isinstance(term, dict):
        raise ErrorCodes()("USAGE", f"expression must be a number or an object, got {term!r}")

    kinds = _KEYS.intersection(term.keys())
    if len(kinds) != 1:
        raise ErrorCodes()("USAGE", f"expression needs exactly one of {sorted(_KEYS)}, got {sorted(term)}")
    unknown = set(term.keys()) - _KEYS - {"amp", "units"}
    if unknown:
        raise ErrorCodes()("USAGE", f"unknown expression keys {sorted(unknown)}")

    scale = float(term.get("amp", 1.0))
    units: Optional[str] = term.get("units")
    if units is not None:
        if units != "2pi":
            raise ErrorCodes()("USAGE", f"unsupported units '{units}'")
        scale *= TWO_PI

    kind = kinds.pop()
    value = term[kind]
    match kind:
        case "const":
            payload = float(value)
        case "cos" | "sin":
            payload = np.asarray(value, dtype=int)
            if payload.shape != (dim,):
                raise ErrorCodes()("USAGE", f"wave vector {value} must have {dim} integer entries")
        case "sum" | "prod":
            if not isinstance(value, list) or not value:
                raise ErrorCodes()("USAGE", f"'{kind}' needs a non-empty list of terms")
            payload = [parse_expression(item, dim) for item in value]
        case "grid":
            payload = np.asarray(value, dtype=float)
            if payload.ndim != dim or len(set(payload.shape)) != 1:
                raise ErrorCodes()("USAGE", f"grid samples must form a {dim}-d cube")
    expressions_logger.debug(f"Parsed '{kind}' term with scale {scale}")
    return FieldExpression(kind, dim, payload, scale)
