"""Tensor-bundle geometry: rescaled Sasaki-type metrics on the (1,1)-tensor
bundle of a surface, with verification suites for the closed-form identities.

The heavy lifting lives in the compiled extension `_tbgeo`; this package adds
small conveniences (JSON parsing of verification reports).
"""

import json as _json

try:
    from ._tbgeo import (  # built as part of an installed package
        EvaluationError,
        ExpressionParseError,
        Manifold,
        SingularMetricError,
        ValidationError,
        builtin_manifolds,
        verify_suites,
    )
except ImportError:  # in-tree use: extension on PYTHONPATH next to the build
    from _tbgeo import (
        EvaluationError,
        ExpressionParseError,
        Manifold,
        SingularMetricError,
        ValidationError,
        builtin_manifolds,
        verify_suites,
    )

__all__ = [
    "Manifold",
    "ValidationError",
    "ExpressionParseError",
    "EvaluationError",
    "SingularMetricError",
    "builtin_manifolds",
    "verify_suites",
    "verify",
]


def verify(manifold, suite="all", samples=20, seed=42, expect="auto"):
    """Run a verification suite and return the report as a dict.

    `manifold` is a Manifold instance, a builtin name, or a JSON file path.
    """
    if not isinstance(manifold, Manifold):
        manifold = Manifold(manifold)
    return _json.loads(manifold.verify_json(suite, samples, seed, expect))
