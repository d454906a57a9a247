"""Canonical bifurcation normal forms as (non-positive) models.

    fold            x' = p + x^2
    transcritical   x' = p x - x^2
    pitchfork_super x' = p x - x^3
    pitchfork_sub   x' = p x + x^3
    cusp            x' = a + b x - x^3
    hopf            x1' = p x1 - x2 + l x1 r^2,  x2' = x1 + p x2 + l x2 r^2
"""

from __future__ import annotations

import math

import numpy as np

from ..model import CustomField, ModelError, NetworkModel, Param, Species

__all__ = ["NORMAL_FORMS", "normal_form"]


def _fold(X, th):
    return th["p"] + X ** 2


def _fold_j(X, th):
    return (2 * X)[..., None]


def _trans(X, th):
    return th["p"] * X - X ** 2


def _trans_j(X, th):
    return (th["p"] - 2 * X)[..., None]


def _psup(X, th):
    return th["p"] * X - X ** 3


def _psup_j(X, th):
    return (th["p"] - 3 * X ** 2)[..., None]


def _psub(X, th):
    return th["p"] * X + X ** 3


def _psub_j(X, th):
    return (th["p"] + 3 * X ** 2)[..., None]


def _cusp(X, th):
    return th["a"] + th["b"] * X - X ** 3


def _cusp_j(X, th):
    return (th["b"] - 3 * X ** 2)[..., None]


def _hopf(X, th):
    p, l = th["p"], th["l"]
    x1, x2 = X[..., 0], X[..., 1]
    r2 = x1 * x1 + x2 * x2
    return np.stack([p * x1 - x2 + l * x1 * r2, x1 + p * x2 + l * x2 * r2], axis=-1)


def _hopf_j(X, th):
    p, l = th["p"], th["l"]
    x1, x2 = X[..., 0], X[..., 1]
    r2 = x1 * x1 + x2 * x2
    J = np.empty(X.shape[:-1] + (2, 2))
    J[..., 0, 0] = p + l * (r2 + 2 * x1 * x1)
    J[..., 0, 1] = -1 + 2 * l * x1 * x2
    J[..., 1, 0] = 1 + 2 * l * x1 * x2
    J[..., 1, 1] = p + l * (r2 + 2 * x2 * x2)
    return J


NORMAL_FORMS = {
    "fold": (("x",), {"p": -0.25}, _fold, _fold_j),
    "transcritical": (("x",), {"p": 0.3}, _trans, _trans_j),
    "pitchfork_super": (("x",), {"p": 0.25}, _psup, _psup_j),
    "pitchfork_sub": (("x",), {"p": -0.25}, _psub, _psub_j),
    "cusp": (("x",), {"a": 0.0, "b": 1.0}, _cusp, _cusp_j),
    "hopf": (("x1", "x2"), {"p": 0.25, "l": -1.0}, _hopf, _hopf_j),
}


def normal_form(kind: str, **params) -> NetworkModel:
    """Normal-form model; parameters default to the values in NORMAL_FORMS."""
    if kind not in NORMAL_FORMS:
        raise ModelError(f"unknown normal form {kind!r}")
    names, defaults, f, j = NORMAL_FORMS[kind]
    vals = dict(defaults)
    for k, v in params.items():
        if k not in vals:
            raise ModelError(f"{kind} has no parameter {k!r}")
        vals[k] = float(v)
    table = {k: Param(v, -math.inf, math.inf) for k, v in vals.items()}
    return NetworkModel(tuple(Species(s) for s in names), (), (), table, kind,
                        custom=CustomField(f, j), positive=False)
