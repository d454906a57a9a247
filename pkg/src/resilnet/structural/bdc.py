"""BDC and EDF decompositions of network Jacobians.

For every nonzero partial derivative dg_j/dx_i (reactions in model order,
species in model order within a reaction) one rank-one term is emitted:

    B_h = sign(dg_j/dx_i) * S_j,   Delta_h = |dg_j/dx_i|,   C_h = e_i^T
    E_h = sign(dg_j/dx_i) * e_j,   F_h = S_i (row i of S)

so that J = B diag(Delta) C, J_r = (dg/dx) S = E diag(Delta) F and C B = F E
entrywise.  The derivative sign is carried by B (and E); C and F stay
unsigned, which keeps the C B = F E identity exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..model import ModelError, NetworkModel

__all__ = ["BDCDecomposition", "EDFDecomposition", "bdc_decompose", "edf_decompose",
           "delta_values"]


@dataclass(frozen=True)
class BDCDecomposition:
    B: np.ndarray  # n x q
    C: np.ndarray  # q x n
    delta_labels: tuple[str, ...]
    delta_bounds: tuple[tuple[float, float], ...] = ()
    terms: tuple[tuple[int, int, int], ...] = ()  # (reaction j, species i, sign)
    species: tuple[str, ...] = ()

    @property
    def q(self) -> int:
        return self.B.shape[1]

    @property
    def n(self) -> int:
        return self.B.shape[0]

    def jacobian(self, delta) -> np.ndarray:
        d = np.asarray(delta, float)
        return (self.B * d[..., None, :]) @ self.C

    def with_bounds(self, bounds) -> "BDCDecomposition":
        b = tuple((float(lo), float(hi)) for lo, hi in bounds)
        if len(b) != self.q:
            raise ModelError(f"expected {self.q} bounds, got {len(b)}")
        return BDCDecomposition(self.B, self.C, self.delta_labels, b, self.terms, self.species)


@dataclass(frozen=True)
class EDFDecomposition:
    E: np.ndarray  # m x q
    F: np.ndarray  # q x m
    delta_labels: tuple[str, ...]
    terms: tuple[tuple[int, int, int], ...] = field(default=())


def _terms(model: NetworkModel):
    if model.custom is not None:
        raise ModelError("custom vector fields have no BDC structure")
    idx = model.index
    out = []
    for j, rx in enumerate(model.reactions):
        deps = rx.rate.dependencies()  # raises on non sign-definite rates
        for sp in sorted(deps, key=idx.get):
            out.append((j, idx[sp], int(deps[sp])))
    return out


def _labels(model, terms):
    rx, ids = model.labels, model.ids
    return tuple(f"|d{rx[j]}/d{ids[i]}|" for j, i, _ in terms)


def bdc_decompose(model: NetworkModel) -> BDCDecomposition:
    terms = _terms(model)
    S = model.S
    q = len(terms)
    B = np.zeros((model.n, q), dtype=int)
    C = np.zeros((q, model.n), dtype=int)
    for h, (j, i, s) in enumerate(terms):
        B[:, h] = s * S[:, j]
        C[h, i] = 1
    B.setflags(write=False)
    C.setflags(write=False)
    labels = _labels(model, terms)
    bounds = tuple((0.0, np.inf) for _ in terms)
    return BDCDecomposition(B, C, labels, bounds, tuple(terms), tuple(model.ids))


def edf_decompose(model: NetworkModel) -> EDFDecomposition:
    terms = _terms(model)
    S = model.S
    q = len(terms)
    E = np.zeros((model.m, q), dtype=int)
    F = np.zeros((q, model.m), dtype=int)
    for h, (j, i, s) in enumerate(terms):
        E[j, h] = s
        F[h, :] = S[i, :]
    E.setflags(write=False)
    F.setflags(write=False)
    labels = _labels(model, terms)
    return EDFDecomposition(E, F, labels, tuple(terms))


def delta_values(model: NetworkModel, bdc: BDCDecomposition, x, theta=None) -> np.ndarray:
    """Delta(x): absolute values of the partial derivatives, in term order."""
    G = model.rate_jacobian(x, theta)  # (..., m, n)
    j = np.array([t[0] for t in bdc.terms], dtype=int)
    i = np.array([t[1] for t in bdc.terms], dtype=int)
    return np.abs(G[..., j, i])
