"""Compartmental epidemic models as mass-action networks.

The general form has non-infected compartments ``w`` and infected ones ``x``:

    w' = G w - diag(C x) w + D x + a
    x' = F x + b (w^T C x)

The linear part ``[[G, D], [0, F]]`` is turned into transfers between
compartments where a column's outflow covers its off-diagonal inflows, and
into catalytic production otherwise, so the vector field is reproduced
exactly in both cases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (Factor, Influx, ModelError, NetworkModel, RateLaw,
                    Reaction, Species)

__all__ = ["CompartmentalSpec", "build_compartmental"]


@dataclass(frozen=True)
class CompartmentalSpec:
    G: np.ndarray
    F: np.ndarray
    C: np.ndarray
    D: np.ndarray
    a: np.ndarray
    b: np.ndarray
    w_names: tuple[str, ...] = ()
    x_names: tuple[str, ...] = ()

    def validate(self):
        G = np.atleast_2d(np.asarray(self.G, float))
        F = np.atleast_2d(np.asarray(self.F, float))
        n2, n1 = G.shape[0], F.shape[0]
        C = np.asarray(self.C, float).reshape(n2, -1) if np.size(self.C) == n2 * n1 else None
        D = np.asarray(self.D, float).reshape(n2, -1) if np.size(self.D) == n2 * n1 else None
        a = np.asarray(self.a, float).ravel()
        b = np.asarray(self.b, float).ravel()
        if G.shape != (n2, n2) or F.shape != (n1, n1):
            raise ModelError("G and F must be square")
        if C is None or D is None or C.shape != (n2, n1) or D.shape != (n2, n1):
            raise ModelError(f"C and D must be {n2}x{n1}")
        if a.shape != (n2,) or b.shape != (n1,):
            raise ModelError(f"a must have length {n2} and b length {n1}")
        for nm, M in (("G", G), ("F", F)):
            off = M - np.diag(np.diag(M))
            if np.any(off < 0):
                raise ModelError(f"{nm} must be Metzler")
        for nm, M in (("C", C), ("D", D), ("a", a), ("b", b)):
            if np.any(M < 0):
                raise ModelError(f"{nm} must be nonnegative")
        return G, F, C, D, a, b


def build_compartmental(spec: CompartmentalSpec, name: str = "compartmental") -> NetworkModel:
    G, F, C, D, a, b = spec.validate()
    n2, n1 = G.shape[0], F.shape[0]
    wn = list(spec.w_names) or [f"w{i + 1}" for i in range(n2)]
    xn = list(spec.x_names) or [f"x{i + 1}" for i in range(n1)]
    names = wn + xn
    if len(names) != n1 + n2:
        raise ModelError("compartment names do not match dimensions")
    L = np.zeros((n1 + n2, n1 + n2))
    L[:n2, :n2] = G
    L[:n2, n2:] = D
    L[n2:, n2:] = F
    rxs = []

    def lin(k, c):
        return RateLaw(float(c), (), (Factor("pow", names[k], 1.0),))

    for k in range(n1 + n2):
        avail = max(-L[k, k], 0.0)
        zk = names[k]
        for i in range(n1 + n2):
            if i == k or L[i, k] <= 0:
                continue
            t = min(L[i, k], avail)
            avail -= t
            if t > 0:
                rxs.append(Reaction(((zk, 1),), ((names[i], 1),), lin(k, t)))
            rest = L[i, k] - t
            if rest > 0:
                rxs.append(Reaction(((zk, 1),), ((zk, 1), (names[i], 1)), lin(k, rest)))
        if avail > 0:
            rxs.append(Reaction(((zk, 1),), (), lin(k, avail)))
        if L[k, k] > 0:
            rxs.append(Reaction(((zk, 1),), ((zk, 2),), lin(k, L[k, k])))
    nz = np.nonzero(b)[0]
    for i in range(n2):
        for k in range(n1):
            c = C[i, k]
            if c == 0:
                continue
            wi, xk = wn[i], xn[k]
            rate = RateLaw(float(c), (), (Factor("pow", wi, 1.0), Factor("pow", xk, 1.0)))
            if len(nz) == 1 and b[nz[0]] == 1.0:
                xl = xn[nz[0]]
                prod = {xk: 1}
                prod[xl] = prod.get(xl, 0) + 1
                rxs.append(Reaction(((wi, 1), (xk, 1)), tuple(prod.items()), rate))
            else:
                rxs.append(Reaction(((wi, 1), (xk, 1)), ((xk, 1),), rate))
                for l in nz:
                    r = RateLaw(float(c * b[l]), (), rate.factors)
                    rxs.append(Reaction(((wi, 1), (xk, 1)),
                                        ((wi, 1), (xk, 1), (xn[l], 1)), r))
    infl = tuple(Influx(wn[i], RateLaw(float(a[i]))) for i in range(n2) if a[i] > 0)
    return NetworkModel(tuple(Species(s) for s in names), tuple(rxs), infl, {}, name)
