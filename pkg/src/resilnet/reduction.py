"""Degree-weighted reduction of homogeneous networks to a scalar system.

Network dynamics x_i' = F(x_i) + sum_j A_ij G(x_i, x_j) are summarized by

    x_eff   = 1^T A x / 1^T A 1
    beta_eff = 1^T A s_in / 1^T A 1,   s_in = A 1,

and the scalar equation x_eff' = F(x_eff) + beta_eff G(x_eff, x_eff).
The reduction is exact for uniform states on graphs whose nodes all have
the same in- and out-degree; elsewhere it is an approximation and the
returned system carries a heterogeneity score.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field
from typing import Callable

import networkx as nx
import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import root

from .model import CustomField, ModelError, NetworkModel, Param, Species

__all__ = ["HeterogeneityWarning", "NodeDynamics", "ReducedSystem", "NetworkSystem",
           "effective_state", "effective_coupling", "gao_reduce", "hill_dynamics",
           "regular_adjacency", "read_edge_list", "network_system"]


class HeterogeneityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class NodeDynamics:
    """F(x) and G(x_i, x_j), vectorized, with optional partial derivatives."""

    F: Callable
    G: Callable
    dF: Callable | None = None
    dG_i: Callable | None = None
    dG_j: Callable | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)


def hill_dynamics(a: float = 0.5, h: float = 2.0, k: float = 0.1, B: float = 1.0) -> NodeDynamics:
    """F(x) = -B x + k, G(x_i, x_j) = a x_j^h / (1 + x_j^h).

    On a d-regular graph the reduced system is the self-activating gene
    x' = -B x + d a x^h / (1 + x^h) + k.
    """
    def hill(x):
        xh = np.power(np.maximum(x, 0.0), h)
        return xh / (1.0 + xh)

    def dhill(x):
        x = np.maximum(x, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = h * np.power(x, h - 1) / (1.0 + np.power(x, h)) ** 2
        return np.where(x > 0, d, 0.0 if h > 1 else np.inf)

    return NodeDynamics(
        F=lambda x: -B * x + k,
        G=lambda xi, xj: a * hill(xj) + 0.0 * xi,
        dF=lambda x: np.full_like(np.asarray(x, float), -B),
        dG_i=lambda xi, xj: np.zeros(np.broadcast(xi, xj).shape),
        dG_j=lambda xi, xj: a * dhill(xj) + 0.0 * xi,
        name="hill", params={"a": a, "h": h, "k": k, "B": B})


def _adjacency(A) -> np.ndarray:
    A = np.asarray(A, float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ModelError("adjacency must be a square matrix")
    if np.any(A < 0):
        raise ModelError("adjacency weights must be nonnegative")
    if not A.sum() > 0:
        raise ModelError("adjacency has no edges: 1^T A 1 = 0")
    return A


def effective_state(A, x):
    """x_eff = 1^T A x / 1^T A 1 (x may carry leading batch axes)."""
    A = _adjacency(A)
    w = A.sum(axis=0)  # out-degrees s_out
    return np.asarray(x, float) @ w / A.sum()


def effective_coupling(A) -> float:
    A = _adjacency(A)
    return float(A.sum(axis=0) @ A.sum(axis=1) / A.sum())


def _hash(A) -> str:
    return hashlib.sha256(np.ascontiguousarray(A, dtype=float).tobytes()).hexdigest()[:16]


@dataclass
class ReducedSystem:
    beta_eff: float
    dynamics: NodeDynamics
    provenance: str
    heterogeneity: float  # coefficient of variation of the degrees
    in_out_mismatch: float

    def rhs(self, x):
        x = np.asarray(x, float)
        return self.dynamics.F(x) + self.beta_eff * self.dynamics.G(x, x)

    def derivative(self, x):
        d = self.dynamics
        if d.dF is None or d.dG_i is None or d.dG_j is None:
            eps = 1e-7 * max(1.0, abs(float(x)))
            return float((self.rhs(x + eps) - self.rhs(x - eps)) / (2 * eps))
        return float(d.dF(x) + self.beta_eff * (d.dG_i(x, x) + d.dG_j(x, x)))

    def as_model(self) -> NetworkModel:
        """Scalar custom model (state x_eff, parameter beta_eff)."""
        def f(X, th):
            return self.dynamics.F(X) + th["beta_eff"] * self.dynamics.G(X, X)

        def j(X, th):
            d = self.dynamics
            if d.dF is None or d.dG_i is None or d.dG_j is None:
                eps = 1e-7 * np.maximum(1.0, np.abs(X))
                return ((f(X + eps, th) - f(X - eps, th)) / (2 * eps))[..., None]
            return (d.dF(X) + th["beta_eff"] * (d.dG_i(X, X) + d.dG_j(X, X)))[..., None]

        return NetworkModel((Species("x_eff"),), (), (),
                            {"beta_eff": Param(self.beta_eff, 0.0, np.inf)},
                            f"reduced({self.dynamics.name})", custom=CustomField(f, j),
                            positive=False)

    def trajectory(self, x0: float, t_eval, rtol=1e-11, atol=1e-12):
        t_eval = np.asarray(t_eval, float)
        sol = solve_ivp(lambda t, y: self.rhs(y), (t_eval[0], t_eval[-1]), [float(x0)],
                        t_eval=t_eval, rtol=rtol, atol=atol, method="DOP853")
        return sol.y[0]

    def equilibria(self, lo: float, hi: float, n_grid: int = 4001, tol=1e-13):
        """Roots of the reduced field in [lo, hi], with stability."""
        from scipy.optimize import brentq
        g = np.linspace(lo, hi, n_grid)
        v = self.rhs(g)
        out = []
        for i in np.nonzero(np.sign(v[:-1]) * np.sign(v[1:]) <= 0)[0]:
            if v[i] == 0 and out and abs(out[-1][0] - g[i]) < 1e-12:
                continue
            r = g[i] if v[i] == 0 else brentq(self.rhs, g[i], g[i + 1], xtol=tol)
            out.append((float(r), "stable" if self.derivative(r) < 0 else "unstable"))
        return out


def gao_reduce(A, dynamics: NodeDynamics, tol: float = 1e-9) -> ReducedSystem:
    """Reduce network dynamics on ``A`` to the scalar effective system.

    Warns (HeterogeneityWarning) when the in- and out-degree sequences
    differ or when degrees vary across nodes beyond ``tol`` (relative).
    """
    A = _adjacency(A)
    s_in = A.sum(axis=1)
    s_out = A.sum(axis=0)
    mean = s_in.mean()
    cv = float(np.std(np.r_[s_in, s_out]) / mean)
    mismatch = float(np.abs(s_in - s_out).max() / mean)
    if mismatch > tol:
        warnings.warn(f"in- and out-degrees differ (max relative gap {mismatch:.3g}); "
                      "the reduction is an approximation", HeterogeneityWarning, stacklevel=2)
    elif cv > tol:
        warnings.warn(f"degree sequence is heterogeneous (CV {cv:.3g}); "
                      "the reduction is an approximation", HeterogeneityWarning, stacklevel=2)
    beta = float(s_out @ s_in / A.sum())
    return ReducedSystem(beta, dynamics, _hash(A), cv, mismatch)


def regular_adjacency(n: int, d: int, seed: int | None = 0, kind: str = "random") -> np.ndarray:
    """Unit-weight d-regular graph: ``random`` or ``circulant`` (vertex-transitive)."""
    if kind == "random":
        G = nx.random_regular_graph(d, n, seed=seed)
    elif kind == "circulant":
        if d % 2:
            raise ModelError("circulant regular graphs need even degree")
        G = nx.circulant_graph(n, range(1, d // 2 + 1))
    else:
        raise ModelError(f"unknown graph kind {kind!r}")
    return nx.to_numpy_array(G, nodelist=range(n), dtype=float)


def read_edge_list(path, n: int | None = None, directed: bool = False) -> np.ndarray:
    """Adjacency from a CSV edge list with rows (i, j[, w]); A[i, j] = w.

    Undirected lists are symmetrized.  A header line is skipped if present.
    """
    rows = []
    with open(path) as fh:
        for line in fh:
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = [p.strip() for p in s.split(",")]
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                if rows:
                    raise ModelError(f"bad edge-list line: {s!r}")
                continue
            w = float(parts[2]) if len(parts) > 2 and parts[2] else 1.0
            rows.append((i, j, w))
    if not rows:
        raise ModelError("edge list is empty")
    m = max(max(i, j) for i, j, _ in rows) + 1
    n = m if n is None else n
    A = np.zeros((n, n))
    for i, j, w in rows:
        if min(i, j) < 0 or max(i, j) >= n:
            raise ModelError(f"edge ({i}, {j}) outside 0..{n - 1}")
        A[i, j] += w
        if not directed and i != j:
            A[j, i] += w
    return A


@dataclass
class NetworkSystem:
    A: np.ndarray
    dynamics: NodeDynamics

    def rhs(self, x):
        x = np.asarray(x, float)
        d = self.dynamics
        Gm = d.G(x[..., :, None], x[..., None, :])
        return d.F(x) + (self.A * Gm).sum(axis=-1)

    def jacobian(self, x):
        x = np.asarray(x, float)
        d = self.dynamics
        if d.dF is None or d.dG_i is None or d.dG_j is None:
            n = x.shape[-1]
            J = np.empty(x.shape + (n,))
            for k in range(n):
                e = np.zeros(n)
                e[k] = 1e-7 * max(1.0, float(np.abs(x).max()))
                J[..., :, k] = (self.rhs(x + e) - self.rhs(x - e)) / (2 * e[k])
            return J
        xi, xj = x[..., :, None], x[..., None, :]
        J = self.A * d.dG_j(xi, xj)
        diag = d.dF(x) + (self.A * d.dG_i(xi, xj)).sum(axis=-1)
        idx = np.arange(x.shape[-1])
        J[..., idx, idx] += diag
        return J

    def equilibrium(self, x0, tol=1e-13):
        """Newton-type solve started from ``x0``; returns (x, stable)."""
        sol = root(self.rhs, np.asarray(x0, float), jac=self.jacobian, method="hybr",
                   tol=tol)
        if not sol.success or np.abs(self.rhs(sol.x)).max() > 1e-9:
            raise ModelError(f"network equilibrium solve failed: {sol.message}")
        ev = np.linalg.eigvals(self.jacobian(sol.x))
        return sol.x, bool(ev.real.max() < 0)

    def trajectory(self, x0, t_eval, rtol=1e-11, atol=1e-12):
        t_eval = np.asarray(t_eval, float)
        sol = solve_ivp(lambda t, y: self.rhs(y), (t_eval[0], t_eval[-1]),
                        np.asarray(x0, float), t_eval=t_eval, rtol=rtol, atol=atol,
                        method="DOP853")
        return sol.y.T

    def as_model(self) -> NetworkModel:
        n = self.A.shape[0]
        return NetworkModel(tuple(Species(f"x{i + 1}") for i in range(n)), (), (), {},
                            f"network({self.dynamics.name})",
                            custom=CustomField(lambda X, th: self.rhs(X),
                                               lambda X, th: self.jacobian(X)),
                            positive=False)


def network_system(A, dynamics: NodeDynamics) -> NetworkSystem:
    return NetworkSystem(_adjacency(A), dynamics)
