"""Levin-Segel population model on a uniform grid.

    u_t = a u + e u^2 - b u v + D_u u_xx
    v_t = c u v - d v^2 + D_v v_xx

with zero-flux boundaries, semi-discretized on N grid points of [0, L].
The state is interleaved, ``w = (u_1, v_1, ..., u_N, v_N)``, and the linear
part is the block tridiagonal matrix with diagonal blocks
``N0 = diag(a - 2 D_u/h^2, -2 D_v/h^2)``, off-diagonal blocks ``N1/2`` and
doubled ``N1 = 2/h^2 diag(D_u, D_v)`` couplings in the two boundary rows.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp
from scipy.linalg import lapack

from ..model import (Factor, ModelError, NetworkModel, Param, RateLaw,
                     Reaction, Species)

__all__ = ["LevinSegelKernel", "levin_segel_semidiscretize", "pattern_condition",
           "homogeneous_equilibrium", "turing_pattern_equilibrium",
           "PatternDivergence"]

_PARAMS = ("a", "b", "c", "d", "e", "D_u", "D_v")


class PatternDivergence(ModelError):
    def __init__(self, msg, state):
        super().__init__(msg)
        self.state = state


def pattern_condition(a, b, c, d, e, D_u, D_v) -> tuple[bool, str]:
    """Check D_u/D_v < (sqrt(b/d) - sqrt(b/d - e/c))^2 and bc > ed."""
    if D_v <= 0:
        return False, "D_v must be positive for the diffusion-ratio condition"
    disc = b / d - e / c
    if disc < 0:
        return False, f"b/d - e/c = {disc:.4g} < 0"
    bound = (math.sqrt(b / d) - math.sqrt(disc)) ** 2
    ratio = D_u / D_v
    ok = ratio < bound and b * c > e * d
    msg = (f"D_u/D_v = {ratio:.4g} {'<' if ratio < bound else '>='} {bound:.4g}; "
           f"bc = {b * c:.4g} {'>' if b * c > e * d else '<='} ed = {e * d:.4g}")
    return ok, msg


def homogeneous_equilibrium(a, b, c, d, e) -> tuple[float, float]:
    den = b * c - d * e
    return a * d / den, a * c / den


def _laplacian(N: int, h: float) -> sp.csr_matrix:
    main = -2.0 * np.ones(N)
    up = np.ones(N - 1)
    lo = np.ones(N - 1)
    up[0] = 2.0
    lo[-1] = 2.0
    return sp.diags([lo, main, up], [-1, 0, 1], format="csr") / h ** 2


@dataclass
class LevinSegelKernel:
    """Fast batched evaluator; states have shape (..., 2N)."""

    N: int
    h: float

    def __post_init__(self):
        self.lap = _laplacian(self.N, self.h)
        self._inv_cache: dict = {}

    def _vals(self, theta):
        return [float(theta[k]) for k in _PARAMS]

    def rhs(self, X, theta):
        a, b, c, d, e, Du, Dv = self._vals(theta)
        X = np.asarray(X, float)
        u = X[..., 0::2]
        v = X[..., 1::2]
        lu = (self.lap @ u.reshape(-1, self.N).T).T.reshape(u.shape)
        lv = (self.lap @ v.reshape(-1, self.N).T).T.reshape(v.shape)
        out = np.empty_like(X)
        out[..., 0::2] = a * u + e * u * u - b * u * v + Du * lu
        out[..., 1::2] = c * u * v - d * v * v + Dv * lv
        return out

    def reaction(self, X, theta):
        """Local reaction terms only (rhs minus diffusion)."""
        a, b, c, d, e, _, _ = self._vals(theta)
        X = np.asarray(X, float)
        u = X[..., 0::2]
        v = X[..., 1::2]
        out = np.empty_like(X)
        out[..., 0::2] = a * u + e * u * u - b * u * v
        out[..., 1::2] = c * u * v - d * v * v
        return out

    def linear_operator(self, theta) -> sp.csr_matrix:
        """Diffusion part only (the stiff linear term)."""
        _, _, _, _, _, Du, Dv = self._vals(theta)
        P = self._perm()
        blk = sp.block_diag([Du * self.lap, Dv * self.lap], format="csr")
        return (P.T @ blk @ P).tocsr()

    def _perm(self):
        n = 2 * self.N
        rows = np.r_[np.arange(self.N), self.N + np.arange(self.N)]
        cols = np.r_[np.arange(0, n, 2), np.arange(1, n, 2)]
        return sp.csr_matrix((np.ones(n), (rows, cols)), shape=(n, n))

    def jac(self, x, theta) -> sp.csr_matrix:
        a, b, c, d, e, Du, Dv = self._vals(theta)
        x = np.asarray(x, float)
        u = x[0::2]
        v = x[1::2]
        n = 2 * self.N
        iu = np.arange(0, n, 2)
        iv = iu + 1
        rows = np.r_[iu, iu, iv, iv]
        cols = np.r_[iu, iv, iu, iv]
        vals = np.r_[a + 2 * e * u - b * v, -b * u, c * v, c * u - 2 * d * v]
        J = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        return (J + self.linear_operator(theta)).tocsr()

    def implicit_solver(self, dt, theta):
        """Return y -> (I - dt L)^{-1} y for batched y (..., 2N).

        The tridiagonal factors are computed once per (dt, D_u, D_v) and
        each call is a banded LAPACK back-substitution.
        """
        _, _, _, _, _, Du, Dv = self._vals(theta)
        key = (dt, Du, Dv)
        fac = self._inv_cache.get(key)
        if fac is None:
            fac = (self._band_factor(dt * Du), self._band_factor(dt * Dv))
            self._inv_cache = {key: fac}
        N = self.N

        def back(F, Z):
            lu, piv = F
            x, info = lapack.dgbtrs(lu, 1, 1, np.asfortranarray(Z.reshape(-1, N).T), piv)
            if info:
                raise ModelError(f"banded solve failed (info={info})")
            return x.T.reshape(Z.shape)

        def solve(Y):
            Y = np.asarray(Y, float)
            out = np.empty_like(Y)
            out[..., 0::2] = back(fac[0], Y[..., 0::2])
            out[..., 1::2] = back(fac[1], Y[..., 1::2])
            return out

        return solve

    def _band_factor(self, c):
        """LU factors of I - c * lap in LAPACK band storage (kl = ku = 1)."""
        M = (sp.identity(self.N) - c * self.lap).todia()
        ab = np.zeros((4, self.N))
        for off, diag in zip(M.offsets, M.data):
            ab[2 - off] = diag  # dia data is already column-aligned
        lu, piv, info = lapack.dgbtrf(ab, 1, 1)
        if info:
            raise ModelError(f"singular implicit operator (info={info})")
        return lu, piv


def levin_segel_semidiscretize(a=0.5, b=1.0, c=1.0, d=0.5, e=0.5, D_u=1.4e-4,
                               D_v=0.005, N=101, L=1.0) -> NetworkModel:
    """Semi-discretized Levin-Segel model with 2N species.

    The reaction list reproduces the vector field exactly with mass-action
    kinetics; diffusion appears as first-order decay of each grid value and
    catalytic production from its neighbours.  The pattern-formation
    condition is checked and attached to ``model.notes``.
    """
    if N < 3:
        raise ModelError("N must be at least 3")
    for k, v in zip(_PARAMS, (a, b, c, d, e, D_u, D_v)):
        if v < 0 or (k in "abcde" and v == 0):
            raise ModelError(f"parameter {k} must be positive")
    h = L / (N - 1)
    ok, msg = pattern_condition(a, b, c, d, e, D_u, D_v)
    notes = ("pattern condition holds: " + msg,) if ok else (
        "pattern condition violated: " + msg,)
    if not ok:
        warnings.warn("Levin-Segel pattern condition violated: " + msg, stacklevel=2)
    species = []
    for j in range(N):
        species += [Species(f"u{j + 1}"), Species(f"v{j + 1}")]
    P = lambda *names: tuple((n_, 1.0) for n_ in names)
    rx = []
    lap = _laplacian(N, h).tocoo()
    for j in range(N):
        u = f"u{j + 1}"
        v = f"v{j + 1}"
        rx += [
            Reaction(((u, 1),), ((u, 2),), RateLaw(1.0, P("a"), (Factor("pow", u, 1.0),))),
            Reaction(((u, 2),), ((u, 3),), RateLaw(1.0, P("e"), (Factor("pow", u, 2.0),))),
            Reaction(((u, 1), (v, 1)), ((v, 1),),
                     RateLaw(1.0, P("b"), (Factor("pow", u, 1.0), Factor("pow", v, 1.0)))),
            Reaction(((u, 1), (v, 1)), ((u, 1), (v, 2)),
                     RateLaw(1.0, P("c"), (Factor("pow", u, 1.0), Factor("pow", v, 1.0)))),
            Reaction(((v, 2),), ((v, 1),), RateLaw(1.0, P("d"), (Factor("pow", v, 2.0),))),
        ]
    for i, k, w in zip(lap.row, lap.col, lap.data):
        for sym, D in (("u", "D_u"), ("v", "D_v")):
            src = f"{sym}{k + 1}"
            dst = f"{sym}{i + 1}"
            if i == k:
                rx.append(Reaction(((src, 1),), (),
                                   RateLaw(float(-w), P(D), (Factor("pow", src, 1.0),))))
            else:
                rx.append(Reaction(((src, 1),), ((src, 1), (dst, 1)),
                                   RateLaw(float(w), P(D), (Factor("pow", src, 1.0),))))
    params = {k: Param(float(v)) for k, v in zip(_PARAMS, (a, b, c, d, e, D_u, D_v))}
    return NetworkModel(tuple(species), tuple(rx), (), params, "levin_segel",
                        kernel=LevinSegelKernel(N, h), notes=notes)


def _grid(model):
    k = model.kernel
    if not isinstance(k, LevinSegelKernel):
        raise ModelError("not a Levin-Segel semi-discretization")
    return k


def turing_pattern_equilibrium(model: NetworkModel, init="random", method="bdf",
                               T=5000.0, seed=0, amplitude=0.01, tol=1e-12,
                               theta=None):
    """Steady pattern by long deterministic integration and Newton polish.

    ``init`` is ``"random"`` (homogeneous state plus a seeded uniform
    perturbation of the given amplitude in u), ``"homogeneous"`` or an
    explicit positive state of length 2N.
    """
    from .equilibria import Equilibrium, classify

    kern = _grid(model)
    vals = model.param_values(theta)
    ut, vt = homogeneous_equilibrium(*(vals[k] for k in "abcde"))
    n = model.n
    if isinstance(init, str):
        w0 = np.empty(n)
        w0[0::2] = ut
        w0[1::2] = vt
        if init == "random":
            rng = np.random.default_rng(seed)
            w0[0::2] += amplitude * (2 * rng.random(kern.N) - 1)
        elif init != "homogeneous":
            raise ModelError(f"unknown init {init!r}")
    else:
        w0 = np.asarray(init, float)
        if w0.shape != (n,) or np.any(w0 < 0):
            raise ModelError("init must be a nonnegative state of length 2N")
    if method == "bdf":
        sol = solve_ivp(lambda t, y: kern.rhs(y, vals), (0.0, T), w0, method="BDF",
                        jac=lambda t, y: kern.jac(y, vals), rtol=1e-8, atol=1e-10)
        if not sol.success or not np.all(np.isfinite(sol.y[:, -1])):
            raise PatternDivergence(f"integration failed: {sol.message}", sol.y[:, -1])
        w = sol.y[:, -1]
    elif method == "imex":
        dt = 0.01
        solve = kern.implicit_solver(dt, vals)
        w = w0.copy()
        for _ in range(int(T / dt)):
            w = solve(w + dt * kern.reaction(w, vals))
            if not np.all(np.isfinite(w)):
                raise PatternDivergence("integration diverged", w)
    else:
        raise ModelError(f"unknown method {method!r}")
    for _ in range(50):
        f = kern.rhs(w, vals)
        if np.max(np.abs(f)) < tol:
            break
        step = spla.spsolve(kern.jac(w, vals).tocsc(), -f)
        w = w + step
        if not np.all(np.isfinite(w)):
            raise PatternDivergence("Newton polish diverged", w)
    f = kern.rhs(w, vals)
    if np.max(np.abs(f)) > 1e-8:
        raise PatternDivergence(f"residual {np.max(np.abs(f)):.3g} after polish", w)
    J = kern.jac(w, vals).toarray()
    return classify(w, J, residual=float(np.max(np.abs(f))))
