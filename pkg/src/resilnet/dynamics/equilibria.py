"""Equilibrium finding, stability classification and the degree index."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, root
from scipy.stats import qmc

from ..model import DomainError, ModelError, NetworkModel

__all__ = ["Equilibrium", "classify", "find_equilibria", "degree_index",
           "DegenerateEquilibrium", "MARGIN", "DEDUP_RADIUS"]

MARGIN = 1e-8
DEDUP_RADIUS = 1e-6


class DegenerateEquilibrium(ModelError):
    pass


@dataclass
class Equilibrium:
    x: np.ndarray
    eigenvalues: np.ndarray
    stability: str  # stable | unstable | marginal
    det_sign: int  # sign of det(-J)
    degenerate: bool = False
    residual: float = 0.0
    jacobian: np.ndarray | None = field(default=None, repr=False)

    @property
    def leading(self) -> complex:
        return self.eigenvalues[np.argmax(self.eigenvalues.real)]


def classify(x, J, residual=0.0, margin=MARGIN, tangent=False) -> Equilibrium:
    J = np.atleast_2d(np.asarray(J, float))
    ev = np.linalg.eigvals(J)
    ev = ev[np.lexsort((ev.imag, -ev.real))]
    lead = ev.real.max() if ev.size else -np.inf
    if abs(lead) < margin:
        stab = "marginal"
    elif lead < 0:
        stab = "stable"
    else:
        stab = "unstable"
    sign, logdet = np.linalg.slogdet(-J)
    scale = max(1.0, np.abs(J).max()) if J.size else 1.0
    degenerate = bool(tangent or sign == 0 or np.min(np.abs(ev)) < margin * scale)
    ds = 0 if degenerate else int(sign)
    return Equilibrium(np.asarray(x, float).copy(), ev, stab, ds, degenerate,
                       float(residual), J)


def _box(box, n):
    if box is None:
        raise ModelError("a search box is required")
    b = np.asarray(box, float)
    if b.ndim == 1:
        b = np.tile(b, (n, 1))
    if b.shape != (n, 2) or np.any(b[:, 1] < b[:, 0]):
        raise ModelError("box must be (lo, hi) or n rows of (lo, hi)")
    return b


def _polish(f, J, x, tol=1e-12, maxit=50):
    for _ in range(maxit):
        fx = f(x)
        if np.max(np.abs(fx)) < tol:
            break
        try:
            dx = np.linalg.solve(J(x), -fx)
        except np.linalg.LinAlgError:
            break
        x = x + dx
        if not np.all(np.isfinite(x)):
            break
    return x


def _dedup(points, scale):
    out = []
    for p in points:
        if all(np.max(np.abs((p - q) / scale)) > DEDUP_RADIUS for q in out):
            out.append(p)
    return out


def find_equilibria(model: NetworkModel, theta=None, box=None, n_starts=64,
                    tol=1e-10, seed=0, grid=4000) -> list[Equilibrium]:
    """Equilibria of ``model`` inside ``box``, sorted lexicographically.

    Scalar models use a sign-change scan on ``grid`` points refined by Brent's
    method, plus a check of near-zero local minima of |f| for tangencies.
    Higher dimensions use Sobol-distributed starts for a hybrid Powell solve
    followed by Newton polishing.  Roots with singular Jacobian are kept and
    marked degenerate.
    """
    n = model.n
    b = _box(box, n)
    if n_starts < 1:
        raise ModelError("n_starts must be at least 1")
    scale = np.maximum(b[:, 1] - b[:, 0], 1e-12)

    def f(x):
        return model.rhs(x, theta)

    def J(x):
        return model.jacobian(x, theta)

    if model.positive:
        b = b.copy()
        b[:, 0] = np.maximum(b[:, 0], 0.0)
    found = []
    tangent = []
    if n == 1:
        xs = np.linspace(b[0, 0], b[0, 1], grid)
        fs = f(xs[:, None])[:, 0]
        g1 = lambda s: float(f(np.array([s]))[0])
        for i in range(grid - 1):
            if fs[i] == 0.0:
                found.append(np.array([xs[i]]))
            elif fs[i] * fs[i + 1] < 0:
                r = brentq(g1, xs[i], xs[i + 1], xtol=1e-14, maxiter=200)
                found.append(np.array([r]))
        if fs[-1] == 0.0:
            found.append(np.array([xs[-1]]))
        af = np.abs(fs)
        cand = np.nonzero((af[1:-1] <= af[:-2]) & (af[1:-1] <= af[2:]))[0] + 1
        for i in cand:
            if fs[i - 1] * fs[i + 1] > 0 and af[i] < 1e-6 * max(1.0, af.max()):
                x = _polish(f, J, np.array([xs[i]]), tol=tol * 1e-2)
                if np.abs(f(x)).max() < tol:
                    found.append(x)
                    tangent.append(x)
    else:
        starts = qmc.Sobol(n, scramble=True, seed=seed).random(n_starts)
        starts = b[:, 0] + starts * (b[:, 1] - b[:, 0])
        for x0 in starts:
            try:
                sol = root(lambda y: f(np.maximum(y, 0) if model.positive else y),
                           x0, jac=lambda y: J(np.maximum(y, 0) if model.positive else y),
                           method="hybr", options={"xtol": 1e-13})
            except DomainError:
                continue
            x = sol.x
            if not np.all(np.isfinite(x)):
                continue
            if model.positive:
                if np.any(x < -1e-9):
                    continue
                x = np.maximum(x, 0.0)
            try:
                x = _polish(f, J, x, tol=tol * 1e-2)
            except DomainError:
                continue
            if model.positive and np.any(x < 0):
                if np.any(x < -1e-9):
                    continue
                x = np.maximum(x, 0.0)
            found.append(x)
    out = []
    slack = 1e-9 * scale
    for x in found:
        if np.any(x < b[:, 0] - slack) or np.any(x > b[:, 1] + slack):
            continue
        r = float(np.max(np.abs(f(x))))
        if r >= tol:
            continue
        out.append(x)
    out = _dedup(sorted(out, key=lambda v: tuple(v)), scale)
    # roots without a sign change have even multiplicity
    is_tan = lambda x: any(np.max(np.abs(x - t) / scale) <= 1e-4 for t in tangent)
    return [classify(x, J(x), float(np.max(np.abs(f(x)))), tangent=is_tan(x)) for x in out]


def degree_index(equilibria) -> tuple[int, bool]:
    """Sum of sign det(-J) over the equilibria; consistent when it equals 1."""
    for k, e in enumerate(equilibria):
        if e.degenerate:
            raise DegenerateEquilibrium(
                f"equilibrium {k} at {np.round(e.x, 6).tolist()} is degenerate")
    s = int(sum(e.det_sign for e in equilibria))
    return s, s == 1
