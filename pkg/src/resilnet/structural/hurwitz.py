"""Robust Hurwitz certification by zero exclusion of the value set."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import ModelError
from .bdc import BDCDecomposition
from .vertex import VERTEX_CAP, VertexCapExceeded, gray_vertices

__all__ = ["HurwitzReport", "robust_hurwitz_valueset", "default_omega_grid",
           "hull_excludes_origin"]


@dataclass
class HurwitzReport:
    status: str  # certified | inconclusive | falsified
    grid_dependent: bool
    n_vertices: int
    omega_failures: list[float]
    worst_vertex: int | None
    max_vertex_real_part: float
    interior_real_part: float

    def __str__(self):
        return self.status


def default_omega_grid(w_max=1e3, steps=400, w_min=1e-3):
    return np.r_[0.0, np.logspace(np.log10(w_min), np.log10(w_max), steps)]


def hull_excludes_origin(z, tol=1e-12) -> bool:
    """True when the convex hull of the complex points ``z`` misses 0.

    Equivalent to all points lying in an open half-plane through the origin,
    i.e. an angular gap larger than pi between consecutive arguments.
    """
    z = np.asarray(z, complex).ravel()
    scale = max(1.0, float(np.max(np.abs(z))))
    if np.any(np.abs(z) <= tol * scale):
        return False
    ang = np.sort(np.angle(z))
    gaps = np.diff(np.r_[ang, ang[0] + 2 * np.pi])
    return bool(gaps.max() > np.pi * (1 + 1e-12))


def robust_hurwitz_valueset(bdc: BDCDecomposition, bounds, omega=None,
                            w_max=1e3, steps=400, cap: int = VERTEX_CAP) -> HurwitzReport:
    """Hurwitz stability of B Delta C for all Delta in the box ``bounds``.

    ``falsified`` if some vertex matrix is not Hurwitz; ``certified`` if the
    box centre is Hurwitz and, at every sampled frequency, the convex hull of
    det(j w I - B Delta_k C) over the vertices excludes the origin;
    otherwise ``inconclusive``.  The certificate holds on the frequency grid.
    """
    q, n = bdc.q, bdc.n
    lo = np.array([b[0] for b in bounds], float) if q else np.zeros(0)
    hi = np.array([b[1] for b in bounds], float) if q else np.zeros(0)
    if lo.size != q:
        raise ModelError(f"expected {q} bounds, got {lo.size}")
    if np.any(~np.isfinite(hi)) or np.any(lo <= 0) or np.any(hi < lo):
        raise ModelError("bounds must satisfy 0 < lo <= hi < inf")
    w = default_omega_grid(w_max, steps) if omega is None else np.asarray(omega, float)
    if w.size == 0:
        raise ModelError("frequency grid is empty")
    if q > cap:
        raise VertexCapExceeded(q, cap)
    V = gray_vertices(q, 0, 1 << q)
    D = lo + V * (hi - lo)
    B = np.asarray(bdc.B, float)
    C = np.asarray(bdc.C, float)
    J = np.einsum("ih,bh,hk->bik", B, D, C)  # (2^q, n, n)
    ev = np.linalg.eigvals(J)
    re = ev.real.max(axis=1)
    Jm = B @ np.diag(0.5 * (lo + hi)) @ C
    re_mid = float(np.linalg.eigvals(Jm).real.max())
    worst = int(np.argmax(re))
    if re.max() >= 0:
        return HurwitzReport("falsified", False, len(D), [], worst, float(re.max()), re_mid)
    # det(jwI - J_k) = prod_i (jw - lambda_ik)
    fails = []
    for wk in w:
        vals = np.prod(1j * wk - ev, axis=1)
        if not hull_excludes_origin(vals):
            fails.append(float(wk))
    status = "certified" if re_mid < 0 and not fails else "inconclusive"
    return HurwitzReport(status, True, len(D), fails, worst, float(re.max()), re_mid)
