"""Vertex-algorithm sign tests for multiaffine functions of Delta.

det(-B Delta C) and the influence determinant are multiaffine in Delta, so
their extrema over a box are attained at its 2^q vertices.  Over the open
positive orthant the determinant is homogeneous, so the unit cube (0, 1]^q
is representative and the vertex set is {0, 1}^q.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from ..model import ModelError
from .bdc import BDCDecomposition

__all__ = ["VERTEX_CAP", "VertexCapExceeded", "InfluenceSign", "DetSign",
           "structural_det_sign", "steady_state_influence", "ssim", "vertex_values",
           "gray_vertices"]

VERTEX_CAP = 22
_CHUNK = 1 << 14


class VertexCapExceeded(ModelError):
    def __init__(self, q, cap):
        super().__init__(f"q = {q} exceeds the vertex cap {cap} (2^{q} vertices); "
                         "use the sampling path (isp) instead")
        self.q = q
        self.cap = cap


class DetSign(str, Enum):
    pos = "pos"
    neg = "neg"
    zero = "zero"
    indeterminate = "indeterminate"


class InfluenceSign(str, Enum):
    plus = "+"
    minus = "-"
    zero = "0"
    unknown = "?"

    def __str__(self):
        return self.value


def gray_vertices(q: int, start: int, stop: int) -> np.ndarray:
    """Rows k = start..stop-1 of the reflected Gray-code vertex sequence."""
    k = np.arange(start, stop, dtype=np.int64)
    g = k ^ (k >> 1)
    return ((g[:, None] >> np.arange(q, dtype=np.int64)) & 1).astype(float)


def _box(bdc: BDCDecomposition, bounds):
    if bounds is None:
        return np.zeros(bdc.q), np.ones(bdc.q), np.ones(bdc.q)
    b = np.asarray(bounds, float).reshape(-1, 2) if bdc.q else np.zeros((0, 2))
    if b.shape[0] != bdc.q:
        raise ModelError(f"expected {bdc.q} bounds")
    if np.any(~np.isfinite(b)) or np.any(b[:, 0] < 0) or np.any(b[:, 1] < b[:, 0]):
        raise ModelError("bounds must be finite with 0 <= lo <= hi")
    return b[:, 0], b[:, 1], 0.5 * (b[:, 0] + b[:, 1])


def vertex_values(fun, q: int, lo, hi, cap: int = VERTEX_CAP):
    """Evaluate ``fun(Delta batch)`` on all 2^q vertices of [lo, hi]; returns the array."""
    if q > cap:
        raise VertexCapExceeded(q, cap)
    total = 1 << q
    out = np.empty(total)
    for s in range(0, total, _CHUNK):
        e = min(total, s + _CHUNK)
        V = gray_vertices(q, s, e)
        D = lo + V * (hi - lo)
        out[s:e] = fun(D)
    return out


def _integral(*arrs):
    return all(np.issubdtype(np.asarray(a).dtype, np.integer) or
               np.all(np.asarray(a) == np.round(a)) for a in arrs)


def _signs(vals, exact):
    if exact:
        r = np.round(vals)
        return np.sign(r).astype(int)
    scale = max(1.0, float(np.max(np.abs(vals))) if vals.size else 1.0)
    s = np.sign(vals).astype(int)
    s[np.abs(vals) <= 1e-10 * scale] = 0
    return s


def _classify(vals_vertices, val_interior, exact):
    sv = _signs(vals_vertices, exact)
    si = int(_signs(np.array([val_interior]), exact)[0])
    if np.all(sv == 0):
        return "zero", sv, si
    if si > 0 and np.all(sv >= 0):
        return "pos", sv, si
    if si < 0 and np.all(sv <= 0):
        return "neg", sv, si
    return "indeterminate", sv, si


def _det_fun(bdc):
    B = np.asarray(bdc.B, float)
    C = np.asarray(bdc.C, float)

    def f(D):
        if bdc.n == 0:
            return np.ones(len(D))
        M = -np.einsum("ih,bh,hk->bik", B, D, C)
        return np.linalg.det(M)
    return f


def structural_det_sign(bdc: BDCDecomposition, bounds=None, cap: int = VERTEX_CAP,
                        details: bool = False):
    """Sign of det(-B Delta C) over all admissible Delta.

    ``pos``/``neg`` require the strict sign at the interior point (Delta = I
    on the unit cube, the box centre for finite ``bounds``) and the weak sign
    on every vertex; all-zero vertices give ``zero``.
    """
    lo, hi, mid = _box(bdc, bounds)
    f = _det_fun(bdc)
    vals = vertex_values(f, bdc.q, lo, hi, cap)
    interior = float(f(mid[None, :])[0])
    exact = bounds is None and _integral(bdc.B, bdc.C)
    cls, sv, si = _classify(vals, interior, exact)
    res = DetSign(cls)
    if details:
        return res, {"q": bdc.q, "n_vertices": int(vals.size), "interior": interior,
                     "min": float(vals.min()), "max": float(vals.max())}
    return res


def _unit(v, n, what):
    if isinstance(v, (int, np.integer)):
        e = np.zeros(n)
        e[int(v)] = 1.0
        return e
    v = np.asarray(v, float).ravel()
    if v.size != n:
        raise ModelError(f"{what} must have length {n}")
    return v


def steady_state_influence(bdc: BDCDecomposition, E, H, bounds=None,
                           cap: int = VERTEX_CAP, check: bool = True) -> InfluenceSign:
    """Sign of I(Delta) = det[[-B Delta C, -E], [H, 0]] on the admissible set.

    ``E`` and ``H`` are vectors or indices of unit vectors (input on equation
    E, output variable H).  Requires a structurally positive det(-B Delta C).
    """
    n = bdc.n
    e = _unit(E, n, "E")
    h = _unit(H, n, "H")
    if check:
        ds = structural_det_sign(bdc, bounds, cap)
        if ds is not DetSign.pos:
            raise ModelError(f"influence undefined: det(-B Delta C) is {ds.value}, "
                             "structural non-singularity (pos) is required")
    lo, hi, mid = _box(bdc, bounds)
    B = np.asarray(bdc.B, float)
    C = np.asarray(bdc.C, float)

    def f(D):
        b = len(D)
        A = np.zeros((b, n + 1, n + 1))
        A[:, :n, :n] = -np.einsum("ih,bh,hk->bik", B, D, C)
        A[:, :n, n] = -e
        A[:, n, :n] = h
        return np.linalg.det(A)

    vals = vertex_values(f, bdc.q, lo, hi, cap)
    interior = float(f(mid[None, :])[0])
    exact = bounds is None and _integral(bdc.B, bdc.C, e, h)
    cls, _, _ = _classify(vals, interior, exact)
    return {"pos": InfluenceSign.plus, "neg": InfluenceSign.minus,
            "zero": InfluenceSign.zero, "indeterminate": InfluenceSign.unknown}[cls]


def ssim(bdc: BDCDecomposition, bounds=None, cap: int = VERTEX_CAP) -> np.ndarray:
    """Structural steady-state influence matrix; entry (i, j) is the sign of
    the response of x_i to a persistent input on equation j."""
    ds = structural_det_sign(bdc, bounds, cap)
    if ds is not DetSign.pos:
        raise ModelError(f"SSIM undefined: det(-B Delta C) is {ds.value}")
    n = bdc.n
    out = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            out[i, j] = steady_state_influence(bdc, j, i, bounds, cap, check=False)
    return out
