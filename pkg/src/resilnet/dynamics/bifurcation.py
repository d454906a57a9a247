"""Parameter sweeps with branch tracking, and fold-condition solving."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import root

from ..model import ModelError, NetworkModel
from .equilibria import Equilibrium, find_equilibria

__all__ = ["BifurcationDiagram", "bifurcation_sweep", "fold_condition_solve"]


@dataclass
class BifurcationDiagram:
    param: str
    samples: list[tuple[float, list[Equilibrium]]]
    branches: list[list[tuple[int, int]]] = field(default_factory=list)
    detected_folds: list[float] = field(default_factory=list)
    detected_transcritical: list[float] = field(default_factory=list)
    gaps: list[float] = field(default_factory=list)

    def rows(self):
        """(p, x_1..x_n, stability) rows for CSV output."""
        for p, eqs in self.samples:
            for e in eqs:
                yield (p, *e.x.tolist(), e.stability)


def _counts(model, param, theta, box, n_starts, seed, p):
    th = dict(theta or {})
    th[param] = p
    return find_equilibria(model, th, box, n_starts=n_starts, seed=seed)


def bifurcation_sweep(model: NetworkModel, param: str, range_, steps: int,
                      theta=None, box=None, n_starts=32, seed=0,
                      match_tol=None, refine=30) -> BifurcationDiagram:
    """Equilibria on ``steps`` equally spaced parameter values.

    Branches are built by nearest-point matching between consecutive samples.
    A change of the equilibrium count by two marks a fold; a matched branch
    whose stability flips (stable <-> unstable, ignoring marginal samples)
    with unchanged count marks a transcritical point.  Both locations are
    refined by bisection on the parameter.
    """
    if param not in model.params:
        raise ModelError(f"parameter {param!r} not in model")
    if steps < 2:
        raise ModelError("steps must be at least 2")
    lo, hi = map(float, range_)
    if box is None:
        raise ModelError("a state box is required")
    ps = np.linspace(lo, hi, steps)
    samples = [(float(p), _counts(model, param, theta, box, n_starts, seed, p)) for p in ps]
    bx = np.asarray(box, float)
    width = float(np.max(bx[..., 1] - bx[..., 0])) if bx.ndim > 1 else float(bx[1] - bx[0])
    tol = match_tol if match_tol is not None else 0.05 * width

    branches: list[list[tuple[int, int]]] = []
    open_: dict[int, int] = {}
    for k, (_p, eqs) in enumerate(samples):
        new_open = {}
        used = set()
        if k > 0:
            prev = samples[k - 1][1]
            pairs = []
            for bi, idx in open_.items():
                for j, e in enumerate(eqs):
                    d = float(np.max(np.abs(e.x - prev[idx].x)))
                    pairs.append((d, bi, j))
            pairs.sort()
            taken_b = set()
            for d, bi, j in pairs:
                if d > tol or bi in taken_b or j in used:
                    continue
                taken_b.add(bi)
                used.add(j)
                branches[bi].append((k, j))
                new_open[bi] = j
        for j in range(len(eqs)):
            if j not in used:
                branches.append([(k, j)])
                new_open[len(branches) - 1] = j
        open_ = new_open

    folds, trans, gaps = [], [], []
    # samples sitting exactly on a bifurcation carry a degenerate root; skip them
    regular = [k for k, (_p, eqs) in enumerate(samples) if not any(e.degenerate for e in eqs)]
    for k0, k1 in zip(regular, regular[1:]):
        (p0, e0), (p1, e1) = samples[k0], samples[k1]
        c0, c1 = len(e0), len(e1)
        if abs(c0 - c1) == 2:
            a, b = p0, p1
            for _ in range(refine):
                m = 0.5 * (a + b)
                eqs = _counts(model, param, theta, box, n_starts, seed, m)
                if any(e.degenerate for e in eqs):
                    a = b = m
                    break
                if len(eqs) == c0:
                    a = m
                else:
                    b = m
            folds.append(0.5 * (a + b))
        elif c0 != c1:
            gaps.append(p0)
    for br in branches:
        stab = [(k, samples[k][1][j].stability) for k, j in br]
        stab = [(k, s) for k, s in stab if s != "marginal" and k in regular]
        for (k0, s0), (k1, s1) in zip(stab, stab[1:]):
            if s0 == s1:
                continue
            c_lo = len(samples[k0][1])
            c_hi = len(samples[k1][1])
            if any(abs(len(samples[kk][1]) - c_lo) == 2 for kk in range(k0, k1 + 1)
                   if kk in regular):
                continue  # stability change explained by a fold
            if c_lo != c_hi:
                continue
            trans.append(0.5 * (samples[k0][0] + samples[k1][0]) if k1 - k0 > 1
                         else _bisect_stability(model, param, theta, box, n_starts, seed,
                                                samples, k0, k1, br, refine))
    trans = sorted(set(round(t, 12) for t in trans))
    return BifurcationDiagram(param, samples, branches, sorted(folds), trans, gaps)


def _bisect_stability(model, param, theta, box, n_starts, seed, samples, k0, k1, br,
                      refine):
    p0, p1 = samples[k0][0], samples[k1][0]
    j0 = dict(br)[k0]
    x_ref = samples[k0][1][j0].x
    s0 = samples[k0][1][j0].stability
    a, b = p0, p1
    for _ in range(refine):
        m = 0.5 * (a + b)
        eqs = _counts(model, param, theta, box, n_starts, seed, m)
        if not eqs:
            break
        e = min(eqs, key=lambda q: float(np.max(np.abs(q.x - x_ref))))
        if e.stability == s0:
            a = m
        elif e.stability == "marginal":
            a = b = m
            break
        else:
            b = m
    return 0.5 * (a + b)


def fold_condition_solve(model: NetworkModel, param: str, theta=None,
                         x_range=None, p_range=None, n_starts=(400, 12),
                         tol=1e-9) -> list[float]:
    """Parameter values where f(x, p) = 0 and df/dx(x, p) = 0 for scalar models.

    Hybrid Powell solves of the 2x2 system, started from the critical points
    of f(., p) on an ``n_starts[0]``-point state grid for ``n_starts[1]``
    parameter values; solutions are deduplicated and sorted.  An
    empty list means no fold inside the search box.
    """
    if model.n != 1:
        raise ModelError("fold_condition_solve needs a scalar-state model")
    if param not in model.params:
        raise ModelError(f"parameter {param!r} not in model")
    pinfo = model.params[param]
    if x_range is None:
        x_range = (1e-6, 10.0) if model.positive else (-10.0, 10.0)
    if p_range is None:
        lo = pinfo.lo if np.isfinite(pinfo.lo) else -10.0
        hi = pinfo.hi if np.isfinite(pinfo.hi) else lo + 10.0 if np.isfinite(pinfo.lo) else 10.0
        p_range = (lo, hi)
    th0 = dict(theta or {})

    def F(z):
        x, p = z
        if model.positive and x < 0:
            x = 0.0
        th = dict(th0)
        th[param] = p
        X = np.array([x])
        return np.array([model.rhs(X, th)[0], model.jacobian(X, th)[0, 0]])

    # starts: critical points of f(., p) on a grid of parameter values
    xs = np.linspace(*x_range, n_starts[0])
    starts = []
    for p0 in np.linspace(*p_range, n_starts[1]):
        th = dict(th0)
        th[param] = p0
        d = model.jacobian(xs[:, None], th)[:, 0, 0]
        idx = np.nonzero(np.sign(d[:-1]) * np.sign(d[1:]) <= 0)[0]
        starts += [(0.5 * (xs[i] + xs[i + 1]), p0) for i in idx]
    sols = []
    for x0, p0 in starts:
        try:
            s = root(F, [x0, p0], method="hybr", options={"xtol": 1e-14})
        except (ModelError, FloatingPointError):
            continue
        x, p = s.x
        if not (np.all(np.isfinite(s.x))):
            continue
        if not (x_range[0] - 1e-9 <= x <= x_range[1] + 1e-9 and
                p_range[0] - 1e-9 <= p <= p_range[1] + 1e-9):
            continue
        r = F(s.x)
        if np.all(np.abs(r) < tol):
            sols.append((p, x))
    sols.sort()
    out: list[float] = []
    for p, _x in sols:
        if not out or abs(p - out[-1]) > 1e-7 * max(1.0, abs(p)):
            out.append(float(p))
    return out
