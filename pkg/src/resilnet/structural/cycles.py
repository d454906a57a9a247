"""Sign-pattern cycle classification, cooperativity and positivity lints."""

from __future__ import annotations

import itertools

import networkx as nx
import numpy as np

from ..model import ModelError, NetworkModel, SignPattern

__all__ = ["CYCLE_CAP", "cycle_classification", "cooperativity_checks", "positivity_lint",
           "s2c_pattern"]

CYCLE_CAP = 100_000


def _sigma(sp) -> np.ndarray:
    s = sp.sigma if isinstance(sp, SignPattern) else sp
    s = np.asarray(s).astype(int)
    if s.ndim != 2 or s.shape[0] != s.shape[1] or np.any(np.abs(s) > 1):
        raise ModelError("sign pattern must be a square matrix over {-1, 0, 1}")
    return s


def cycle_classification(sp, cap: int = CYCLE_CAP) -> dict:
    """Classify by the signs of the directed cycles of the Jacobian graph.

    Edge k -> i exists when sigma[i, k] != 0; self-loops are excluded.
    """
    s = _sigma(sp)
    n = s.shape[0]
    G = nx.DiGraph()
    G.add_nodes_from(range(n))
    for i, k in zip(*np.nonzero(s)):
        if i != k:
            G.add_edge(int(k), int(i), sign=int(s[i, k]))
    cycles = []
    for cyc in nx.simple_cycles(G):
        cycles.append(cyc)
        if len(cycles) > cap:
            raise ModelError(f"more than {cap} cycles; refusing to enumerate")
    signs = []
    for cyc in cycles:
        sg = 1
        for a, b in zip(cyc, cyc[1:] + cyc[:1]):
            sg *= G[a][b]["sign"]
        signs.append(sg)
    npos = sum(1 for v in signs if v > 0)
    nneg = len(signs) - npos
    if not signs:
        cls = "acyclic"
    elif nneg == 0:
        cls = "strong_candidate_multistationary"
    elif npos == 0:
        cls = "strong_candidate_oscillator"
    else:
        cls = "mixed"
    return {
        "classification": cls,
        "n_cycles": len(signs), "n_positive": npos, "n_negative": nneg,
        "cycles": [(c, sg) for c, sg in zip(cycles, signs)],
        # Thomas-type necessary conditions
        "multistationarity_possible": npos > 0,
        "sustained_oscillation_possible": nneg > 0,
    }


def s2c_pattern(n: int) -> np.ndarray:
    """Required signs of the strongly 2-cooperative pattern (2 = free)."""
    if n < 3:
        raise ModelError("the 2-cooperative pattern needs n >= 3")
    P = np.zeros((n, n), dtype=int)
    np.fill_diagonal(P, 2)
    for i in range(n - 1):
        P[i, i + 1] = 1
        P[i + 1, i] = 1
    P[0, n - 1] = -1
    P[n - 1, 0] = -1
    return P


def cooperativity_checks(sp) -> dict:
    s = _sigma(sp)
    n = s.shape[0]
    off = ~np.eye(n, dtype=bool)
    metzler = bool(np.all(s[off] >= 0))
    s2c = None
    if n >= 3:
        P = s2c_pattern(n)
        ok = True
        for i, k in itertools.product(range(n), repeat=2):
            req = P[i, k]
            if req == 2:
                continue
            if req == 0 and s[i, k] != 0 or req == 1 and s[i, k] < 0 or \
                    req == -1 and s[i, k] > 0:
                ok = False
                break
        G = nx.DiGraph()
        G.add_nodes_from(range(n))
        G.add_edges_from((int(k), int(i)) for i, k in zip(*np.nonzero(s)) if i != k)
        s2c = bool(ok and nx.is_strongly_connected(G))
    return {"is_metzler_offdiag": metzler, "is_strongly_2_cooperative": s2c}


def positivity_lint(model: NetworkModel) -> dict:
    """Structural positivity: g0 >= 0, and each consumed species gates its rate.

    A reaction consuming x_i must have a rate that depends on x_i through a
    factor vanishing at x_i = 0 (a positive power, an activating Hill term or
    an opaque increasing dependence).
    """
    failures = []
    if model.custom is not None:
        return {"passes": False, "failures": ["custom vector field: no rate structure"]}
    for inf in model.influxes:
        # g0 is a nonnegative constant times parameters; a parameter box
        # reaching below zero makes the sign of the influx undetermined
        r = inf.rate
        if r.const < 0 or any(model.params[name].lo < 0 for name, _ in r.params):
            failures.append(f"influx {inf.label or inf.species} can be negative")
    for j, rx in enumerate(model.reactions):
        rate = rx.rate
        for sp, c in rx.reagent:
            if c <= 0:
                continue
            ok = any(f.species == sp and (f.kind == "pow" and
                                          (isinstance(f.power, str) or f.power > 0)
                                          or f.kind == "hill" and f.sign > 0)
                     for f in rate.factors)
            ok = ok or any(dict(op.deps).get(sp, 0) > 0 for op in rate.opaque)
            if not ok:
                failures.append(f"reaction {model.labels[j]} consumes {sp} "
                                f"but its rate does not vanish at {sp}=0")
    return {"passes": not failures, "failures": failures}
