"""Complexes, linkage classes and deficiency of a reaction network."""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np
import sympy

from ..model import ModelError, NetworkModel

__all__ = ["ComplexDecomposition", "complexes_and_linkage", "deficiency", "full_stoichiometry"]


@dataclass(frozen=True)
class ComplexDecomposition:
    complexes: list[dict[str, int]]
    N: np.ndarray  # n x c
    M: np.ndarray  # c x m, one -1 (source) and one +1 (target) per column
    linkage_classes: list[list[int]]
    weakly_reversible: bool
    species: tuple[str, ...]

    @property
    def c(self) -> int:
        return len(self.complexes)

    @property
    def l(self) -> int:
        return len(self.linkage_classes)

    def complex_str(self, k: int) -> str:
        cx = self.complexes[k]
        if not cx:
            return "0"
        return " + ".join(f"{v}{s}" if v != 1 else s for s, v in cx.items())


def full_stoichiometry(model: NetworkModel) -> np.ndarray:
    """S with one extra column per constant influx (0 -> X)."""
    cols = []
    for inf in model.influxes:
        e = np.zeros(model.n, dtype=int)
        e[model.index[inf.species]] = 1
        cols.append(e)
    if not cols:
        return np.array(model.S)
    return np.column_stack([model.S] + cols)


def _edges(model: NetworkModel):
    for rx in model.reactions:
        yield rx.reagent, rx.product
    for inf in model.influxes:
        yield (), ((inf.species, 1),)


def complexes_and_linkage(model: NetworkModel) -> ComplexDecomposition:
    """Complex graph of ``model``; influxes count as reactions 0 -> X."""
    if model.custom is not None:
        raise ModelError("custom vector fields have no reaction structure")
    edges = list(_edges(model))
    if not edges:
        raise ModelError("model has no reactions")
    order = {s: i for i, s in enumerate(model.ids)}
    keys: dict[tuple, int] = {}

    def key(side):
        k = tuple(sorted(((s, int(c)) for s, c in side if c), key=lambda t: order[t[0]]))
        if k not in keys:
            keys[k] = len(keys)
        return keys[k]

    pairs = [(key(a), key(b)) for a, b in edges]
    c, m = len(keys), len(pairs)
    N = np.zeros((model.n, c), dtype=int)
    for k, j in keys.items():
        for s, v in k:
            N[order[s], j] = v
    M = np.zeros((c, m), dtype=int)
    for r, (a, b) in enumerate(pairs):
        if a == b:
            raise ModelError(f"reaction {r + 1} has identical reagent and product complexes")
        M[a, r] = -1
        M[b, r] = 1
    S = full_stoichiometry(model)
    if not np.array_equal(N @ M, S):
        raise ModelError("internal error: S != N M")
    G = nx.DiGraph()
    G.add_nodes_from(range(c))
    G.add_edges_from(pairs)
    classes = sorted(sorted(cc) for cc in nx.weakly_connected_components(G))
    wr = all(nx.is_strongly_connected(G.subgraph(cc)) for cc in classes)
    complexes = [dict(k) for k in sorted(keys, key=keys.get)]
    N.setflags(write=False)
    M.setflags(write=False)
    return ComplexDecomposition(complexes, N, M, classes, wr, tuple(model.ids))


def _rank(A) -> int:
    return int(sympy.Matrix(np.asarray(A, dtype=int).tolist()).rank()) if np.size(A) else 0


def deficiency(model_or_cd) -> dict:
    """Deficiency by the kernel route and by c - l - rank(S).

    The kernel route computes dim(ker N  cap  col M) = rank M - rank(N M)
    in exact integer arithmetic.  The formula value is always reported but
    ``formula_backed`` is true only for weakly reversible networks.
    """
    cd = model_or_cd if isinstance(model_or_cd, ComplexDecomposition) \
        else complexes_and_linkage(model_or_cd)
    S = cd.N @ cd.M
    rank_S = _rank(S)
    rank_M = _rank(cd.M)
    d_kernel = rank_M - rank_S
    d_formula = cd.c - cd.l - rank_S
    return {
        "c": cd.c, "l": cd.l, "rank_S": rank_S,
        "delta_kernel": int(d_kernel), "delta_formula": int(d_formula),
        "weakly_reversible": cd.weakly_reversible,
        "formula_backed": cd.weakly_reversible,
        "agree": d_kernel == d_formula,
    }
