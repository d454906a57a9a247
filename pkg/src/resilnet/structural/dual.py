"""Dual reaction network with stoichiometric matrix S^T."""

from __future__ import annotations

import numpy as np

from ..model import Factor, ModelError, NetworkModel, Param, RateLaw, Reaction, Species

__all__ = ["dual_network", "network_from_stoichiometry"]


def network_from_stoichiometry(S, species=None, labels=None, name="") -> NetworkModel:
    """Mass-action network whose reaction k has reagents {i : S[i,k] < 0}.

    Rate constants are parameters ``k<index>`` with nominal value 1.
    """
    S = np.asarray(S)
    if S.ndim != 2 or not np.all(S == np.round(S)):
        raise ModelError("stoichiometric matrix must be an integer matrix")
    S = S.astype(int)
    n, m = S.shape
    species = list(species or [f"Y{i + 1}" for i in range(n)])
    labels = list(labels or [f"r{k + 1}" for k in range(m)])
    rxs, params = [], {}
    for k in range(m):
        col = S[:, k]
        reag = tuple((species[i], int(-col[i])) for i in range(n) if col[i] < 0)
        prod = tuple((species[i], int(col[i])) for i in range(n) if col[i] > 0)
        pname = f"k{k + 1}"
        params[pname] = Param(1.0)
        factors = tuple(Factor("pow", s, float(c)) for s, c in reag)
        rxs.append(Reaction(reag, prod, RateLaw(1.0, ((pname, 1.0),), factors), labels[k]))
    return NetworkModel(tuple(Species(s) for s in species), tuple(rxs), (), params, name)


def dual_network(model: NetworkModel) -> NetworkModel:
    """Dual system: species Y_j for each primal reaction, one reaction per
    primal species, stoichiometry S^T, mass-action rates in the reagents."""
    if model.custom is not None:
        raise ModelError("custom vector fields have no stoichiometry")
    if model.m == 0:
        raise ModelError("model has no reactions")
    return network_from_stoichiometry(model.S.T, [f"Y{j + 1}" for j in range(model.m)],
                                      [f"d_{s}" for s in model.ids],
                                      name=f"dual({model.name})")
