"""Potential landscapes of scalar systems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from ..model import ModelError, NetworkModel

__all__ = ["Potential1D", "potential_1d"]


@dataclass
class Potential1D:
    grid: np.ndarray
    V: np.ndarray
    phi: np.ndarray | None = None
    sigma: float | None = None

    def value(self, x, which="V"):
        y = self.V if which == "V" else self.phi
        if y is None:
            raise ModelError("stochastic potential not computed")
        return np.interp(x, self.grid, y)

    def curvature(self, x, which="V"):
        """Second derivative by central differences on the grid."""
        y = self.V if which == "V" else self.phi
        g = self.grid
        i = int(np.clip(np.searchsorted(g, x), 1, len(g) - 2))
        if abs(g[i - 1] - x) < abs(g[i] - x):
            i = max(i - 1, 1)
        h1 = g[i] - g[i - 1]
        h2 = g[i + 1] - g[i]
        return 2 * (h1 * y[i + 1] - (h1 + h2) * y[i] + h2 * y[i - 1]) / (h1 * h2 * (h1 + h2))


def potential_1d(model: NetworkModel, theta=None, grid=None, sigma=None) -> Potential1D:
    """V with V(grid[0]) = 0 and f = -dV/dx, by adaptive quadrature per cell.

    With ``sigma`` the stochastic potential
    phi(x) = 0.5 ln(sigma) - (1/sigma) * integral_0^x f
    is also returned.
    """
    if model.n != 1:
        raise ModelError("potential_1d needs a scalar-state model")
    if sigma is not None and sigma <= 0:
        raise ModelError("sigma must be positive")
    g = np.asarray(grid, float)
    if g.ndim != 1 or g.size < 2 or np.any(np.diff(g) <= 0):
        raise ModelError("grid must be strictly increasing")
    f = lambda s: float(model.rhs(np.array([s]), theta)[0])
    cells = np.array([quad(f, a, b, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
                      for a, b in zip(g[:-1], g[1:])])
    F = np.r_[0.0, np.cumsum(cells)]  # integral of f from grid[0]
    V = -F
    phi = None
    if sigma is not None:
        F0 = quad(f, 0.0, g[0], epsabs=1e-13, epsrel=1e-12)[0] if g[0] != 0 else 0.0
        phi = 0.5 * np.log(sigma) - (F + F0) / sigma
    return Potential1D(g, V, phi, sigma)
