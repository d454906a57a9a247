"""Smooth noise gate vanishing near an attractor.

    theta(s) = exp(-1/s) for s > 0, else 0
    l(s)     = theta(s) / (theta(s) + theta(1 - s))

The gate weight is l((d - phi)/phi) for a distance d to the attractor: zero
inside the phi-ball, one outside the 2 phi-ball and C-infinity in between.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import ModelError

__all__ = ["bump", "bump_derivative", "Gate", "smooth_gate", "distance_to"]


def _theta(s):
    s = np.asarray(s, float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def bump(s):
    """The transition l(s): 0 for s <= 0, 1 for s >= 1."""
    s = np.asarray(s, float)
    a = _theta(s)
    b = _theta(1.0 - s)
    out = np.where(s >= 1.0, 1.0, 0.0)
    mid = (s > 0) & (s < 1)
    out[mid] = a[mid] / (a[mid] + b[mid])
    return out


def bump_derivative(s):
    s = np.asarray(s, float)
    out = np.zeros_like(s)
    mid = (s > 0) & (s < 1)
    sm = s[mid]
    a = np.exp(-1.0 / sm)
    b = np.exp(-1.0 / (1.0 - sm))
    da = a / sm ** 2
    db = -b / (1.0 - sm) ** 2
    out[mid] = (da * b - a * db) / (a + b) ** 2
    return out


def distance_to(X, A) -> tuple[np.ndarray, np.ndarray]:
    """Sup-norm distance of each state in X (..., n) to the point set A (k, n).

    Returns (distance, index of the nearest point)."""
    X = np.asarray(X, float)
    A = np.atleast_2d(np.asarray(A, float))
    d = np.abs(X[..., None, :] - A).max(axis=-1)
    k = d.argmin(axis=-1)
    return np.take_along_axis(d, k[..., None], -1)[..., 0], k


@dataclass(frozen=True)
class Gate:
    """Noise gate around an attractor.

    ``form="ball"`` uses the sup-norm distance to ``attractor``;
    ``form="product"`` multiplies the scalar gates of every coordinate.
    The two coincide for scalar states.
    """

    attractor: np.ndarray
    phi: float
    form: str = "ball"

    def __post_init__(self):
        if not self.phi > 0:
            raise ModelError("gate radius phi must be positive")
        if self.form not in ("ball", "product"):
            raise ModelError(f"unknown gate form {self.form!r}")
        object.__setattr__(self, "attractor", np.atleast_2d(np.asarray(self.attractor, float)))

    def weight(self, X) -> np.ndarray:
        X = np.asarray(X, float)
        if self.form == "ball":
            d, _ = distance_to(X, self.attractor)
            return bump((d - self.phi) / self.phi)
        _, k = distance_to(X, self.attractor)
        a = self.attractor[k]
        return bump((np.abs(X - a) - self.phi) / self.phi).prod(axis=-1)

    def gradient(self, X) -> np.ndarray:
        """d weight / d x, same shape as X (used by the Milstein correction)."""
        X = np.asarray(X, float)
        d, k = distance_to(X, self.attractor)
        a = self.attractor[k]
        diff = X - a
        if self.form == "ball":
            dl = bump_derivative((d - self.phi) / self.phi) / self.phi
            G = np.zeros_like(X)
            j = np.abs(diff).argmax(axis=-1)
            np.put_along_axis(G, j[..., None], (dl * np.sign(
                np.take_along_axis(diff, j[..., None], -1)[..., 0]))[..., None], -1)
            return G
        s = (np.abs(diff) - self.phi) / self.phi
        g = bump(s)
        dg = bump_derivative(s) * np.sign(diff) / self.phi
        n = X.shape[-1]
        G = np.empty_like(X)
        for i in range(n):
            others = np.delete(g, i, axis=-1).prod(axis=-1)
            G[..., i] = dg[..., i] * others
        return G


def smooth_gate(x, A, phi, form="ball"):
    """Gate weight of state(s) ``x`` for attractor point(s) ``A``."""
    x = np.asarray(x, float)
    if x.ndim == 0:
        x = x[None]
    return Gate(np.atleast_2d(np.asarray(A, float).reshape(-1, x.shape[-1])), phi,
                form).weight(x)
