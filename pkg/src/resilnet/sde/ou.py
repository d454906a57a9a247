"""Closed-form Ornstein-Uhlenbeck references.

dy = -k y dt + sqrt(2 D) dB, so that the stationary variance is D / k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import ModelError

__all__ = ["OUExact", "ou_exact", "ou_model"]


@dataclass(frozen=True)
class OUExact:
    k: float
    D: float
    mean: np.ndarray
    variance: np.ndarray

    @property
    def stationary_variance(self) -> float:
        return self.D / self.k

    def covariance(self, lag) -> np.ndarray:
        """Stationary autocovariance (D/k) exp(-k |lag|)."""
        return self.D / self.k * np.exp(-self.k * np.abs(np.asarray(lag, float)))

    def psd(self, omega) -> np.ndarray:
        """Two-sided spectral density D / (pi (k^2 + omega^2))."""
        w = np.asarray(omega, float)
        return self.D / (np.pi * (self.k ** 2 + w ** 2))


def ou_exact(k: float, D: float, t, y0: float = 0.0) -> OUExact:
    if not k > 0:
        raise ModelError("OU rate k must be positive")
    if D < 0:
        raise ModelError("OU diffusion D must be nonnegative")
    t = np.asarray(t, float)
    mean = y0 * np.exp(-k * t)
    var = D / k * (1.0 - np.exp(-2.0 * k * t))
    return OUExact(float(k), float(D), mean, var)


def ou_model(k: float = 1.0):
    """Scalar linear drift -k y as a (non-positive) model."""
    from ..model import CustomField, NetworkModel, Param, Species

    def f(X, th):
        return -th["k"] * X

    def j(X, th):
        return np.full(X.shape + (1,), -th["k"])

    return NetworkModel((Species("y"),), (), (), {"k": Param(float(k), 0.0, np.inf)},
                        "ou", custom=CustomField(f, j), positive=False)
