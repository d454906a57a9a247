"""Early-warning and resilience indicators.

Time-series statistics (rolling moments, spectra, entropy, Kendall tau),
escape measures for scalar systems (Kramers rate, mean first passage time),
the recovery exponent of a bifurcating family, the stationary covariance of
a multivariate OU process, and two small probabilistic helpers.

Conventions: the OU reference is dy = -k y dt + sqrt(2 D) dW, whose
stationary variance is D/k and whose two-sided spectral density in angular
frequency is D / (pi (k^2 + omega^2)).  Spectra returned by :func:`psd`
use the same normalization.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg, signal, stats
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.ndimage import gaussian_filter1d

from .model import ModelError, NetworkModel

__all__ = ["RollingSpec", "IndicatorSeries", "Spectrum", "MVOUStationary", "ISPResult",
           "rolling_stats", "psd", "reddening_ratio", "shannon_entropy_gaussian",
           "kendall_tau", "kramers_rate", "mfpt", "recovery_exponent",
           "leading_eigenvalue_family", "mv_ou_stationary", "bayes_ct", "isp_sample_size",
           "isp_classify"]


# ---------------------------------------------------------------- rolling

@dataclass(frozen=True)
class RollingSpec:
    window: int
    stride: int = 1
    detrend: str = "none"  # none | gaussian
    bandwidth: float | None = None  # gaussian sigma in samples; default window/3

    def __post_init__(self):
        if self.window < 4:
            raise ModelError("rolling window must be at least 4 samples")
        if self.stride < 1:
            raise ModelError("stride must be at least 1")
        if self.detrend not in ("none", "gaussian"):
            raise ModelError(f"unknown detrend {self.detrend!r}")

    @property
    def sigma(self) -> float:
        return self.bandwidth if self.bandwidth is not None else self.window / 3.0


@dataclass
class IndicatorSeries:
    times: np.ndarray
    values: np.ndarray
    indicator: str
    spec: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise ModelError("times and values differ in length")


def _series(series, times=None):
    x = np.asarray(series, float)
    if x.ndim == 2 and x.shape[1] == 2 and times is None:
        times, x = x[:, 0], x[:, 1]
    if x.ndim != 1:
        raise ModelError("expected a scalar time series")
    t = np.arange(x.size, dtype=float) if times is None else np.asarray(times, float)
    if t.shape != x.shape:
        raise ModelError("times and values differ in length")
    return t, x


def rolling_stats(series, spec: RollingSpec, times=None) -> dict[str, IndicatorSeries]:
    """Variance, lag-1 autocorrelation, skewness and kurtosis per window.

    Each window [i, i + window) is reported at the time of its last sample.
    AC(1) of a constant window is undefined and reported as NaN.  Kurtosis
    is the excess (Fisher) kurtosis.
    """
    t, x = _series(series, times)
    w = spec.window
    if x.size < w:
        raise ModelError(f"series of length {x.size} is shorter than the window {w}")
    if spec.detrend == "gaussian":
        x = x - gaussian_filter1d(x, spec.sigma, mode="nearest")
    W = np.lib.stride_tricks.sliding_window_view(x, w)[::spec.stride]
    tw = t[w - 1::spec.stride][:len(W)]
    c = W - W.mean(axis=1, keepdims=True)
    m2 = (c * c).mean(axis=1)
    var = m2 * w / (w - 1)
    scale = np.abs(W).max(axis=1)
    flat = m2 <= (1e-14 * np.maximum(scale, 1e-300)) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        ac1 = (c[:, 1:] * c[:, :-1]).sum(axis=1) / (c * c).sum(axis=1)
        skew = (c ** 3).mean(axis=1) / m2 ** 1.5
        kurt = (c ** 4).mean(axis=1) / m2 ** 2 - 3.0
    ac1 = np.where(flat, np.nan, np.clip(ac1, -1.0, 1.0))
    skew = np.where(flat, np.nan, skew)
    kurt = np.where(flat, np.nan, kurt)
    var = np.where(flat, 0.0, var)
    snap = {"window": w, "stride": spec.stride, "detrend": spec.detrend,
            "bandwidth": spec.sigma if spec.detrend == "gaussian" else None}
    return {name: IndicatorSeries(tw, v, name, snap)
            for name, v in (("variance", var), ("ac1", ac1), ("skewness", skew),
                            ("kurtosis", kurt))}


# ---------------------------------------------------------------- spectra

@dataclass
class Spectrum:
    omega: np.ndarray  # angular frequency, >= 0
    S: np.ndarray  # two-sided density in angular frequency
    fs: float

    @property
    def nyquist(self) -> float:
        return math.pi * self.fs

    def total_power(self) -> float:
        """Integral of S over the whole real line (= variance)."""
        return 2.0 * float(np.trapezoid(self.S, self.omega))


def psd(series, fs: float = 1.0, nperseg: int | None = None) -> Spectrum:
    """Welch estimate with a Hann taper and 50% overlap.

    The one-sided density in Hz is converted to the two-sided density in
    angular frequency, S(omega) = P(f) / (4 pi).
    """
    x = np.asarray(series, float)
    if x.ndim != 1 or x.size < 64:
        raise ModelError("psd needs a scalar series of length >= 64")
    if not fs > 0:
        raise ModelError("sample rate must be positive")
    if nperseg is None:
        nperseg = min(x.size, max(64, x.size // 8))
    f, P = signal.welch(x, fs=fs, window="hann", nperseg=nperseg, noverlap=nperseg // 2,
                        detrend="constant", scaling="density")
    return Spectrum(2 * math.pi * f, P / (4 * math.pi), float(fs))


def reddening_ratio(spec: Spectrum, split: float | None = None) -> float:
    """Power below ``split`` (angular) over power above it.

    The default split is 10% of the Nyquist frequency."""
    nyq = spec.nyquist
    s = 0.1 * nyq if split is None else float(split)
    w = spec.omega
    if not w[0] < s < min(nyq, w[-1]):
        raise ModelError(f"split {s} lies outside the resolved band (0, {nyq})")
    Ss = np.interp(s, w, spec.S)
    lo = w < s
    wl, Sl = np.r_[w[lo], s], np.r_[spec.S[lo], Ss]
    wh, Sh = np.r_[s, w[~lo]], np.r_[Ss, spec.S[~lo]]
    return float(np.trapezoid(Sl, wl) / np.trapezoid(Sh, wh))


# ---------------------------------------------------------------- scalar statistics

def shannon_entropy_gaussian(variance) -> float:
    """H = (ln(2 pi Var) + 1) / 2."""
    v = np.asarray(variance, float)
    if np.any(~(v > 0)):
        raise ModelError("variance must be positive")
    h = 0.5 * (np.log(2 * np.pi * v) + 1.0)
    return float(h) if h.ndim == 0 else h


def kendall_tau(series, times=None) -> float:
    """(concordant - discordant) / (M (M - 1) / 2); ties count in neither.

    Pairs are ordered by time, so for distinct times this is tau-a of the
    values against time.  Constant series give 0.
    """
    t, x = _series(series, times)
    M = x.size
    if M < 2:
        raise ModelError("Kendall tau needs at least two points")
    n0 = M * (M - 1) / 2
    _, counts = np.unique(x, return_counts=True)
    n_x = float((counts * (counts - 1) / 2).sum())
    _, counts = np.unique(t, return_counts=True)
    n_t = float((counts * (counts - 1) / 2).sum())
    if n_x == n0 or n_t == n0:
        return 0.0
    tb = stats.kendalltau(t, x, variant="b").statistic
    # tau_b = (C - D) / sqrt((n0 - n_t)(n0 - n_x))
    return float(np.clip(tb * math.sqrt((n0 - n_t) * (n0 - n_x)) / n0, -1.0, 1.0))


# ---------------------------------------------------------------- escape measures

def kramers_rate(potential, x1: float, x2: float, D: float) -> float:
    """sqrt(V''(x1) |V''(x2)|) exp((V(x1) - V(x2)) / D) / (2 pi).

    ``x1`` is the stable well and ``x2`` the barrier top; curvatures are
    central differences on the potential grid.
    """
    if not D > 0:
        raise ModelError("D must be positive")
    c1 = potential.curvature(x1)
    c2 = potential.curvature(x2)
    if not c1 > 0:
        raise ModelError(f"V''(x1) = {c1:.3g} is not positive: x1 is not a well")
    if not c2 < 0:
        raise ModelError(f"V''(x2) = {c2:.3g} is not negative: x2 is not a barrier")
    dV = float(potential.value(x1) - potential.value(x2))
    return math.sqrt(c1 * abs(c2)) * math.exp(dV / D) / (2 * math.pi)


def _scalar_drift(model_1d, theta=None) -> Callable[[float], float]:
    if isinstance(model_1d, NetworkModel):
        if model_1d.n != 1:
            raise ModelError("mfpt needs a scalar model")
        return lambda s: float(model_1d.rhs(np.array([s]), theta)[0])
    return lambda s: float(model_1d(s))


def mfpt(model_1d, diffusion, x1: float, x2: float, reflect: float | None = None,
         theta=None, b_at: str = "y", n_grid: int = 2001) -> float:
    """Mean first passage time from x1 to x2 for dx = a(x) dt + sigma(x) dW.

    ``diffusion`` is B(x) = sigma(x)^2 (callable or constant).  With a
    reflecting boundary at ``reflect`` (default 0 when x1 < x2) and the
    stationary density p(y) proportional to exp(int 2a/B) / B,

        T = 2 int_{x1}^{x2} [int_reflect^y p(z) dz] / (B(y) p(y)) dy.

    For x1 > x2 the mirrored formula is used with ``reflect`` above x1
    (default x1 + 4 |x1 - x2|).  ``b_at="x"`` evaluates B at the starting
    point x1 instead of at y.
    """
    if b_at not in ("x", "y"):
        raise ModelError("b_at must be 'x' or 'y'")
    if x1 == x2:
        return 0.0
    a = _scalar_drift(model_1d, theta)
    B = diffusion if callable(diffusion) else (lambda s, c=float(diffusion): c)
    up = x1 < x2
    if reflect is None:
        reflect = 0.0 if up else x1 + 4 * abs(x1 - x2)
    if up and not reflect < x1 or not up and not reflect > x1:
        raise ModelError("reflecting boundary must lie beyond x1, away from x2")
    lo, hi = (reflect, x2) if up else (x2, reflect)
    g = np.linspace(lo, hi, n_grid)
    Bg = np.array([B(s) for s in g])
    if np.any(~(Bg > 0)):
        raise ModelError("diffusion B(x) must be positive on the working interval")
    h = np.array([2 * a(s) / b for s, b in zip(g, Bg)])
    # Phi(y) = int_lo^y 2a/B, then log p = Phi - ln B
    Phi = np.r_[0.0, np.cumsum(0.5 * (h[1:] + h[:-1]) * np.diff(g))]
    Phi = CubicSpline(g, Phi)
    if not np.all(np.isfinite(Phi(g))):
        raise ModelError("stationary density is not normalizable on the interval")
    Bx = B(x1)

    def inner(y):
        # int_reflect^y p(z) dz / p(y), written with bounded exponents
        f = lambda z: B(y) / B(z) * math.exp(float(Phi(z) - Phi(y)))
        ends = (reflect, y) if up else (y, reflect)
        return quad(f, *ends, limit=200, epsrel=1e-10)[0]

    def outer(y):
        return inner(y) / (B(y) if b_at == "y" else Bx)

    T = 2 * quad(outer, min(x1, x2), max(x1, x2), limit=200, epsrel=1e-9)[0]
    if not np.isfinite(T):
        raise ModelError("stationary density is not normalizable on the interval")
    return float(T)


# ---------------------------------------------------------------- recovery exponent

def leading_eigenvalue_family(model: NetworkModel, param: str, box, theta=None,
                              n_starts: int = 32):
    """Callable p -> Jacobian at the stable equilibrium with the slowest mode."""
    from .dynamics.equilibria import find_equilibria

    def J(p):
        th = dict(theta or {})
        th[param] = p
        eqs = [e for e in find_equilibria(model, th, box=box, n_starts=n_starts)
               if e.stability == "stable"]
        if not eqs:
            raise ModelError(f"no stable equilibrium at {param}={p}")
        e = max(eqs, key=lambda e: e.leading.real)
        return e.jacobian
    return J


def recovery_exponent(family, p_values, p0: float = 0.0) -> dict:
    """alpha from a log-log fit of |Re lambda_lead(p)| against |p - p0|.

    ``family`` maps p to a Jacobian (or directly to the leading eigenvalue).
    """
    p = np.asarray(p_values, float)
    if p.size < 3:
        raise ModelError("need at least three parameter samples")
    lead = []
    for v in p:
        J = np.atleast_2d(np.asarray(family(v), float))
        lead.append(np.max(np.linalg.eigvals(J).real) if J.size > 1 else J[0, 0])
    lead = np.asarray(lead)
    dist = np.abs(p - p0)
    mag = np.abs(lead)
    if np.any(dist == 0) or np.any(mag == 0):
        raise ModelError("samples must avoid the bifurcation point itself")
    order = np.argsort(dist)
    if stats.spearmanr(dist[order], mag[order]).statistic <= 0 or mag[order[0]] >= mag[order[-1]]:
        raise ModelError("leading eigenvalue does not approach zero toward p0")
    slope, icpt = np.polyfit(np.log(dist), np.log(mag), 1)
    resid = np.log(mag) - (slope * np.log(dist) + icpt)
    return {"alpha": float(slope), "prefactor": float(np.exp(icpt)),
            "residual_rms": float(np.sqrt(np.mean(resid ** 2))),
            "p": p, "lead": lead}


# ---------------------------------------------------------------- multivariate OU

@dataclass
class MVOUStationary:
    Sigma: np.ndarray
    Sigma_eig: np.ndarray  # in eigen-coordinates
    eigenvalues: np.ndarray
    Q: np.ndarray | None
    lead: int
    diverging: list
    method: str
    residual: float

    def lagged_covariance(self, lag: float, J: np.ndarray) -> np.ndarray:
        """Cov(X(t + lag), X(t)) = expm(J lag) Sigma."""
        return linalg.expm(np.asarray(J, float) * lag) @ self.Sigma


def mv_ou_stationary(J, Sigma_noise, cond_max: float = 1e8) -> MVOUStationary:
    """Stationary covariance of dX = J X dt + sigma dW with Sigma_noise = sigma sigma^T.

    In eigen-coordinates X' = Q^{-1} X the covariance solves the diagonal
    system vec(S') = [-(L (+) conj L)]^{-1} vec(Q^{-1} Sigma_noise Q^{-H}).
    Ill-conditioned (near-defective) eigenvector bases fall back to a
    direct Lyapunov solve.
    """
    J = np.atleast_2d(np.asarray(J, float))
    Sn = np.atleast_2d(np.asarray(Sigma_noise, float))
    n = J.shape[0]
    if J.shape != (n, n) or Sn.shape != (n, n):
        raise ModelError("J and Sigma_noise must be square of equal size")
    if not np.allclose(Sn, Sn.T, atol=1e-12 * max(1.0, np.abs(Sn).max())):
        raise ModelError("Sigma_noise must be symmetric")
    if np.linalg.eigvalsh(Sn).min() < -1e-12 * max(1.0, np.abs(Sn).max()):
        raise ModelError("Sigma_noise must be positive semidefinite")
    lam, Q = np.linalg.eig(J)
    if np.max(lam.real) >= 0:
        raise ModelError("J is not Hurwitz")
    lead = int(np.argmax(lam.real))
    denom = -(lam[:, None] + lam.conj()[None, :])
    dmin = np.abs(denom).min()
    diverging = [tuple(map(int, ij)) for ij in
                 zip(*np.nonzero(np.abs(denom) <= dmin * (1 + 1e-9)))]
    if np.linalg.cond(Q) > cond_max:
        warnings.warn("Jacobian is (nearly) defective; solving the Lyapunov equation directly",
                      RuntimeWarning, stacklevel=2)
        Sigma = linalg.solve_continuous_lyapunov(J, -Sn)
        Sigma = 0.5 * (Sigma + Sigma.T)
        method, Sp, Qr = "lyapunov", None, None
    else:
        Qi = np.linalg.inv(Q)
        Spn = Qi @ Sn @ Qi.conj().T
        Sp = Spn / denom  # Kronecker-sum inverse, entrywise in eigen-coordinates
        Sigma = (Q @ Sp @ Q.conj().T).real
        Sigma = 0.5 * (Sigma + Sigma.T)
        method, Qr = "eigen", Q
    res = float(np.linalg.norm(J @ Sigma + Sigma @ J.T + Sn))
    return MVOUStationary(Sigma, Sp, lam, Qr, lead, diverging, method, res)


# ---------------------------------------------------------------- probabilistic helpers

def bayes_ct(p_irl_given_ct: float, p_ct: float, p_irl: float) -> dict:
    """P(CT | IRL) = P(IRL | CT) P(CT) / P(IRL).

    Inconsistent inputs giving a posterior above 1 are clipped and flagged.
    """
    for name, v in (("p_irl_given_ct", p_irl_given_ct), ("p_ct", p_ct), ("p_irl", p_irl)):
        if not 0.0 <= v <= 1.0:
            raise ModelError(f"{name} must lie in [0, 1]")
    if p_irl == 0:
        raise ModelError("P(IRL) must be positive")
    post = p_irl_given_ct * p_ct / p_irl
    consistent = post <= 1.0
    if not consistent:
        warnings.warn(f"inconsistent probabilities: posterior {post:.4g} > 1, clipped",
                      RuntimeWarning, stacklevel=2)
    return {"posterior": min(post, 1.0), "raw": post, "consistent": consistent}


@dataclass
class ISPResult:
    p_hat: float
    n: int
    label: str
    eps: float
    conf_delta: float
    gamma_star: float
    scope: str

    def as_dict(self):
        return dict(self.__dict__)


def isp_sample_size(eps: float, conf_delta: float) -> int:
    """Hoeffding: N = ceil(ln(2 / conf_delta) / (2 eps^2))."""
    if not 0 < eps < 1 or not 0 < conf_delta < 1:
        raise ModelError("eps and conf_delta must lie in (0, 1)")
    return math.ceil(math.log(2.0 / conf_delta) / (2.0 * eps * eps) - 1e-12)


def isp_classify(evaluator: Callable, box, eps: float = 0.05, conf_delta: float = 0.05,
                 seed: int = 0, gamma_star: float = 0.95, scope: str = "structural",
                 distribution: str | Callable = "uniform") -> ISPResult:
    """Randomized prevalence of a property over a parameter box.

    ``evaluator`` maps one parameter vector to a bool.  With N Hoeffding
    samples, |p_hat - p| <= eps holds with probability >= 1 - conf_delta.
    The label is ``practically_<scope>`` when p_hat >= gamma_star (scope
    "structural" for the whole family, "robust" for a sub-box) and
    ``indeterminate`` otherwise.
    """
    if scope not in ("structural", "robust"):
        raise ModelError("scope must be 'structural' or 'robust'")
    b = np.atleast_2d(np.asarray(box, float))
    if b.shape[1] != 2 or np.any(b[:, 1] < b[:, 0]):
        raise ModelError("box must be a list of (lo, hi) pairs")
    N = isp_sample_size(eps, conf_delta)
    rng = np.random.default_rng(seed)
    if distribution == "uniform":
        P = b[:, 0] + (b[:, 1] - b[:, 0]) * rng.random((N, len(b)))
    elif callable(distribution):
        P = np.asarray(distribution(rng, N), float).reshape(N, -1)
    else:
        raise ModelError(f"unknown distribution {distribution!r}")
    hits = sum(bool(evaluator(row)) for row in P)
    p = hits / N
    label = f"practically_{scope}" if p >= gamma_star else "indeterminate"
    return ISPResult(p, N, label, eps, conf_delta, gamma_star, scope)
