"""Monte Carlo estimators of practical resilience and attraction time.

Paths start from sampled initial conditions in the eps-ball around the
attractor (restricted to its basin) and are integrated with gated noise.
Distances are sup norms to the nearest attractor point.  Each (x0,
realization) pair owns the random stream with index
``i_x0 * n_real + r`` of the master seed, so estimates at different
distances, horizons or noise levels can reuse identical increments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest, qmc

from .model import ModelError, NetworkModel
from .sde.gate import Gate, distance_to
from .sde.integrate import NoiseSpec, run_batch, simulate_ensemble

__all__ = ["ResilienceQuery", "ResilienceEstimate", "AttractionTime",
           "clopper_pearson", "initial_conditions", "basin_filter",
           "estimate_practical_resilience", "estimate_asymptotic_resilience",
           "estimate_attraction_time", "resilience_grid", "spatial_noise_scale"]


@dataclass(frozen=True)
class ResilienceQuery:
    kind: str = "practical"  # practical | asymptotic_practical | attraction_time
    tau: float = 100.0
    gamma: float = 0.95
    delta: float = 0.1
    eps: float | None = None
    nu: float | None = None
    mu: float = 1.0
    metric: str = "sup"
    tail: float = 0.2

    def __post_init__(self):
        if self.kind not in ("practical", "asymptotic_practical", "attraction_time"):
            raise ModelError(f"unknown query kind {self.kind!r}")
        if self.delta < 0:
            raise ModelError("delta must be nonnegative")
        eps = self.delta if self.eps is None else self.eps
        if self.kind == "practical" and not 0 <= eps <= self.delta:
            raise ModelError("need 0 <= eps <= delta")
        if not 0 < self.mu <= 1:
            raise ModelError("mu must lie in (0, 1]")
        if not 0 < self.gamma <= 1:
            raise ModelError("gamma must lie in (0, 1]")
        if not 0 < self.tail < 1:
            raise ModelError("tail fraction must lie in (0, 1)")
        if self.metric != "sup":
            raise ModelError("only the sup-norm metric is implemented")


@dataclass
class ResilienceEstimate:
    p_hat: float  # worst case over initial conditions
    p_pooled: float  # all (x0, realization) pairs together
    per_x0: np.ndarray
    x0: np.ndarray
    interval: tuple[float, float]
    pooled_interval: tuple[float, float]
    n_ic: int
    n_real: int
    attained: bool
    worst_index: int
    meta: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "p_hat": self.p_hat, "p_pooled": self.p_pooled,
            "interval": list(self.interval), "pooled_interval": list(self.pooled_interval),
            "n_ic": self.n_ic, "n_real": self.n_real, "attained": self.attained,
            "worst_x0": self.x0[self.worst_index].tolist(),
            "per_x0": self.per_x0.tolist(), **self.meta,
        }


@dataclass
class AttractionTime:
    tau: np.ndarray  # per x0; inf where not achieved
    worst_case: float
    achieved: bool
    per_x0_achieved: np.ndarray
    x0: np.ndarray
    asymptotic: ResilienceEstimate | None = None
    meta: dict = field(default_factory=dict)
    practical: ResilienceEstimate | None = None  # delta = nu over [0, T), same paths

    def as_dict(self):
        return {"worst_case_tau": self.worst_case if self.achieved else None,
                "achieved": self.achieved,
                "tau": [t if np.isfinite(t) else None for t in self.tau.tolist()],
                **self.meta}


def clopper_pearson(k: int, n: int, conf: float = 0.95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    ci = binomtest(int(k), int(n)).proportion_ci(confidence_level=conf, method="exact")
    return float(ci.low), float(ci.high)


def spatial_noise_scale(model: NetworkModel) -> float:
    """1/sqrt(h) for a spatial semi-discretization with grid step h, else 1.

    Discretizing space-time white noise on a grid of step h gives node noise
    of intensity lambda/sqrt(h); the literal per-node reading uses 1.
    """
    h = getattr(model.kernel, "h", None)
    return 1.0 / math.sqrt(h) if h else 1.0


def _attractor(A, n):
    A = np.atleast_2d(np.asarray(A, float))
    if A.shape[1] != n:
        A = A.reshape(-1, n)
    return A


def initial_conditions(A, eps: float, n_ic: int, seed: int = 0, positive: bool = True):
    """n_ic states in the eps-ball (sup norm) around the first attractor point.

    Scalar states are uniformly spaced on the open interval; higher
    dimensions use a scrambled Halton sequence in the cube.
    """
    a = np.atleast_2d(A)[0]
    n = a.size
    if n_ic < 1:
        raise ModelError("need at least one initial condition")
    if n == 1:
        u = (np.arange(n_ic) + 1.0) / (n_ic + 1.0)
        X = a + eps * (2 * u - 1)[:, None]
    else:
        u = qmc.Halton(n, scramble=True, seed=seed).random(n_ic)
        X = a + eps * (2 * u - 1)
    if positive:
        X = np.maximum(X, 0.0)
    return X


def basin_filter(model, theta, A, X, T_basin=200.0, nu_basin=1e-3, dt=None):
    """Boolean mask of states whose deterministic path ends within nu_basin of A."""
    A = _attractor(A, model.n)
    X = np.atleast_2d(np.asarray(X, float))
    return _basin_mask(model, theta, A, X, T_basin, nu_basin, dt or _default_dt(model))


class _Last:
    def start(self, X):
        self.X = X

    def update(self, k, t, X):
        self.X = X


def _basin_mask(model, theta, A, X, T_basin, nu_basin, dt):
    obs = _Last()
    run_batch(model, theta, NoiseSpec(0.0), X, dt, int(round(T_basin / dt)),
              "euler_maruyama", 0, np.arange(len(X)), observer=obs)
    d, _ = distance_to(obs.X, A)
    return d < nu_basin


def _default_dt(model):
    return 1e-2 if model.kernel is not None else 1e-3


class _Tracker:
    """Streaming path statistics for a batch."""

    def __init__(self, A, deltas, nus, tau, T, tail):
        self.A = A
        self.deltas = np.asarray(deltas, float)
        self.nus = np.asarray(nus, float)
        self.tau = tau
        self.t_tail = T * (1.0 - tail)

    def start(self, X):
        d, _ = distance_to(X, self.A)
        R = len(X)
        self.sup = d.copy()  # sup over [0, tau)
        self.tail_sup = np.zeros(R)
        self.last_out = np.where(d[:, None] > self.nus, 0.0, -np.inf)
        self.dt = None

    def update(self, k, t, X):
        d, _ = distance_to(X, self.A)
        if self.dt is None:
            self.dt = t / k
        if t < self.tau - 1e-12:
            np.maximum(self.sup, d, out=self.sup)
        if t >= self.t_tail - 1e-12:
            np.maximum(self.tail_sup, d, out=self.tail_sup)
        out = d[:, None] > self.nus
        if out.any():
            self.last_out[out] = t


def _run(model, theta, A, lam, gate_phi, gate_form, noise_scale, X0, n_real, dt, T,
         scheme, seed, deltas, nus, tau, tail, jobs):
    A = _attractor(A, model.n)
    gate = Gate(A, gate_phi, gate_form) if gate_phi else None
    noise = NoiseSpec(float(lam), gate, noise_scale)
    starts = np.repeat(X0, n_real, axis=0)
    idx = np.arange(len(starts), dtype=np.int64)
    trackers = simulate_ensemble(
        model, theta, noise, starts, dt, T, scheme, seed, indices=idx, record_every=0,
        jobs=jobs, observer_factory=lambda R: _Tracker(A, deltas, nus, tau, T, tail))
    cat = lambda name: np.concatenate([getattr(t, name) for t in trackers])
    return cat("sup"), cat("tail_sup"), cat("last_out")


def _estimate(success, n_ic, n_real, X0, gamma, conf, meta):
    s = success.reshape(n_ic, n_real)
    frac = s.mean(axis=1)
    w = int(np.argmin(frac))
    k_min = int(s[w].sum())
    tot = int(s.sum())
    p = float(frac[w])
    return ResilienceEstimate(p, tot / s.size, frac, X0, clopper_pearson(k_min, n_real, conf),
                              clopper_pearson(tot, s.size, conf), n_ic, n_real,
                              bool(p >= gamma), w, meta)


def _prepare(model, theta, A, eps, n_ic, seed, x0, basin, T_basin, nu_basin, dt):
    A = _attractor(A, model.n)
    X0 = initial_conditions(A, eps, n_ic, seed, model.positive) if x0 is None \
        else np.atleast_2d(np.asarray(x0, float))
    dropped = 0
    if basin:
        keep = _basin_mask(model, theta, A, X0, T_basin,
                           nu_basin if nu_basin is not None else max(1e-3, 0.01 * eps), dt)
        dropped = int((~keep).sum())
        X0 = X0[keep]
        if len(X0) == 0:
            raise ModelError("no sampled initial condition lies in the basin of attraction")
    return A, X0, dropped


def estimate_practical_resilience(model: NetworkModel, A, lam: float, query: ResilienceQuery,
                                  n_ic: int = 20, n_real: int = 200, seed: int = 0,
                                  theta=None, gate_phi: float | None = 1e-4,
                                  gate_form: str = "ball", noise_scale=1.0, dt=None,
                                  scheme: str = "euler_maruyama", x0=None, basin: bool = True,
                                  T_basin: float = 200.0, nu_basin=None, conf: float = 0.95,
                                  deltas=None, jobs: int = 1):
    """(tau, gamma, delta, eps)-practical resilience.

    Success of a path: sup over [0, tau) of dist(x(t), A) <= delta.  The
    estimate is the minimum success fraction over initial conditions; the
    pooled fraction is reported alongside.  With ``deltas`` a list of
    estimates is returned, one per distance, from the same paths.
    """
    if query.kind != "practical":
        raise ModelError("query kind must be 'practical'")
    dt = dt or _default_dt(model)
    eps = query.delta if query.eps is None else query.eps
    ds = [query.delta] if deltas is None else list(deltas)
    if any(d < eps for d in ds):
        raise ModelError("every delta must be at least eps")
    A, X0, dropped = _prepare(model, theta, A, eps, n_ic, seed, x0, basin, T_basin,
                              nu_basin, dt)
    sup, _, _ = _run(model, theta, A, lam, gate_phi, gate_form, noise_scale, X0, n_real, dt,
                     query.tau, scheme, seed, ds, ds, query.tau, query.tail, jobs)
    out = []
    for d in ds:
        meta = {"kind": "practical", "delta": d, "eps": eps, "tau": query.tau, "lam": lam,
                "dt": dt, "scheme": scheme, "seed": seed, "dropped_outside_basin": dropped}
        out.append(_estimate(sup <= d, len(X0), n_real, X0, query.gamma, conf, meta))
    return out if deltas is not None else out[0]


def estimate_asymptotic_resilience(model: NetworkModel, A, lam: float, delta: float,
                                   T: float, tail: float = 0.2, n_ic: int = 20,
                                   n_real: int = 200, seed: int = 0, theta=None,
                                   eps: float | None = None, gamma: float = 0.95,
                                   gate_phi: float | None = 1e-4, gate_form: str = "ball",
                                   noise_scale=1.0, dt=None, scheme="euler_maruyama",
                                   x0=None, basin: bool = True, T_basin: float = 200.0,
                                   nu_basin=None, conf: float = 0.95, deltas=None,
                                   jobs: int = 1):
    """Asymptotic practical resilience with the limsup proxied by the sup
    over the tail window [T (1 - tail), T]."""
    if not 0 < tail < 1:
        raise ModelError("tail fraction must lie in (0, 1)")
    dt = dt or _default_dt(model)
    e = delta if eps is None else eps
    ds = [delta] if deltas is None else list(deltas)
    A, X0, dropped = _prepare(model, theta, A, e, n_ic, seed, x0, basin, T_basin, nu_basin, dt)
    _, tail_sup, _ = _run(model, theta, A, lam, gate_phi, gate_form, noise_scale, X0, n_real,
                          dt, T, scheme, seed, ds, ds, T, tail, jobs)
    out = []
    for d in ds:
        meta = {"kind": "asymptotic_practical", "delta": d, "eps": e, "T": T, "tail": tail,
                "lam": lam, "dt": dt, "seed": seed, "dropped_outside_basin": dropped}
        out.append(_estimate(tail_sup <= d, len(X0), n_real, X0, gamma, conf, meta))
    return out if deltas is not None else out[0]


def _attraction(last_out, n_ic, n_real, mu, dt, T, tail, X0, meta):
    """tau per x0 from last exit times; achieved when tau <= T (1 - tail)."""
    tau_r = np.where(np.isfinite(last_out), last_out + dt, 0.0).reshape(n_ic, n_real)
    tau_r = np.round(tau_r / dt) * dt
    need = max(1, math.ceil(mu * n_real - 1e-9))
    tau = np.sort(tau_r, axis=1)[:, need - 1]
    limit = T * (1.0 - tail) + 1e-9
    ok = tau <= limit
    tau = np.where(ok, tau, np.inf)
    achieved = bool(ok.all())
    worst = float(tau.max()) if achieved else math.inf
    return AttractionTime(tau, worst, achieved, ok, X0, None, meta)


def estimate_attraction_time(model: NetworkModel, A, lam: float, nu: float, mu: float,
                             T: float, x0=None, n_ic: int = 20, n_real: int = 200,
                             seed: int = 0, theta=None, eps: float | None = None,
                             tail: float = 0.2, gate_phi: float | None = 1e-4,
                             gate_form: str = "ball", noise_scale=1.0, dt=None,
                             scheme="euler_maruyama", basin: bool = True,
                             T_basin: float = 200.0, nu_basin=None, nus=None,
                             jobs: int = 1):
    """(tau, mu, nu)-attraction time per initial condition and worst case.

    tau(x0) is the smallest sampled time after which a fraction >= mu of the
    realizations stays within nu of A up to T.  It counts as achieved only
    when tau(x0) <= T (1 - tail), so that the tail window certifies the
    asymptotic condition; otherwise the result is "not achieved".
    """
    if not 0 < mu <= 1:
        raise ModelError("mu must lie in (0, 1]")
    dt = dt or _default_dt(model)
    e = nu if eps is None else eps
    vs = [nu] if nus is None else list(nus)
    A, X0, dropped = _prepare(model, theta, A, e, n_ic, seed, x0, basin, T_basin, nu_basin, dt)
    sup, tail_sup, last = _run(model, theta, A, lam, gate_phi, gate_form, noise_scale, X0,
                               n_real, dt, T, scheme, seed, vs, vs, T, tail, jobs)
    out = []
    for j, v in enumerate(vs):
        meta = {"kind": "attraction_time", "nu": v, "mu": mu, "eps": e, "T": T, "lam": lam,
                "dt": dt, "seed": seed, "dropped_outside_basin": dropped}
        at = _attraction(last[:, j], len(X0), n_real, mu, dt, T, tail, X0, meta)
        at.asymptotic = _estimate(tail_sup <= v, len(X0), n_real, X0, mu, 0.95,
                                  {"kind": "asymptotic_practical", "delta": v})
        at.practical = _estimate(sup <= v, len(X0), n_real, X0, mu, 0.95,
                                 {"kind": "practical", "delta": v, "eps": e, "tau": T})
        out.append(at)
    return out if nus is not None else out[0]


def resilience_grid(model: NetworkModel, A, lams, deltas, tau: float, eps: float,
                    n_ic: int = 10, n_real: int = 200, seed: int = 0, theta=None,
                    gate_phi=1e-4, gate_form="ball", noise_scale=1.0, dt=None,
                    scheme="euler_maruyama", tail=0.2, basin=True, jobs=1):
    """(delta, lambda) heatmap with common random numbers.

    All cells share the initial conditions (eps-ball) and the random
    streams, so p_hat is exactly nondecreasing in delta.  Returns rows
    (delta, lambda, p_hat, p_pooled, worst-case attraction time or inf)
    with nu = delta and mu = 1.
    """
    dt = dt or _default_dt(model)
    A, X0, _ = _prepare(model, theta, A, eps, n_ic, seed, None, basin, 200.0, None, dt)
    rows = []
    for lam in lams:
        sup, _, last = _run(model, theta, A, lam, gate_phi, gate_form, noise_scale, X0,
                            n_real, dt, tau, scheme, seed, deltas, deltas, tau, tail, jobs)
        for j, d in enumerate(deltas):
            est = _estimate(sup <= d, len(X0), n_real, X0, 1.0, 0.95, {})
            at = _attraction(last[:, j], len(X0), n_real, 1.0, dt, tau, tail, X0, {})
            rows.append((float(d), float(lam), est.p_hat, est.p_pooled, at.worst_case))
    return rows
