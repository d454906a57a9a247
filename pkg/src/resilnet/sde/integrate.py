"""Fixed-step stochastic integration with per-trajectory random streams.

Each trajectory k of a run with master seed s draws its Wiener increments
from a Philox generator keyed by (s, k), so any trajectory can be rebuilt
from (s, k) alone.  Batches are always processed in fixed-size chunks of
consecutive indices; the worker count only changes where a chunk runs,
never its arithmetic, which keeps results identical across ``jobs``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..model import ModelError, NetworkModel
from .gate import Gate

__all__ = ["NoiseSpec", "Trajectory", "Ensemble", "simulate", "simulate_ensemble",
           "deterministic_path", "stream", "run_batch", "CHUNK", "SCHEMES"]

CHUNK = 1024
SCHEMES = ("euler_maruyama", "milstein")
_BLOCK = 128  # steps of increments drawn per generator call


@dataclass(frozen=True)
class NoiseSpec:
    """Noise lam * scale * g(x) dW with independent increments per coordinate.

    ``scale`` multiplies lam per coordinate (scalar or length-n).  When
    ``diffusion`` is given it replaces the gate: the coefficient is
    lam * diffusion(x), elementwise, with optional ``diffusion_derivative``.
    """

    lam: float = 0.0
    gate: Gate | None = None
    scale: float | np.ndarray = 1.0
    diffusion: Callable | None = None
    diffusion_derivative: Callable | None = None

    def __post_init__(self):
        if not self.lam >= 0:
            raise ModelError("noise intensity must be nonnegative")

    def coefficient(self, X):
        if self.diffusion is not None:
            return self.lam * np.asarray(self.diffusion(X), float)
        scale = np.asarray(self.scale, float)
        if self.gate is None:
            return np.broadcast_to(self.lam * scale, X.shape).astype(float)
        return self.lam * scale * self.gate.weight(X)[..., None]

    def coefficient_derivative(self, X):
        """d b_i / d x_i, for the diagonal Milstein correction."""
        if self.diffusion is not None:
            if self.diffusion_derivative is not None:
                return self.lam * np.asarray(self.diffusion_derivative(X), float)
            h = 1e-6 * np.maximum(1.0, np.abs(X))
            return self.lam * (np.asarray(self.diffusion(X + h)) -
                               np.asarray(self.diffusion(X - h))) / (2 * h)
        if self.gate is None:
            return np.zeros_like(X)
        return self.lam * np.asarray(self.scale, float) * self.gate.gradient(X)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    seed: int
    index: int
    scheme: str
    dt: float
    clamped: int = 0
    aborted: bool = False


@dataclass
class Ensemble:
    trajectories: list[Trajectory]
    meta: dict = field(default_factory=dict)

    def states(self) -> np.ndarray:
        return np.stack([t.states for t in self.trajectories])


def stream(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator for trajectory ``index`` of master ``seed``."""
    return np.random.Generator(np.random.Philox(key=[int(seed) & (2 ** 64 - 1),
                                                     int(index)]))


class _Drift:
    def __init__(self, model: NetworkModel, theta, dt, drift):
        self.model = model
        self.theta = theta
        k = model.kernel
        if drift == "auto":
            drift = "imex" if k is not None and hasattr(k, "implicit_solver") else "explicit"
        if drift not in ("explicit", "imex"):
            raise ModelError(f"unknown drift treatment {drift!r}")
        if drift == "imex" and (k is None or not hasattr(k, "implicit_solver")):
            raise ModelError("implicit-explicit stepping needs a model kernel")
        self.kind = drift
        if k is not None:
            self.vals = model.param_values(theta)
        if drift == "imex":
            self.solve = k.implicit_solver(dt, self.vals)

    def explicit_part(self, X):
        if self.kind == "imex":
            return self.model.kernel.reaction(X, self.vals)
        if self.model.kernel is not None:
            return self.model.kernel.rhs(X, self.vals)
        return self.model.rhs(X, self.theta)

    def finish(self, Y):
        return self.solve(Y) if self.kind == "imex" else Y


def run_batch(model: NetworkModel, theta, noise: NoiseSpec, X0, dt: float, nsteps: int,
              scheme: str, seed: int, indices, domain: str = "clamp", drift: str = "auto",
              observer=None, record_every: int | None = None):
    """Integrate a batch of trajectories (rows of X0) for ``nsteps`` steps.

    Returns (recorded states or None, clamp counts, aborted flags, observer).
    ``observer.update(k, t, X)`` is called after every step with the batch.
    """
    if scheme not in SCHEMES:
        raise ModelError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    if domain not in ("clamp", "abort"):
        raise ModelError("domain must be 'clamp' or 'abort'")
    X = np.array(X0, dtype=float, copy=True)
    if X.ndim != 2 or X.shape[1] != model.n:
        raise ModelError(f"initial states must have shape (R, {model.n})")
    R, n = X.shape
    D = _Drift(model, theta, dt, drift)
    gens = [stream(seed, int(i)) for i in indices] if noise.lam > 0 else []
    sq = math.sqrt(dt)
    clamped = np.zeros(R, dtype=np.int64)
    alive = np.ones(R, dtype=bool)
    rec = None
    if record_every:
        nrec = nsteps // record_every + 1
        rec = np.empty((R, nrec, n))
        rec[:, 0] = X
    if observer is not None:
        observer.start(X)
    k = 0
    while k < nsteps:
        K = min(_BLOCK, nsteps - k)
        if gens:
            dW = np.stack([g.standard_normal((K, n)) for g in gens], axis=1) * sq
        for b in range(K):
            Y = X + dt * D.explicit_part(X)
            if gens:
                w = dW[b]
                B = noise.coefficient(X)
                Y = Y + B * w
                if scheme == "milstein":
                    Y = Y + 0.5 * B * noise.coefficient_derivative(X) * (w * w - dt)
            Y = D.finish(Y)
            if model.positive:
                neg = Y < 0
                if neg.any():
                    bad = neg.any(axis=1)
                    if domain == "clamp":
                        clamped += neg.sum(axis=1)
                        Y = np.where(neg, 0.0, Y)
                    else:
                        alive &= ~bad
                        Y = np.where(bad[:, None], X, Y)
            if domain == "abort" and not alive.all():
                Y = np.where(alive[:, None], Y, X)
            X = Y
            k += 1
            if observer is not None:
                observer.update(k, k * dt, X)
            if rec is not None and k % record_every == 0:
                rec[:, k // record_every] = X
    return rec, clamped, ~alive, observer


def _chunk_job(args):
    return run_batch(*args[:-2], observer=args[-2], record_every=args[-1])


def simulate_ensemble(model: NetworkModel, theta, noise: NoiseSpec, x0, dt: float, T: float,
                      scheme: str = "euler_maruyama", seed: int = 0, n: int | None = None,
                      indices=None, domain: str = "clamp", drift: str = "auto",
                      record_every: int = 1, jobs: int = 1, observer_factory=None,
                      chunk: int = CHUNK):
    """Simulate trajectories from ``x0`` (one state, or one row per trajectory).

    Rows are processed in chunks of ``chunk`` consecutive trajectories;
    ``jobs > 1`` spreads chunks over processes.  With ``observer_factory``
    the per-chunk observers are returned instead of recorded states
    (``record_every=0`` disables recording).
    """
    if not dt > 0 or not T >= dt:
        raise ModelError("need dt > 0 and T >= dt")
    nsteps = int(round(T / dt))
    X0 = np.atleast_2d(np.asarray(x0, float))
    if n is not None:
        if X0.shape[0] == 1:
            X0 = np.repeat(X0, n, axis=0)
        elif X0.shape[0] != n:
            raise ModelError("x0 rows do not match n")
    R = X0.shape[0]
    idx = np.arange(R) if indices is None else np.asarray(indices, dtype=np.int64)
    chunks = [(s, min(R, s + chunk)) for s in range(0, R, chunk)]
    jobs_args = [(model, theta, noise, X0[a:b], dt, nsteps, scheme, seed, idx[a:b], domain,
                  drift, observer_factory(b - a) if observer_factory else None,
                  record_every or None) for a, b in chunks]
    if jobs and jobs > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_chunk_job, jobs_args))
    else:
        results = [_chunk_job(a) for a in jobs_args]
    if observer_factory is not None:
        return [r[3] for r in results]
    times = np.arange(0, nsteps + 1, record_every) * dt
    trajs = []
    for (a, b), (rec, cl, ab, _) in zip(chunks, results):
        for r in range(b - a):
            trajs.append(Trajectory(times, rec[r], int(seed), int(idx[a + r]), scheme, dt,
                                    int(cl[r]), bool(ab[r])))
    return Ensemble(trajs, {"model": model.name, "lam": noise.lam, "dt": dt, "T": T,
                            "scheme": scheme, "seed": int(seed)})


def simulate(model: NetworkModel, theta, noise: NoiseSpec, x0, dt: float, T: float,
             scheme: str = "euler_maruyama", seed: int = 0, index: int = 0,
             domain: str = "clamp", drift: str = "auto", record_every: int = 1) -> Trajectory:
    """Single trajectory ``index`` of master ``seed``."""
    ens = simulate_ensemble(model, theta, noise, np.asarray(x0, float)[None, :], dt, T,
                            scheme, seed, indices=[index], domain=domain, drift=drift,
                            record_every=record_every)
    return ens.trajectories[0]


def deterministic_path(model: NetworkModel, theta, x0, dt: float, T: float,
                       drift: str = "auto", clamp: bool = True) -> np.ndarray:
    """Fixed-step deterministic integration (forward Euler, or the
    implicit-explicit split when the model provides a kernel)."""
    nsteps = int(round(T / dt))
    D = _Drift(model, theta, dt, drift)
    X = np.asarray(x0, float)[None, :].copy()
    out = np.empty((nsteps + 1, model.n))
    out[0] = X[0]
    for k in range(nsteps):
        X = D.finish(X + dt * D.explicit_part(X))
        if clamp and model.positive:
            X = np.where(X < 0, 0.0, X)
        out[k + 1] = X[0]
    return out
