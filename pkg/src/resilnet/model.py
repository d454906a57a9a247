"""Network model types and numeric evaluation.

A model is a list of reactions ``reagent -> product @ rate`` over ``n`` species
together with constant influxes.  The vector field is

    f(x, theta) = S g(x, theta) + g0(theta)

where column ``j`` of the stoichiometric matrix ``S`` is product minus reagent
stoichiometry of reaction ``j`` and ``g_j`` is its rate.

Every rate is a coefficient (a number times a product of parameter powers)
multiplied by univariate factors of single species.  Factors are powers
``x^p`` or Hill terms in ``u = x/beta``.  Opaque monotone functions are
represented for numerics by a fixed surrogate that has the declared
monotonicity: ``x`` for increasing dependencies and ``1/(1+x)`` for
decreasing ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

__all__ = [
    "ModelError",
    "DomainError",
    "SignDefinitenessError",
    "Species",
    "Param",
    "Factor",
    "Opaque",
    "RateLaw",
    "Reaction",
    "Influx",
    "CustomField",
    "NetworkModel",
    "SignPattern",
    "numeric_vector_field",
    "jacobian_sign_pattern",
]

Term = "float | str"


class ModelError(Exception):
    """Invalid model or unresolved symbol."""


class DomainError(ModelError):
    """State outside the model domain (e.g. negative concentration)."""


class SignDefinitenessError(ModelError):
    """A dependency or Jacobian entry has no definite sign."""

    def __init__(self, msg, pair=None):
        super().__init__(msg)
        self.pair = pair


@dataclass(frozen=True)
class Species:
    id: str
    display_name: str = ""

    @property
    def name(self) -> str:
        return self.display_name or self.id


@dataclass(frozen=True)
class Param:
    value: float | None = None
    lo: float = 0.0
    hi: float = math.inf


@dataclass(frozen=True)
class Factor:
    """Univariate factor.  ``kind`` is ``"pow"`` or ``"hill"``.

    pow:  x**power
    hill: A-free Hill term, u**h/(1+u**h) (sign=+1) or 1/(1+u**h) (sign=-1)
          with u = x/scale
    """

    kind: str
    species: str
    power: float | str = 1.0
    scale: float | str = 1.0
    hill: float | str = 1.0
    sign: int = 1


@dataclass(frozen=True)
class Opaque:
    """Unknown monotone function of the listed species."""

    name: str
    deps: tuple[tuple[str, int], ...]


@dataclass(frozen=True)
class RateLaw:
    const: float = 1.0
    params: tuple[tuple[str, float], ...] = ()
    factors: tuple[Factor, ...] = ()
    opaque: tuple[Opaque, ...] = ()
    custom: int | None = None  # index of component of a CustomField

    def dependencies(self) -> dict[str, int]:
        """Species the rate depends on, mapped to the sign of the partial."""
        deps: dict[str, int] = {}

        def add(sp, s):
            if s == 0:
                return
            prev = deps.get(sp)
            if prev is not None and prev != s:
                raise SignDefinitenessError(
                    f"rate is not monotone in {sp}", pair=(sp, sp))
            deps[sp] = s

        for fac in self.factors:
            if fac.kind == "pow":
                p = fac.power
                if isinstance(p, str):
                    add(fac.species, 1)
                elif p != 0:
                    add(fac.species, 1 if p > 0 else -1)
            else:
                add(fac.species, fac.sign)
        for op in self.opaque:
            for sp, s in op.deps:
                add(sp, s)
        return deps

    def species(self) -> set[str]:
        out = {f.species for f in self.factors}
        for op in self.opaque:
            out.update(sp for sp, _ in op.deps)
        return out

    def kind(self, reagent: Mapping[str, int] | None = None) -> str:
        if self.custom is not None:
            return "custom"
        if self.opaque:
            return "opaque-monotone" if not self.factors else "product"
        hills = [f for f in self.factors if f.kind == "hill"]
        pows = [f for f in self.factors if f.kind == "pow"]
        if not hills:
            if reagent is not None:
                want = {k: v for k, v in reagent.items() if v}
                have: dict[str, float] = {}
                for f in pows:
                    if isinstance(f.power, str):
                        return "product"
                    have[f.species] = have.get(f.species, 0.0) + f.power
                if {k: float(v) for k, v in want.items()} == have:
                    return "mass-action"
                return "product"
            return "mass-action"
        if len(hills) == 1 and not pows:
            h = hills[0]
            if not isinstance(h.hill, str) and h.hill == 1.0:
                return "michaelis-menten"
            return "hill"
        return "product"

    def uses_params(self) -> set[str]:
        out = {p for p, _ in self.params}
        for f in self.factors:
            for t in (f.power, f.scale, f.hill):
                if isinstance(t, str):
                    out.add(t)
        return out

    def is_constant(self) -> bool:
        return self.custom is None and not self.factors and not self.opaque


@dataclass(frozen=True)
class Reaction:
    reagent: tuple[tuple[str, int], ...]
    product: tuple[tuple[str, int], ...]
    rate: RateLaw
    label: str = ""

    def reagent_dict(self) -> dict[str, int]:
        return dict(self.reagent)

    def product_dict(self) -> dict[str, int]:
        return dict(self.product)


@dataclass(frozen=True)
class Influx:
    species: str
    rate: RateLaw
    label: str = ""


@dataclass(frozen=True)
class CustomField:
    """Arbitrary vector field f(x, theta) cast as S = I, g = f.

    Used for normal forms whose right-hand sides are not positive networks.
    ``rhs`` and ``jac`` accept batched states of shape (..., n).
    """

    rhs: Callable
    jac: Callable | None = None


def _key_items(d: Mapping[str, int]) -> tuple[tuple[str, int], ...]:
    return tuple((k, int(v)) for k, v in d.items() if v)


class _Compiled:
    """Rate evaluator for one parameter vector."""

    def __init__(self, model: "NetworkModel", values: dict[str, float]):
        idx = model.index
        m = model.m
        self.k = np.empty(m)
        layers: list[list[tuple]] = []
        for j, rx in enumerate(model.reactions):
            r = rx.rate
            self.k[j] = _coef(r, values)
            facs = list(r.factors)
            for op in r.opaque:
                for sp, s in op.deps:
                    if s > 0:
                        facs.append(Factor("pow", sp, 1.0))
                    else:
                        facs.append(Factor("hill", sp, 1.0, 1.0, 1.0, -1))
            for li, f in enumerate(facs):
                while len(layers) <= li:
                    layers.append([])
                t = 0 if f.kind == "pow" else 1
                layers[li].append((j, idx[f.species], t,
                                   _res(f.power, values), _res(f.scale, values),
                                   _res(f.hill, values), f.sign))
        self.layers = []
        for L in layers:
            a = np.array(L, dtype=float)
            self.layers.append((a[:, 0].astype(int), a[:, 1].astype(int),
                                a[:, 2].astype(int), a[:, 3], a[:, 4],
                                a[:, 5], a[:, 6]))
        self.g0 = np.zeros(model.n)
        for inf in model.influxes:
            self.g0[idx[inf.species]] += _coef(inf.rate, values)

    @staticmethod
    def _eval(x, t, p, beta, h, s, deriv):
        out = np.empty_like(x)
        dout = np.empty_like(x) if deriv else None
        pw = t == 0
        if pw.any():
            xp = x[..., pw]
            pp = p[pw]
            with np.errstate(divide="ignore", invalid="ignore"):
                out[..., pw] = xp ** pp
                if deriv:
                    d = np.where(pp == 0, 0.0, pp * xp ** (pp - 1))
                    d = np.where((pp == 1), 1.0, d)
                    dout[..., pw] = d
        hl = ~pw
        if hl.any():
            xh = x[..., hl]
            bb = beta[hl]
            hh = h[hl]
            ss = s[hl]
            u = xh / bb
            with np.errstate(divide="ignore", invalid="ignore"):
                uh = u ** hh
                act = uh / (1.0 + uh)
                out[..., hl] = np.where(ss > 0, act, 1.0 / (1.0 + uh))
                if deriv:
                    duh = np.where(hh == 1, 1.0, hh * u ** (hh - 1)) / bb
                    d = duh / (1.0 + uh) ** 2
                    dout[..., hl] = np.where(ss > 0, d, -d)
        return out, dout

    def rates(self, X):
        X = np.asarray(X, dtype=float)
        G = np.broadcast_to(self.k, X.shape[:-1] + self.k.shape).copy()
        for rx, sp, t, p, beta, h, s in self.layers:
            v, _ = self._eval(X[..., sp], t, p, beta, h, s, False)
            G[..., rx] *= v
        return G

    def rate_jacobian(self, X):
        """dG/dX with shape (..., m, n)."""
        X = np.asarray(X, dtype=float)
        lead = X.shape[:-1]
        m = self.k.shape[0]
        n = X.shape[-1]
        vals = []
        ders = []
        for rx, sp, t, p, beta, h, s in self.layers:
            v, d = self._eval(X[..., sp], t, p, beta, h, s, True)
            V = np.ones(lead + (m,))
            D = np.zeros(lead + (m,))
            V[..., rx] = v
            D[..., rx] = d
            vals.append(V)
            ders.append(D)
        out = np.zeros(lead + (m, n))
        for li, (rx, sp, *_rest) in enumerate(self.layers):
            others = np.broadcast_to(self.k, lead + (m,)).copy()
            for lj, V in enumerate(vals):
                if lj != li:
                    others = others * V
            contrib = others[..., rx] * ders[li][..., rx]
            # unique reaction index per layer, so plain fancy-index add is safe
            out[..., rx, sp] += contrib
        return out


def _res(t, values):
    if isinstance(t, str):
        if t not in values or values[t] is None:
            raise ModelError(f"unresolved symbol: {t}")
        return float(values[t])
    return float(t)


def _coef(r: RateLaw, values) -> float:
    c = float(r.const)
    for name, pw in r.params:
        c *= _res(name, values) ** pw
    return c


@dataclass(frozen=True)
class NetworkModel:
    species: tuple[Species, ...]
    reactions: tuple[Reaction, ...] = ()
    influxes: tuple[Influx, ...] = ()
    params: Mapping[str, Param] = field(default_factory=dict)
    name: str = ""
    custom: CustomField | None = None
    kernel: object | None = None  # optional fast batched evaluator
    positive: bool = True
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        ids = [s.id for s in self.species]
        if len(set(ids)) != len(ids):
            raise ModelError("species ids must be unique")
        object.__setattr__(self, "params", dict(self.params))
        idx = {s: i for i, s in enumerate(ids)}
        object.__setattr__(self, "_index", idx)
        for rx in self.reactions:
            for sp, c in rx.reagent + rx.product:
                if sp not in idx:
                    raise ModelError(f"unknown species {sp}")
                if c < 0:
                    raise ModelError("negative stoichiometry")
            for sp in rx.rate.species():
                if sp not in idx:
                    raise ModelError(f"unknown species {sp} in rate")
        for inf in self.influxes:
            if not inf.rate.is_constant():
                raise ModelError("influx rates must be species independent")
        S = np.zeros((len(ids), len(self.reactions)), dtype=int)
        for j, rx in enumerate(self.reactions):
            for sp, c in rx.product:
                S[idx[sp], j] += c
            for sp, c in rx.reagent:
                S[idx[sp], j] -= c
        S.setflags(write=False)
        object.__setattr__(self, "_S", S)
        object.__setattr__(self, "_cache", {})

    # structure

    @property
    def n(self) -> int:
        return len(self.species)

    @property
    def m(self) -> int:
        return len(self.reactions)

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.species]

    @property
    def index(self) -> dict[str, int]:
        return self._index

    @property
    def S(self) -> np.ndarray:
        return self._S

    @property
    def labels(self) -> list[str]:
        return [rx.label or f"r{j + 1}" for j, rx in enumerate(self.reactions)]

    def param_values(self, theta: Mapping[str, float] | None = None) -> dict:
        vals = {k: p.value for k, p in self.params.items()}
        if theta:
            for k, v in theta.items():
                vals[k] = v
        return vals

    def with_params(self, **values) -> "NetworkModel":
        """Copy with updated nominal parameter values."""
        params = dict(self.params)
        for k, v in values.items():
            p = params.get(k, Param())
            params[k] = Param(float(v), p.lo, p.hi)
        return NetworkModel(self.species, self.reactions, self.influxes,
                            params, self.name, self.custom, self.kernel,
                            self.positive, self.notes)

    def compiled(self, theta=None) -> _Compiled:
        vals = self.param_values(theta)
        key = tuple(sorted((k, v) for k, v in vals.items() if v is not None))
        c = self._cache.get(key)
        if c is None:
            c = _Compiled(self, vals)
            if len(self._cache) > 64:
                self._cache.clear()
            self._cache[key] = c
        return c

    # numerics

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1:] != (self.n,):
            raise ModelError(f"state must have length {self.n}")
        if self.positive and np.any(X < 0):
            raise DomainError("negative state in a positive model")
        return X

    def rates(self, x, theta=None):
        X = self._check(x)
        if self.custom is not None:
            return np.asarray(self.custom.rhs(X, self.param_values(theta)))
        return self.compiled(theta).rates(X)

    def g0(self, theta=None):
        if self.custom is not None:
            return np.zeros(self.n)
        return self.compiled(theta).g0.copy()

    def rhs(self, x, theta=None):
        """Vector field, batched over leading axes of ``x``."""
        X = self._check(x)
        if self.custom is not None:
            return np.asarray(self.custom.rhs(X, self.param_values(theta)),
                              dtype=float)
        c = self.compiled(theta)
        return c.rates(X) @ self.S.T + c.g0

    def jacobian(self, x, theta=None):
        X = self._check(x)
        if self.custom is not None:
            if self.custom.jac is None:
                return self.jacobian_fd(X, theta)
            return np.asarray(self.custom.jac(X, self.param_values(theta)),
                              dtype=float)
        dG = self.compiled(theta).rate_jacobian(X)
        return np.einsum("ij,...jk->...ik", self.S, dG)

    def rate_jacobian(self, x, theta=None):
        X = self._check(x)
        if self.custom is not None:
            return self.jacobian(X, theta)
        return self.compiled(theta).rate_jacobian(X)

    def jacobian_fd(self, x, theta=None, rel=1e-6):
        """Central finite-difference Jacobian of a single state."""
        x = np.asarray(x, dtype=float)
        h = rel * np.maximum(1.0, np.abs(x))
        P = np.eye(self.n) * h
        Xp = x + P
        Xm = x - P
        if self.positive:
            # one-sided near the boundary
            Xm = np.where(Xm < 0, x, Xm)
        fp = self.rhs(Xp, theta)
        fm = self.rhs(Xm, theta)
        dh = (Xp - Xm).diagonal()
        return ((fp - fm) / dh[:, None]).T

    def relabel(self, name: str) -> "NetworkModel":
        return NetworkModel(self.species, self.reactions, self.influxes,
                            self.params, name, self.custom, self.kernel,
                            self.positive, self.notes)


def numeric_vector_field(model: NetworkModel, x, theta=None):
    """Evaluate f(x, theta); see :meth:`NetworkModel.rhs`."""
    return model.rhs(x, theta)


@dataclass(frozen=True)
class SignPattern:
    sigma: np.ndarray  # entries in {-1, 0, 1}
    species: tuple[str, ...] = ()

    def __str__(self):
        ch = {1: "+", -1: "-", 0: "0"}
        return "\n".join(" ".join(ch[int(v)] for v in row) for row in self.sigma)

    @property
    def n(self):
        return self.sigma.shape[0]


def jacobian_sign_pattern(model: NetworkModel) -> SignPattern:
    """Sign of df_i/dx_k from the stoichiometry and rate monotonicity.

    Entry (i, k) collects ``S_ij * sign(dg_j/dx_k)`` over reactions j; a
    mixture of strictly positive and negative contributions is reported as
    non sign-definite.
    """
    if model.custom is not None:
        raise SignDefinitenessError("custom vector fields have no structural sign")
    n = model.n
    pos = np.zeros((n, n), dtype=bool)
    neg = np.zeros((n, n), dtype=bool)
    idx = model.index
    for j, rx in enumerate(model.reactions):
        deps = rx.rate.dependencies()
        col = model.S[:, j]
        for sp, s in deps.items():
            k = idx[sp]
            for i in np.nonzero(col)[0]:
                v = col[i] * s
                if v > 0:
                    pos[i, k] = True
                else:
                    neg[i, k] = True
    bad = np.argwhere(pos & neg)
    if bad.size:
        i, k = map(int, bad[0])
        raise SignDefinitenessError(
            f"entry ({i + 1},{k + 1}) df_{model.ids[i]}/d{model.ids[k]} "
            "has no definite sign", pair=(i, k))
    sigma = pos.astype(int) - neg.astype(int)
    return SignPattern(sigma, tuple(model.ids))
