"""Reaction-network DSL.

One statement per line or ``;``-separated, ``#`` starts a comment::

    species A "activator", B
    param k = 1 in [0.5, 2]
    A + C -> B + D @ g_ac(A, C)
    0 -> A @ a0
    A <-> 2B @ k1*A, k2*B^2

Complexes are ``+``-separated terms ``coef*Species``, ``coef Species``,
``2A`` or ``0`` (also ``∅``) for the empty complex.  A rate is a ``*``-product
of numbers, parameters, species powers ``X^p``, Hill terms

    hill(X, A, beta, h)    A u^h / (1 + u^h),  u = X/beta
    hillr(X, A, beta, h)   A / (1 + u^h)
    mm(X, A, K), mmr(X, A, K)   the h = 1 forms

and opaque monotone functions ``name(X, -Y)`` whose arguments are species,
a leading ``-`` marking a decreasing dependency.  Identifiers that are not
species are parameters.  A reaction with empty reagent and a species-free
rate is an influx.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

from .model import (Factor, Influx, ModelError, NetworkModel, Opaque, Param,
                    RateLaw, Reaction, Species)

__all__ = ["DSLSyntaxError", "parse_crn", "serialize", "to_json", "from_json",
           "load_model", "model_files"]


class DSLSyntaxError(ModelError):
    def __init__(self, msg, line, col):
        super().__init__(f"line {line}, column {col}: {msg}")
        self.line = line
        self.col = col


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<str>"[^"]*")
  | (?P<op><->|->|[+*^@(),;:=\[\]\-/]|∅)
""", re.VERBOSE)

_FUNCS = {"hill": (4, 1), "hillr": (4, -1), "mm": (3, 1), "mmr": (3, -1)}


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(src: str):
    statements: list[list[_Tok]] = []
    cur: list[_Tok] = []
    for ln, line in enumerate(src.splitlines(), start=1):
        line = line.split("#", 1)[0]
        pos = 0
        while pos < len(line):
            mt = _TOKEN.match(line, pos)
            if not mt:
                raise DSLSyntaxError(f"unexpected character {line[pos]!r}",
                                     ln, pos + 1)
            kind = mt.lastgroup
            text = mt.group()
            if kind == "op" and text == ";":
                if cur:
                    statements.append(cur)
                cur = []
            elif kind != "ws":
                cur.append(_Tok(kind, text, ln, pos + 1))
            pos = mt.end()
        if cur:
            statements.append(cur)
        cur = []
    return statements


class _Stream:
    def __init__(self, toks):
        self.toks = toks
        self.i = 0

    def peek(self, k=0):
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def next(self):
        t = self.peek()
        if t is None:
            last = self.toks[-1]
            raise DSLSyntaxError("unexpected end of statement", last.line,
                                 last.col + len(last.text))
        self.i += 1
        return t

    def expect(self, text):
        t = self.next()
        if t.text != text:
            raise DSLSyntaxError(f"expected {text!r}, got {t.text!r}",
                                 t.line, t.col)
        return t

    def done(self):
        return self.i >= len(self.toks)

    def err(self, msg):
        t = self.peek() or self.toks[-1]
        return DSLSyntaxError(msg, t.line, t.col)


def _number(st: _Stream) -> float:
    sign = 1.0
    if st.peek() is not None and st.peek().text == "-":
        st.next()
        sign = -1.0
    t = st.next()
    if t.kind == "num":
        return sign * float(t.text)
    if t.kind == "id" and t.text in ("inf", "Inf"):
        return sign * math.inf
    raise DSLSyntaxError(f"expected number, got {t.text!r}", t.line, t.col)


def _complex(st: _Stream, stop: set[str]):
    terms: dict[str, int] = {}
    pos: list[tuple[str, _Tok]] = []
    first = True
    while True:
        t = st.peek()
        if t is None or t.text in stop:
            if first:
                raise st.err("empty complex (use 0)")
            break
        if not first:
            st.expect("+")
        first = False
        t = st.next()
        if t.text == "-":
            raise DSLSyntaxError("negative stoichiometry", t.line, t.col)
        if t.text in ("0", "∅") and (st.peek() is None or st.peek().text in stop | {"+"}):
            continue
        coef = 1
        if t.kind == "num":
            v = float(t.text)
            if v != int(v):
                raise DSLSyntaxError("stoichiometric coefficients must be integers",
                                     t.line, t.col)
            coef = int(v)
            if st.peek() is not None and st.peek().text == "*":
                st.next()
            t = st.next()
        if t.kind != "id":
            raise DSLSyntaxError(f"expected species, got {t.text!r}", t.line, t.col)
        terms[t.text] = terms.get(t.text, 0) + coef
        pos.append((t.text, t))
    return {k: v for k, v in terms.items() if v}, pos


def _term(st: _Stream):
    """number or identifier argument of a Hill/MM call."""
    t = st.peek()
    if t.kind == "num" or t.text == "-":
        return _number(st)
    t = st.next()
    if t.kind != "id":
        raise DSLSyntaxError(f"expected parameter or number, got {t.text!r}",
                             t.line, t.col)
    return t.text


def _rate(st: _Stream, stop: set[str]):
    """Parse a product expression into raw items for later resolution."""
    items = []
    while True:
        t = st.next()
        if t.kind == "num":
            items.append(("num", float(t.text), t))
        elif t.kind == "id":
            nxt = st.peek()
            if nxt is not None and nxt.text == "(":
                st.next()
                args = []
                if t.text in _FUNCS:
                    nargs, sign = _FUNCS[t.text]
                    sp = st.next()
                    if sp.kind != "id":
                        raise DSLSyntaxError("first argument must be a species",
                                             sp.line, sp.col)
                    args.append(sp)
                    for _ in range(nargs - 1):
                        st.expect(",")
                        args.append(_term(st))
                    st.expect(")")
                    items.append(("hill", (t.text, sign, args), t))
                else:
                    while True:
                        s = 1
                        a = st.next()
                        if a.text == "-":
                            s = -1
                            a = st.next()
                        elif a.text == "+":
                            a = st.next()
                        if a.kind != "id":
                            raise DSLSyntaxError("opaque arguments must be species",
                                                 a.line, a.col)
                        args.append((a, s))
                        c = st.next()
                        if c.text == ")":
                            break
                        if c.text != ",":
                            raise DSLSyntaxError(f"expected ',' or ')', got {c.text!r}",
                                                 c.line, c.col)
                    items.append(("opaque", (t.text, args), t))
            else:
                pw = 1.0
                if nxt is not None and nxt.text == "^":
                    st.next()
                    pw = _number(st)
                items.append(("sym", (t.text, pw), t))
        else:
            raise DSLSyntaxError(f"unexpected {t.text!r} in rate", t.line, t.col)
        nx = st.peek()
        if nx is None or nx.text in stop:
            break
        if nx.text == "/":
            raise DSLSyntaxError("division is not allowed; use hillr/mmr or an "
                                 "opaque function", nx.line, nx.col)
        st.expect("*")
    return items


def _build_rate(items, species: set[str]) -> tuple[RateLaw, set[str]]:
    const = 1.0
    params: dict[str, float] = {}
    factors = []
    opaque = []
    used: set[str] = set()
    for kind, val, tok in items:
        if kind == "num":
            const *= val
        elif kind == "sym":
            name, pw = val
            if name in species:
                factors.append(Factor("pow", name, pw))
            else:
                params[name] = params.get(name, 0.0) + pw
                used.add(name)
        elif kind == "hill":
            fname, sign, args = val
            sp = args[0]
            if sp.text not in species:
                raise DSLSyntaxError(f"undeclared symbol {sp.text!r}: "
                                     "Hill argument must be a species",
                                     sp.line, sp.col)
            A, beta = args[1], args[2]
            h = args[3] if len(args) == 4 else 1.0
            for a in (A, beta, h):
                if isinstance(a, str):
                    if a in species:
                        raise DSLSyntaxError(f"{a!r} is a species, expected a "
                                             "parameter", tok.line, tok.col)
                    used.add(a)
            if isinstance(A, str):
                params[A] = params.get(A, 0.0) + 1.0
            else:
                const *= A
            factors.append(Factor("hill", sp.text, 1.0, beta, h, sign))
        else:
            fname, args = val
            deps = []
            for a, s in args:
                if a.text not in species:
                    raise DSLSyntaxError(f"undeclared symbol {a.text!r}",
                                         a.line, a.col)
                deps.append((a.text, s))
            opaque.append(Opaque(fname, tuple(deps)))
    rate = RateLaw(const, tuple(sorted(params.items())), tuple(factors),
                   tuple(opaque))
    rate.dependencies()  # sign definiteness
    return rate, used


def parse_crn(text: str, name: str = "") -> NetworkModel:
    """Parse DSL source into a :class:`NetworkModel`."""
    statements = _tokenize(text)
    declared: list[Species] | None = None
    param_decl: dict[str, Param] = {}
    raw = []
    for toks in statements:
        st = _Stream(toks)
        head = toks[0]
        if head.kind == "id" and head.text == "species" and (
                len(toks) == 1 or toks[1].kind == "id"):
            st.next()
            declared = declared or []
            while not st.done():
                t = st.next()
                if t.kind != "id":
                    raise DSLSyntaxError("expected species name", t.line, t.col)
                disp = ""
                if st.peek() is not None and st.peek().kind == "str":
                    disp = st.next().text[1:-1]
                if any(s.id == t.text for s in declared):
                    raise DSLSyntaxError(f"duplicate species {t.text!r}", t.line, t.col)
                declared.append(Species(t.text, disp))
                if not st.done():
                    st.expect(",")
            continue
        if head.kind == "id" and head.text == "param" and len(toks) > 1 and toks[1].kind == "id":
            st.next()
            while not st.done():
                t = st.next()
                if t.kind != "id":
                    raise DSLSyntaxError("expected parameter name", t.line, t.col)
                val, lo, hi = None, 0.0, math.inf
                if st.peek() is not None and st.peek().text == "=":
                    st.next()
                    val = _number(st)
                if st.peek() is not None and st.peek().text == "in":
                    st.next()
                    st.expect("[")
                    lo = _number(st)
                    st.expect(",")
                    hi = _number(st)
                    st.expect("]")
                    if lo > hi:
                        raise DSLSyntaxError("empty parameter box", t.line, t.col)
                param_decl[t.text] = Param(val, lo, hi)
                if not st.done():
                    st.expect(",")
            continue
        label = ""
        if len(toks) > 2 and head.kind == "id" and toks[1].text == ":":
            label = head.text
            st.next()
            st.next()
        lhs, lpos = _complex(st, {"->", "<->"})
        arrow = st.next()
        if arrow.text not in ("->", "<->"):
            raise DSLSyntaxError("expected '->'", arrow.line, arrow.col)
        rhs, rpos = _complex(st, {"@"})
        st.expect("@")
        r1 = _rate(st, {","})
        r2 = None
        if arrow.text == "<->":
            st.expect(",")
            r2 = _rate(st, set())
        if not st.done():
            raise st.err("trailing input")
        raw.append((lhs, rhs, r1, head, lpos + rpos, label))
        if r2 is not None:
            raw.append((rhs, lhs, r2, head, rpos + lpos, label + "_rev" if label else ""))

    if declared is not None:
        ids = [s.id for s in declared]
        for lhs, rhs, _, _, pos, _l in raw:
            for sp, tok in pos:
                if sp not in ids:
                    raise DSLSyntaxError(f"undeclared species {sp!r}",
                                         tok.line, tok.col)
        species_list = declared
    else:
        ids = []
        for lhs, rhs, items, _, pos, _l in raw:
            for sp, _ in pos:
                if sp not in ids:
                    ids.append(sp)
        spset = set(ids)
        # arguments of function calls in rates are species by construction
        for items in [r[2] for r in raw]:
            for kind, val, tok in items:
                if kind == "opaque":
                    for a, _s in val[1]:
                        if a.text not in spset and a.text not in param_decl:
                            ids.append(a.text)
                            spset.add(a.text)
                elif kind == "hill":
                    a = val[2][0]
                    if a.text not in spset and a.text not in param_decl:
                        ids.append(a.text)
                        spset.add(a.text)
        species_list = [Species(s) for s in ids]
    spset = {s.id for s in species_list}
    for p in param_decl:
        if p in spset:
            raise ModelError(f"{p!r} declared both as species and parameter")

    reactions = []
    influxes = []
    used_params: list[str] = []
    for j, (lhs, rhs, items, head, _pos, given) in enumerate(raw):
        rate, used = _build_rate(items, spset)
        for u in sorted(used):
            if u not in used_params:
                used_params.append(u)
        label = given or _label(items)
        if not lhs and rate.is_constant():
            if len(rhs) != 1 or next(iter(rhs.values())) != 1:
                raise DSLSyntaxError("influx must produce a single species "
                                     "with coefficient 1", head.line, head.col)
            influxes.append(Influx(next(iter(rhs)), rate, label))
            continue
        reactions.append(Reaction(tuple(lhs.items()), tuple(rhs.items()), rate, label))
    params = dict(param_decl)  # declaration order first, then inferred symbols
    for p in used_params:
        params.setdefault(p, Param())
    return NetworkModel(tuple(species_list), tuple(reactions), tuple(influxes),
                        params, name)


def _label(items):
    for kind, val, _ in items:
        if kind == "opaque":
            return val[0]
    return ""


# serialization

def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _fmt_complex(c) -> str:
    if not c:
        return "0"
    return " + ".join(sp if k == 1 else f"{k}*{sp}" for sp, k in c)


def _fmt_rate(r: RateLaw) -> str:
    parts = []
    if r.const != 1.0 or not (r.params or r.factors or r.opaque):
        parts.append(_fmt(r.const))
    hill_A: dict[str, float] = {}
    for f in r.factors:
        if f.kind == "pow":
            if isinstance(f.power, str):
                raise ModelError("symbolic exponents are not serializable")
            parts.append(f.species if f.power == 1 else f"{f.species}^{_fmt(f.power)}")
        else:
            h1 = not isinstance(f.hill, str) and f.hill == 1.0
            fn = ("mm" if h1 else "hill") + ("" if f.sign > 0 else "r")
            args = [f.species, "1", _fmt(f.scale)] + ([] if h1 else [_fmt(f.hill)])
            parts.append(f"{fn}({', '.join(args)})")
    for name, pw in r.params:
        parts.append(name if pw == 1 else f"{name}^{_fmt(pw)}")
    for op in r.opaque:
        args = ", ".join(sp if s > 0 else f"-{sp}" for sp, s in op.deps)
        parts.append(f"{op.name}({args})")
    return " * ".join(parts)


def _lab(label, rate):
    if not label or label == _label([("opaque", (o.name, None), None)
                                     for o in rate.opaque]):
        return ""
    return f"{label}: "


def serialize(model: NetworkModel) -> str:
    """DSL text that parses back to a structurally equal model."""
    if model.custom is not None:
        raise ModelError("custom vector fields cannot be serialized")
    lines = []
    if model.n:
        lines.append("species " + ", ".join(
            s.id + (f' "{s.display_name}"' if s.display_name else "")
            for s in model.species))
    for name, p in model.params.items():
        s = name
        if p.value is not None:
            s += f" = {_fmt(p.value)}"
        if (p.lo, p.hi) != (0.0, math.inf):
            s += f" in [{_fmt(p.lo)}, {_fmt(p.hi)}]"
        lines.append("param " + s)
    for inf in model.influxes:
        lines.append(_lab(inf.label, inf.rate)
                     + f"0 -> {inf.species} @ {_fmt_rate(inf.rate)}")
    for rx in model.reactions:
        lines.append(_lab(rx.label, rx.rate)
                     + f"{_fmt_complex(rx.reagent)} -> {_fmt_complex(rx.product)}"
                     f" @ {_fmt_rate(rx.rate)}")
    return "\n".join(lines) + "\n"


def to_json(model: NetworkModel) -> str:
    """JSON document ``{species, reactions[], params{}}``."""
    def jnum(v):
        return None if v is None else (str(v) if math.isinf(v) else v)

    doc = {
        "name": model.name,
        "species": [{"id": s.id, "display_name": s.display_name}
                    for s in model.species],
        "reactions": [{"reagent": dict(r.reagent), "product": dict(r.product),
                       "rate": _fmt_rate(r.rate), "label": r.label}
                      for r in model.reactions]
        + [{"reagent": {}, "product": {i.species: 1}, "rate": _fmt_rate(i.rate),
            "label": i.label} for i in model.influxes],
        "params": {k: {"value": p.value, "lo": jnum(p.lo), "hi": jnum(p.hi)}
                   for k, p in model.params.items()},
    }
    return json.dumps(doc, indent=2, sort_keys=False)


def from_json(text: str) -> NetworkModel:
    doc = json.loads(text)
    lines = []
    sp = doc.get("species", [])
    if sp:
        lines.append("species " + ", ".join(
            s["id"] + (f' "{s["display_name"]}"' if s.get("display_name") else "")
            for s in sp))
    for k, p in doc.get("params", {}).items():
        s = k
        if p.get("value") is not None:
            s += f" = {_fmt(float(p['value']))}"
        lo = float(p.get("lo", 0.0))
        hi = float(p.get("hi", math.inf))
        if (lo, hi) != (0.0, math.inf):
            s += f" in [{_fmt(lo)}, {_fmt(hi)}]"
        lines.append("param " + s)
    for r in doc.get("reactions", []):
        lhs = tuple(r.get("reagent", {}).items())
        rhs = tuple(r.get("product", {}).items())
        lab = f"{r['label']}: " if r.get("label") else ""
        lines.append(f"{lab}{_fmt_complex(lhs)} -> {_fmt_complex(rhs)} @ {r['rate']}")
    return parse_crn("\n".join(lines), doc.get("name", ""))


_MODEL_DIR = Path(__file__).with_name("models")


def model_files() -> dict[str, Path]:
    return {p.stem: p for p in sorted(_MODEL_DIR.glob("*.crn"))}


def load_model(path_or_name: str) -> NetworkModel:
    """Load a ``.crn`` file or a bundled model by name."""
    p = Path(path_or_name)
    if not p.exists():
        files = model_files()
        if path_or_name not in files:
            raise ModelError(f"no model file {path_or_name!r}")
        p = files[path_or_name]
    return parse_crn(p.read_text(), p.stem)
