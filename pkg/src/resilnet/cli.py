"""Command-line front end: ``resilnet <group> <command> [options]``.

Every run writes its artifacts atomically into ``--out-dir`` together with
a JSON manifest (``<stem>.manifest.json``) listing the artifacts and their
SHA-256 digests, the command line, the resolved options, the seed, input
file digests and the wall time.  Artifacts themselves never contain
timing or host information, so a fixed seed gives byte-identical files
for any ``--jobs`` value.

Exit codes: 0 success, 1 usage error, 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import os
import sys
import tempfile
import time
import warnings
from enum import Enum
from pathlib import Path

import numpy as np

from . import __version__
from .model import ModelError

EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# ---------------------------------------------------------------- formatting

def _num(v) -> str:
    """Round-trip decimal text for CSV cells."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return repr(f)
    if v is None:
        return ""
    if isinstance(v, Enum):
        return str(v.value)
    return str(v)


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, Enum):
        return o.value
    if isinstance(o, (bool, np.bool_)):
        return bool(o)
    if isinstance(o, (int, np.integer)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        f = float(o)
        return f if math.isfinite(f) else None
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    if isinstance(o, Path):
        return str(o)
    return o


def _json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for r in rows:
        buf.write(",".join(_num(v) for v in r) + "\n")
    return buf.getvalue()


def _sha(path_or_bytes) -> str:
    h = hashlib.sha256()
    if isinstance(path_or_bytes, (bytes, bytearray)):
        h.update(path_or_bytes)
    else:
        with open(path_or_bytes, "rb") as fh:
            for block in iter(lambda: fh.read(1 << 16), b""):
                h.update(block)
    return h.hexdigest()


class Run:
    """Artifact collector for one invocation."""

    def __init__(self, args, argv):
        self.args = args
        self.argv = list(argv)
        self.out = Path(args.out_dir)
        self.artifacts: list[tuple[str, str]] = []
        self.inputs: dict[str, str] = {}
        self.t0 = time.perf_counter()

    def path(self, name: str) -> Path:
        p = Path(name)
        return p if p.is_absolute() else self.out / p

    def write(self, name: str, text: str):
        p = self.path(name)
        p.parent.mkdir(parents=True, exist_ok=True)
        data = text.encode("utf-8")
        fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=f".{p.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, p)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self.artifacts.append((str(p), _sha(data)))
        return p

    def emit(self, stem: str, obj=None, header=None, rows=None):
        """Write a table (CSV, or JSON records) or a JSON document."""
        fmt = self.args.format
        if rows is not None:
            rows = list(rows)
            if fmt == "csv":
                return self.write(f"{stem}.csv", _csv_text(header, rows))
            recs = [dict(zip(header, r)) for r in rows]
            return self.write(f"{stem}.json", _json_text(recs if obj is None else
                                                         {**obj, "rows": recs}))
        return self.write(f"{stem}.json", _json_text(obj))

    def track_input(self, path):
        if path and os.path.isfile(path):
            self.inputs[str(path)] = _sha(path)

    def manifest(self, stem: str):
        cfg = {k: v for k, v in vars(self.args).items() if k != "func"}
        man = {
            "tool": "resilnet", "version": __version__,
            "command_line": ["resilnet", *self.argv],
            "config": cfg, "seed": self.args.seed,
            "inputs": self.inputs,
            "artifacts": [{"path": p, "sha256": h} for p, h in self.artifacts],
            "wall_time_s": round(time.perf_counter() - self.t0, 6),
        }
        p = self.path(f"{stem}.manifest.json")
        p.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=f".{p.name}.", suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            fh.write(_json_text(man))
        os.replace(tmp, p)
        return p


# ---------------------------------------------------------------- argument helpers

def _kv(text: str | None) -> dict[str, float]:
    out: dict[str, float] = {}
    if not text:
        return out
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ModelError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = float(v)
    return out


def _floats(text) -> list[float]:
    if text is None:
        return []
    if isinstance(text, (int, float)):
        return [float(text)]
    return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]


def _range(text: str, need_steps=False):
    parts = text.split(":")
    if len(parts) not in (2, 3) or (need_steps and len(parts) != 3):
        raise ModelError(f"range must be lo:hi{':steps' if need_steps else '[:steps]'}, "
                         f"got {text!r}")
    lo, hi = float(parts[0]), float(parts[1])
    steps = int(parts[2]) if len(parts) == 3 else None
    if not hi > lo:
        raise ModelError("range needs hi > lo")
    return lo, hi, steps


def _matrix(text: str) -> np.ndarray:
    if os.path.isfile(text):
        return np.loadtxt(text, delimiter=",", ndmin=2)
    rows = [r for r in text.split(";") if r.strip()]
    return np.array([[float(v) for v in r.split(",")] for r in rows])


def _load_model(run: Run, spec: str | None = None, params: str | None = None):
    from .builtins import builtin
    from .dsl import from_json, load_model
    spec = spec or run.args.model
    if not spec:
        raise ModelError("a model is required (--model NAME|FILE)")
    vals = _kv(params if params is not None else getattr(run.args, "params", None))
    p = Path(spec)
    if p.is_file():
        run.track_input(p)
        model = from_json(p.read_text()) if p.suffix == ".json" else load_model(str(p))
        unknown = set(vals) - set(model.params)
        if unknown:
            raise ModelError(f"unknown parameters: {sorted(unknown)}")
        return model.with_params(**vals) if vals else model
    return builtin(spec, vals)


def _box(run: Run, model):
    text = getattr(run.args, "box", None) or "0:10"
    parts = [p for p in text.split(",") if p]
    box = []
    for part in parts:
        lo, hi, _ = _range(part)
        box.append((lo, hi))
    if len(box) == 1:
        box = box * model.n
    if len(box) != model.n:
        raise ModelError(f"box needs 1 or {model.n} intervals")
    return box


def _is_turing(model):
    from .dynamics.turing import LevinSegelKernel
    return isinstance(model.kernel, LevinSegelKernel)


def _attractor(run: Run, model, theta=None):
    """``auto``: the stable Turing pattern for Levin-Segel models, otherwise
    the stable equilibrium with the largest sup norm inside ``--box``."""
    text = getattr(run.args, "attractor", "auto") or "auto"
    if text != "auto":
        A = np.array(_floats(text), float)
        if A.size % model.n:
            raise ModelError(f"attractor must have a multiple of {model.n} values")
        return A.reshape(-1, model.n)
    if _is_turing(model):
        from .dynamics.turing import turing_pattern_equilibrium
        eq = turing_pattern_equilibrium(model, init="random", seed=0)
        return eq.x[None, :]
    from .dynamics.equilibria import find_equilibria
    eqs = [e for e in find_equilibria(model, theta, box=_box(run, model), seed=0)
           if e.stability == "stable"]
    if not eqs:
        raise ModelError("no stable equilibrium found in the box; pass --attractor")
    return max(eqs, key=lambda e: float(np.abs(e.x).max())).x[None, :]


def _noise_scale(run: Run, model):
    s = getattr(run.args, "noise_scale", "literal")
    if s == "literal":
        return 1.0
    if s == "spacetime":
        from .resilience import spatial_noise_scale
        return spatial_noise_scale(model)
    return float(s)


# ---------------------------------------------------------------- struct

def _text_table(header, rows) -> str:
    cells = [list(map(str, header))] + [[_num(v) for v in r] for r in rows]
    w = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "\n".join("  ".join(c.ljust(w[i]) for i, c in enumerate(r)) for r in cells)


def cmd_struct(run: Run):
    from . import structural as st
    from .model import jacobian_sign_pattern
    a = run.args
    model = _load_model(run, a.model_pos or a.model)
    what = a.what
    stem = a.out or f"struct_{what}"
    if what == "deficiency":
        cd = st.complexes_and_linkage(model)
        res = st.deficiency(cd)
        res["complexes"] = [cd.complex_str(i) for i in range(cd.c)]
        res["linkage_classes"] = cd.linkage_classes
        print(_text_table(["quantity", "value"], [(k, res[k]) for k in
                          ("c", "l", "rank_S", "delta_kernel", "delta_formula",
                           "weakly_reversible")]))
    elif what in ("bdc", "edf"):
        if what == "bdc":
            d = st.bdc_decompose(model)
            res = {"B": d.B, "C": d.C, "delta_labels": d.delta_labels, "q": d.q,
                   "species": model.ids}
        else:
            d = st.edf_decompose(model)
            res = {"E": d.E, "F": d.F, "delta_labels": d.delta_labels,
                   "reactions": model.labels}
        print(f"{what.upper()}: q = {len(d.delta_labels)}")
    elif what == "dual":
        from .dsl import serialize
        dual = st.dual_network(model)
        res = {"species": dual.ids, "S": dual.S, "crn": serialize(dual)}
        print(serialize(dual), end="")
    elif what == "detsign":
        d = st.bdc_decompose(model)
        sign, info = st.structural_det_sign(d, _bounds(run, d), details=True)
        res = {"det_sign": sign, **info}
        print(f"det(-J) structural sign: {sign.value}")
    elif what == "influence":
        d = st.bdc_decompose(model)
        e, h = _index(model, a.e), _index(model, a.h)
        sign = st.steady_state_influence(d, e, h, _bounds(run, d))
        res = {"input_equation": model.ids[e], "output_variable": model.ids[h],
               "sign": sign}
        print(f"influence of input on d{model.ids[e]}/dt on {model.ids[h]}: {sign}")
    elif what == "ssim":
        d = st.bdc_decompose(model)
        M = st.ssim(d, _bounds(run, d))
        res = {"species": model.ids, "ssim": [[str(v) for v in r] for r in M]}
        print(_text_table(["", *model.ids], [(s, *map(str, r)) for s, r in zip(model.ids, M)]))
    elif what == "hurwitz":
        d = st.bdc_decompose(model)
        b = _bounds(run, d)
        if b is None:
            raise ModelError("hurwitz needs --bounds (file with one lo,hi pair per delta)")
        rep = st.robust_hurwitz_valueset(d, b)
        res = dict(rep.__dict__)
        print(f"robust Hurwitz: {rep.status}" + (" (frequency grid)" if rep.grid_dependent
                                                 else ""))
    elif what == "cycles":
        sp = jacobian_sign_pattern(model)
        res = st.cycle_classification(sp)
        res.update(st.cooperativity_checks(sp))
        res["sign_pattern"] = sp.sigma
        print(f"cycles: {res['n_cycles']} ({res['n_positive']} positive, "
              f"{res['n_negative']} negative) -> {res['classification']}")
    elif what == "lint":
        res = st.positivity_lint(model)
        print("positivity: " + ("passes" if res["passes"] else "; ".join(res["failures"])))
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(what)
    res = {"model": model.name, "command": what, **res}
    run.write(f"{stem}.json", _json_text(res))
    return stem


def _index(model, v):
    if v is None:
        raise ModelError("--e and --h are required")
    if v in model.ids:
        return model.ids.index(v)
    try:
        i = int(v)
    except ValueError:
        raise ModelError(f"unknown species {v!r}") from None
    if not 0 <= i < model.n:
        raise ModelError(f"species index {i} out of range")
    return i


def _bounds(run: Run, bdc):
    path = run.args.bounds
    if not path:
        return None
    run.track_input(path)
    b = np.loadtxt(path, delimiter=",", ndmin=2)
    if b.shape != (bdc.q, 2):
        raise ModelError(f"bounds file must have {bdc.q} rows 'lo,hi' (one per delta: "
                         f"{', '.join(bdc.delta_labels)})")
    return [tuple(r) for r in b]


# ---------------------------------------------------------------- dyn

def cmd_dyn(run: Run):
    from . import dynamics as dy
    a = run.args
    model = _load_model(run)
    stem = a.out or f"dyn_{a.what}"
    if a.what == "equilibria":
        eqs = dy.find_equilibria(model, box=_box(run, model), n_starts=a.starts, seed=a.seed)
        idx = dy.degree_index(eqs) if eqs else (0, False)
        header = [*[f"x_{i + 1}" for i in range(model.n)], "stability", "det_sign",
                  "degenerate", "leading_real"]
        rows = [(*e.x.tolist(), e.stability, e.det_sign, e.degenerate,
                 float(e.leading.real)) for e in eqs]
        run.emit(stem, {"degree_index": idx[0], "index_valid": idx[1]}, header, rows)
        print(_text_table(header, rows))
    elif a.what == "sweep":
        if not a.param or not a.range:
            raise ModelError("sweep needs --param and --range lo:hi:steps")
        lo, hi, steps = _range(a.range, need_steps=True)
        diag = dy.bifurcation_sweep(model, a.param, (lo, hi), steps, box=_box(run, model),
                                    n_starts=a.starts, seed=a.seed)
        header = [a.param, *[f"x_{i + 1}" for i in range(model.n)], "stability"]
        ev = {"folds": diag.detected_folds, "transcritical": diag.detected_transcritical,
              "gaps": diag.gaps}
        run.emit(stem, ev, header, diag.rows())
        if a.format == "csv":
            run.write(f"{stem}_events.json", _json_text(ev))
        print(f"folds: {[round(v, 6) for v in diag.detected_folds]}  "
              f"transcritical: {[round(v, 6) for v in diag.detected_transcritical]}")
    elif a.what == "fold":
        if not a.param:
            raise ModelError("fold needs --param")
        pr = _range(a.range)[:2] if a.range else None
        xr = _range(a.box)[:2] if a.box and "," not in a.box else None
        folds = dy.fold_condition_solve(model, a.param, x_range=xr, p_range=pr)
        run.write(f"{stem}.json", _json_text({"param": a.param, "folds": folds}))
        print(f"fold points in {a.param}: {[round(v, 6) for v in folds]}")
    elif a.what == "potential":
        lo, hi, n = _range(a.grid or "0:3:601")
        pot = dy.potential_1d(model, grid=np.linspace(lo, hi, n or 601), sigma=a.sigma)
        header = ["x", "V"] + (["phi"] if pot.phi is not None else [])
        cols = [pot.grid, pot.V] + ([pot.phi] if pot.phi is not None else [])
        run.emit(stem, None, header, zip(*cols))
        print(f"potential on {len(pot.grid)} points written")
    elif a.what == "turing":
        if not _is_turing(model):
            model = _load_model(run, "levin_segel")
        kern = model.kernel
        ok, why = dy.pattern_condition(*(model.param_values()[k] for k in
                                         ("a", "b", "c", "d", "e", "D_u", "D_v")))
        eq = dy.turing_pattern_equilibrium(model, init=a.init, seed=a.seed)
        x = kern.grid if hasattr(kern, "grid") else np.arange(kern.N) * kern.h
        rows = [(float(xi), float(eq.x[2 * i]), float(eq.x[2 * i + 1]))
                for i, xi in enumerate(x)]
        info = {"pattern_condition": ok, "reason": why, "stability": eq.stability,
                "leading_real": float(eq.leading.real), "residual": eq.residual}
        run.emit(stem, info, ["x", "u", "v"], rows)
        if a.format == "csv":
            run.write(f"{stem}_summary.json", _json_text(info))
        print(f"pattern: {eq.stability}, leading eigenvalue {eq.leading.real:.4g}")
    return stem


# ---------------------------------------------------------------- sim

def cmd_sim(run: Run):
    from .sde import Gate, NoiseSpec, simulate_ensemble
    a = run.args
    model = _load_model(run)
    gate = None
    A = None
    if a.gate_phi:
        A = _attractor(run, model)
        gate = Gate(A, a.gate_phi, a.gate_form)
    if a.x0:
        x0 = np.array(_floats(a.x0))
        if x0.size != model.n:
            raise ModelError(f"--x0 needs {model.n} values")
    else:
        x0 = (A if A is not None else _attractor(run, model))[0]
    lam = _floats(a.lam)
    if len(lam) != 1:
        raise ModelError("--lambda takes a single value")
    noise = NoiseSpec(lam[0], gate, _noise_scale(run, model))
    nsteps = int(round(a.T / a.dt))
    rec = a.record_every or max(1, nsteps // 1000)
    ens = simulate_ensemble(model, None, noise, x0[None, :], a.dt, a.T, a.scheme, a.seed,
                            n=a.n, domain=a.domain, record_every=rec, jobs=a.jobs)
    header = ["traj_id", "t", *[f"x_{i + 1}" for i in range(model.n)]]

    def rows():
        for tr in ens.trajectories:
            for t, x in zip(tr.times, tr.states):
                yield (tr.index, float(t), *x.tolist())

    stem = a.out or "sim"
    if stem.endswith(".csv") or stem.endswith(".json"):
        stem = stem.rsplit(".", 1)[0]
    run.emit(stem, {"meta": ens.meta}, header, rows())
    clamped = sum(t.clamped for t in ens.trajectories)
    print(f"{len(ens.trajectories)} trajectories, {nsteps} steps, "
          f"{clamped} clamped coordinates")
    return stem


# ---------------------------------------------------------------- res

def cmd_res(run: Run):
    from . import resilience as rs
    a = run.args
    model = _load_model(run)
    A = _attractor(run, model)
    scale = _noise_scale(run, model)
    dt = a.dt
    common = dict(n_ic=a.nic, n_real=a.nreal, seed=a.seed, gate_phi=a.gate_phi,
                  gate_form=a.gate_form, noise_scale=scale, dt=dt, scheme=a.scheme,
                  basin=not a.no_basin, jobs=a.jobs)
    stem = a.out or f"res_{a.what}"
    if a.what == "grid":
        lams = _floats(a.lam_list or a.lam)
        deltas = _floats(a.delta)
        if not lams or not deltas:
            raise ModelError("grid needs --lambda (list) and --delta (list)")
        eps = a.eps if a.eps is not None else min(deltas)
        common.pop("basin")
        rows = rs.resilience_grid(model, A, lams, deltas, a.tau, eps, tail=a.tail,
                                  basin=not a.no_basin, **common)
        header = ["delta", "lambda", "p_hat", "tau_worst", "p_pooled"]
        run.emit(stem, None, header,
                 [(d, l, p, t if math.isfinite(t) else float("nan"), pp)
                  for d, l, p, pp, t in rows])
        print(_text_table(header[:4], [(d, l, p, t) for d, l, p, pp, t in rows]))
        return stem
    lam = _floats(a.lam)
    if len(lam) != 1:
        raise ModelError("--lambda takes a single value (use 'res grid' for lists)")
    lam = lam[0]
    deltas = _floats(a.delta)
    if a.what == "practical":
        if not deltas:
            raise ModelError("practical needs --delta")
        q = rs.ResilienceQuery("practical", tau=a.tau, gamma=a.gamma, delta=min(deltas),
                               eps=a.eps)
        ests = rs.estimate_practical_resilience(model, A, lam, q, deltas=deltas, **common)
        report = {"kind": "practical", "estimates": [e.as_dict() for e in ests]}
        lines = [(e.meta["delta"], e.p_hat, e.p_pooled, e.attained) for e in ests]
        head = ["delta", "p_hat", "p_pooled", "attained"]
    elif a.what == "asymptotic":
        if not deltas:
            raise ModelError("asymptotic needs --delta")
        ests = rs.estimate_asymptotic_resilience(model, A, lam, min(deltas), a.T, a.tail,
                                                 eps=a.eps, gamma=a.gamma, deltas=deltas,
                                                 **common)
        report = {"kind": "asymptotic_practical", "estimates": [e.as_dict() for e in ests]}
        lines = [(e.meta["delta"], e.p_hat, e.p_pooled, e.attained) for e in ests]
        head = ["delta", "p_hat", "p_pooled", "attained"]
    else:
        nus = _floats(a.nu) or deltas
        if not nus:
            raise ModelError("attraction needs --nu")
        eps = a.eps if a.eps is not None else None
        ats = rs.estimate_attraction_time(model, A, lam, min(nus), a.mu, a.T, eps=eps,
                                          tail=a.tail, nus=nus, **common)
        report = {"kind": "attraction_time",
                  "estimates": [{**t.as_dict(), "asymptotic": t.asymptotic.as_dict()}
                                for t in ats]}
        lines = [(t.meta["nu"], t.worst_case if t.achieved else "not achieved",
                  t.asymptotic.p_pooled) for t in ats]
        head = ["nu", "worst_tau", "p_pooled_tail"]
    report["attractor"] = A
    report["lambda"] = lam
    run.write(f"{stem}.json", _json_text(report))
    print(_text_table(head, lines))
    return stem


# ---------------------------------------------------------------- ind

def _read_series(run: Run):
    path = run.args.inp
    if not path:
        raise ModelError("--in series.csv is required")
    run.track_input(path)
    with open(path) as fh:
        first = fh.readline()
    try:
        [float(v) for v in first.strip().split(",")]
        skip = 0
    except ValueError:
        skip = 1
    data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    if data.shape[1] == 1:
        return np.arange(len(data), dtype=float), data[:, 0]
    col = run.args.column
    if not 1 <= col < data.shape[1]:
        raise ModelError(f"column {col} not in input (columns 1..{data.shape[1] - 1})")
    return data[:, 0], data[:, col]


def cmd_ind(run: Run):
    from . import indicators as ind
    a = run.args
    stem = a.out or f"ind_{a.what}"
    w = a.what
    if w == "stats":
        t, x = _read_series(run)
        spec = ind.RollingSpec(a.window, a.stride, a.detrend, a.bandwidth)
        res = ind.rolling_stats(x, spec, t)
        names = ["variance", "ac1", "skewness", "kurtosis"]
        rows = zip(res["variance"].times, *(res[k].values for k in names))
        trend = {k: ind.kendall_tau(res[k].values[np.isfinite(res[k].values)],
                                    res[k].times[np.isfinite(res[k].values)])
                 for k in ("variance", "ac1")
                 if np.isfinite(res[k].values).sum() >= 2}
        run.emit(stem, {"kendall_tau": trend}, ["t", *names], rows)
        print(f"{len(res['variance'].values)} windows; Kendall tau: "
              + ", ".join(f"{k}={v:.4f}" for k, v in trend.items()))
    elif w == "psd":
        t, x = _read_series(run)
        fs = a.fs if a.fs else 1.0 / float(np.median(np.diff(t)))
        sp = ind.psd(x, fs, a.nperseg)
        rr = ind.reddening_ratio(sp, a.split)
        run.emit(stem, {"reddening_ratio": rr, "fs": fs}, ["omega", "S"], zip(sp.omega, sp.S))
        if a.format == "csv":
            run.write(f"{stem}_summary.json", _json_text({"reddening_ratio": rr, "fs": fs}))
        print(f"reddening ratio {rr:.6g}")
    elif w == "entropy":
        if a.variance is not None:
            v = a.variance
        else:
            _, x = _read_series(run)
            v = float(np.var(x, ddof=1))
        h = ind.shannon_entropy_gaussian(v)
        run.write(f"{stem}.json", _json_text({"variance": v, "entropy": h}))
        print(f"H = {h!r}")
    elif w == "tau":
        t, x = _read_series(run)
        tau = ind.kendall_tau(x, t)
        run.write(f"{stem}.json", _json_text({"kendall_tau": tau, "n": len(x)}))
        print(f"Kendall tau = {tau!r}")
    elif w == "kramers":
        from .dynamics import potential_1d
        model = _load_model(run)
        lo, hi, n = _range(a.grid or f"{min(a.x1, a.x2) - 1}:{max(a.x1, a.x2) + 1}:4001")
        lo = max(lo, 0.0) if model.positive else lo
        pot = potential_1d(model, grid=np.linspace(lo, hi, n or 4001))
        r = ind.kramers_rate(pot, a.x1, a.x2, a.D)
        run.write(f"{stem}.json", _json_text({"x1": a.x1, "x2": a.x2, "D": a.D, "rate": r}))
        print(f"Kramers rate = {r!r}")
    elif w == "mfpt":
        model = _load_model(run)
        T = ind.mfpt(model, a.B, a.x1, a.x2, reflect=a.reflect, b_at=a.b_at)
        run.write(f"{stem}.json", _json_text({"x1": a.x1, "x2": a.x2, "B": a.B,
                                              "b_at": a.b_at, "mfpt": T}))
        print(f"MFPT = {T!r}")
    elif w == "alpha":
        from .dynamics import normal_form, NORMAL_FORMS
        spec = a.model or "fold"
        model = normal_form(spec) if spec in NORMAL_FORMS else _load_model(run)
        param = a.param or "p"
        ps = _floats(a.pvalues) if a.pvalues else None
        if ps is None:
            sign = -1.0 if spec in ("fold", "pitchfork_sub") else 1.0
            ps = (a.p0 + sign * np.logspace(-4, -1, 12)).tolist()
        fam = ind.leading_eigenvalue_family(model, param, _box(run, model)
                                            if a.box else [(-2.0, 2.0)] * model.n)
        r = ind.recovery_exponent(fam, ps, a.p0)
        run.write(f"{stem}.json", _json_text(r))
        print(f"recovery exponent alpha = {r['alpha']:.6f}")
    elif w == "mvou":
        if not a.J or not a.sigma_noise:
            raise ModelError("mvou needs --J and --sigma-noise (rows ';', entries ',')")
        r = ind.mv_ou_stationary(_matrix(a.J), _matrix(a.sigma_noise))
        out = {"Sigma": r.Sigma, "eigenvalues_real": r.eigenvalues.real,
               "eigenvalues_imag": r.eigenvalues.imag, "lead": r.lead,
               "diverging_entries": r.diverging, "method": r.method,
               "lyapunov_residual": r.residual}
        run.write(f"{stem}.json", _json_text(out))
        print(_text_table([f"c{j}" for j in range(r.Sigma.shape[1])], r.Sigma.tolist()))
    elif w == "bayes":
        r = ind.bayes_ct(a.p_irl_given_ct, a.p_ct, a.p_irl)
        run.write(f"{stem}.json", _json_text(r))
        print(f"P(CT | IRL) = {r['posterior']!r}")
    elif w == "isp":
        model = _load_model(run)
        names, box = [], []
        for item in a.vary or []:
            k, rng = item.split("=", 1)
            lo, hi, _ = _range(rng)
            names.append(k)
            box.append((lo, hi))
        if not names:
            raise ModelError("isp needs at least one --vary name=lo:hi")
        evaluator = _isp_property(run, model, names, a.property)
        r = ind.isp_classify(evaluator, box, a.eps, a.conf_delta, a.seed, a.gamma_star,
                             a.scope)
        run.write(f"{stem}.json", _json_text({**r.as_dict(), "property": a.property,
                                              "vary": dict(zip(names, box))}))
        print(f"p_hat = {r.p_hat!r} from N = {r.n}: {r.label}")
    return stem


def _isp_property(run, model, names, prop):
    from .dynamics.equilibria import find_equilibria
    box = _box(run, model)

    def eqs(row):
        return find_equilibria(model, dict(zip(names, row)), box=box, n_starts=16, seed=0)

    if prop == "monostable":
        return lambda row: len(eqs(row)) == 1
    if prop == "all-stable":
        return lambda row: all(e.stability == "stable" for e in eqs(row))
    raise ModelError(f"unknown property {prop!r}")


# ---------------------------------------------------------------- reduce

def cmd_reduce(run: Run):
    from . import reduction as rd
    a = run.args
    stem = a.out or f"reduce_{a.what}"
    if a.what == "graph":
        A = rd.regular_adjacency(a.n, a.d, seed=a.seed, kind=a.kind)
        i, j = np.nonzero(np.triu(A))
        run.emit(stem, None, ["i", "j", "w"], zip(i.tolist(), j.tolist(), A[i, j].tolist()))
        print(f"{a.kind} {a.d}-regular graph on {a.n} nodes, {len(i)} edges")
        return stem
    if not a.adj:
        raise ModelError("gao needs --adj edges.csv")
    run.track_input(a.adj)
    A = rd.read_edge_list(a.adj, directed=a.directed)
    if a.dynamics != "hill":
        raise ModelError("only --dynamics hill is available from the command line")
    dyn = rd.hill_dynamics(**_kv(a.params))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", rd.HeterogeneityWarning)
        red = rd.gao_reduce(A, dyn)
    lo, hi, _ = _range(a.box or "0:10")
    eqs = red.equilibria(lo, hi)
    out = {"beta_eff": red.beta_eff, "heterogeneity_cv": red.heterogeneity,
           "in_out_mismatch": red.in_out_mismatch, "adjacency_sha": red.provenance,
           "n": A.shape[0], "dynamics": dyn.params,
           "reduced_equilibria": [{"x_eff": x, "stability": s} for x, s in eqs],
           "warnings": [str(w.message) for w in caught]}
    if a.full:
        net = rd.network_system(A, dyn)
        full = []
        for x, s in eqs:
            try:
                xf, stable = net.equilibrium(np.full(A.shape[0], x))
                full.append({"start": x, "x_eff": float(rd.effective_state(A, xf)),
                             "stable": stable})
            except ModelError as err:
                full.append({"start": x, "error": str(err)})
        out["full_equilibria"] = full
    run.write(f"{stem}.json", _json_text(out))
    print(f"beta_eff = {red.beta_eff!r}; reduced equilibria: "
          + ", ".join(f"{x:.6g} ({s})" for x, s in eqs))
    return stem


# ---------------------------------------------------------------- rerun

def cmd_rerun(run: Run):
    man = json.loads(Path(run.args.manifest).read_text())
    argv = man["command_line"][1:]
    if run.args.out_dir_override:
        argv = argv + ["--out-dir", run.args.out_dir_override]
    return ("rerun", argv)


# ---------------------------------------------------------------- parser

def _common(p):
    g = p.add_argument_group("common options")
    g.add_argument("--out-dir", default=".", help="directory for artifacts (default .)")
    g.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="table format (documents are always JSON)")
    g.add_argument("--jobs", type=int, default=1, help="worker processes")
    g.add_argument("--seed", type=int, default=0, help="master seed (unsigned 64-bit)")
    g.add_argument("--config", help="key=value file supplying option defaults")
    g.add_argument("--out", help="artifact stem (file name without extension)")


def _model_opts(p, required=False):
    p.add_argument("--model", required=required,
                   help="built-in name, .crn file or .json model")
    p.add_argument("--params", help="parameter overrides k=v,k=v")
    p.add_argument("--box", help="state box lo:hi (all coordinates) or lo:hi,lo:hi,...")


def _noise_opts(p):
    p.add_argument("--lambda", dest="lam", default="0.0", help="noise intensity")
    p.add_argument("--gate-phi", type=float, default=1e-4,
                   help="gate radius phi (0 disables the gate)")
    p.add_argument("--gate-form", choices=("ball", "product"), default="ball")
    p.add_argument("--noise-scale", default="literal",
                   help="literal | spacetime (1/sqrt(h) on spatial grids) | number")
    p.add_argument("--attractor", default="auto", help="auto or comma-separated state(s)")
    p.add_argument("--scheme", choices=("euler_maruyama", "milstein"),
                   default="euler_maruyama")


def build_parser() -> tuple[_Parser, dict]:
    top = _Parser(prog="resilnet", description="Structural robustness and stochastic "
                  "resilience of dynamical networks.")
    top.add_argument("--version", action="version", version=f"resilnet {__version__}")
    sub = top.add_subparsers(dest="group", parser_class=_Parser, required=True)
    leaves = {}

    p = sub.add_parser("struct", help="parameter-free structural analysis")
    p.add_argument("what", choices=("deficiency", "bdc", "edf", "dual", "detsign",
                                    "influence", "ssim", "hurwitz", "cycles", "lint"))
    p.add_argument("model_pos", nargs="?", metavar="MODEL")
    _model_opts(p)
    p.add_argument("--e", help="input equation (species name or index)")
    p.add_argument("--h", help="output variable (species name or index)")
    p.add_argument("--bounds", help="CSV file of lo,hi per delta")
    _common(p)
    p.set_defaults(func=cmd_struct)
    leaves["struct"] = p

    p = sub.add_parser("dyn", help="equilibria, bifurcations, potentials, Turing patterns")
    p.add_argument("what", choices=("equilibria", "sweep", "fold", "potential", "turing"))
    _model_opts(p)
    p.add_argument("--param")
    p.add_argument("--range", help="lo:hi[:steps]")
    p.add_argument("--starts", type=int, default=32)
    p.add_argument("--sigma", type=float, help="noise intensity for the stochastic potential")
    p.add_argument("--grid", help="potential grid lo:hi:n")
    p.add_argument("--init", default="random", choices=("random", "homogeneous"))
    _common(p)
    p.set_defaults(func=cmd_dyn, model="gene_regulation")
    leaves["dyn"] = p

    p = sub.add_parser("sim", help="gated-noise stochastic simulation")
    _model_opts(p)
    _noise_opts(p)
    p.add_argument("--x0", help="initial state (default: the attractor)")
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--T", type=float, default=100.0)
    p.add_argument("--n", type=int, default=1, help="number of trajectories")
    p.add_argument("--record-every", type=int, default=0,
                   help="record every k steps (default: about 1000 records)")
    p.add_argument("--domain", choices=("clamp", "abort"), default="clamp")
    _common(p)
    p.set_defaults(func=cmd_sim, model="gene_regulation", gate_phi=0.0)
    leaves["sim"] = p

    p = sub.add_parser("res", help="Monte Carlo resilience estimators")
    p.add_argument("what", choices=("practical", "asymptotic", "attraction", "grid"))
    _model_opts(p)
    _noise_opts(p)
    p.add_argument("--lambdas", dest="lam_list", help="grid: comma-separated noise levels")
    p.add_argument("--delta", help="distance(s), comma-separated")
    p.add_argument("--eps", type=float, help="initial-ball radius (default delta)")
    p.add_argument("--tau", type=float, default=100.0, help="practical horizon")
    p.add_argument("--T", type=float, default=250.0, help="asymptotic/attraction horizon")
    p.add_argument("--tail", type=float, default=0.2, help="tail window fraction")
    p.add_argument("--nu", help="attraction radius (list allowed)")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=0.95)
    p.add_argument("--nic", type=int, default=20)
    p.add_argument("--nreal", type=int, default=200)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--no-basin", action="store_true", help="skip the basin test")
    _common(p)
    p.set_defaults(func=cmd_res, model="gene_regulation")
    leaves["res"] = p

    p = sub.add_parser("ind", help="early-warning and resilience indicators")
    p.add_argument("what", choices=("stats", "psd", "entropy", "tau", "kramers", "mfpt",
                                    "alpha", "mvou", "bayes", "isp"))
    _model_opts(p)
    p.add_argument("--in", dest="inp", help="series CSV (t,value) or (t,x_1..x_n)")
    p.add_argument("--column", type=int, default=1)
    p.add_argument("--window", type=int, default=200)
    p.add_argument("--stride", type=int, default=10)
    p.add_argument("--detrend", choices=("none", "gaussian"), default="gaussian")
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--fs", type=float)
    p.add_argument("--nperseg", type=int)
    p.add_argument("--split", type=float)
    p.add_argument("--variance", type=float)
    p.add_argument("--x1", type=float)
    p.add_argument("--x2", type=float)
    p.add_argument("--D", type=float, default=0.1)
    p.add_argument("--B", type=float, default=0.2, help="diffusion B = sigma^2 for mfpt")
    p.add_argument("--reflect", type=float)
    p.add_argument("--b-at", choices=("x", "y"), default="y")
    p.add_argument("--grid")
    p.add_argument("--param")
    p.add_argument("--pvalues")
    p.add_argument("--p0", type=float, default=0.0)
    p.add_argument("--J")
    p.add_argument("--sigma-noise")
    p.add_argument("--p-irl-given-ct", type=float)
    p.add_argument("--p-ct", type=float)
    p.add_argument("--p-irl", type=float)
    p.add_argument("--vary", action="append", help="isp: name=lo:hi (repeatable)")
    p.add_argument("--property", default="monostable", choices=("monostable", "all-stable"))
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--conf-delta", type=float, default=0.05)
    p.add_argument("--gamma-star", type=float, default=0.95)
    p.add_argument("--scope", choices=("structural", "robust"), default="structural")
    _common(p)
    p.set_defaults(func=cmd_ind)
    leaves["ind"] = p

    p = sub.add_parser("reduce", help="degree-weighted network reduction")
    p.add_argument("what", choices=("gao", "graph"))
    p.add_argument("--adj", help="edge list CSV (i,j[,w])")
    p.add_argument("--directed", action="store_true")
    p.add_argument("--dynamics", default="hill")
    p.add_argument("--params", help="dynamics parameters k=v,...")
    p.add_argument("--box", help="search interval for reduced equilibria (lo:hi)")
    p.add_argument("--full", action="store_true", help="also solve the full network")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--kind", choices=("random", "circulant"), default="random")
    _common(p)
    p.set_defaults(func=cmd_reduce)
    leaves["reduce"] = p

    p = sub.add_parser("rerun", help="repeat the invocation recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out-dir-override", help="write into this directory instead")
    _common(p)
    p.set_defaults(func=cmd_rerun)
    leaves["rerun"] = p
    return top, leaves


def _read_config(path) -> dict:
    cfg = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            s = line.split("#", 1)[0].strip()
            if not s:
                continue
            if "=" not in s:
                raise ModelError(f"{path}:{n}: expected key = value")
            k, v = (t.strip() for t in s.split("=", 1))
            cfg[k.replace("-", "_")] = v
    return cfg


def _parse(argv):
    parser, leaves = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = _read_config(args.config)
        leaf = leaves[args.group]
        known = {a.dest: a for a in leaf._actions}
        for act in leaf._actions:
            for opt in act.option_strings:
                known.setdefault(opt.lstrip("-").replace("-", "_"), act)
        bad = [k for k in cfg if k not in known or known[k].dest in ("func", "what", "config",
                                                                    "help")]
        if bad:
            raise ModelError(f"unknown config keys: {', '.join(sorted(bad))}")
        conv = {}
        for k, v in cfg.items():
            act = known[k]
            if isinstance(act, argparse._StoreTrueAction):
                conv[act.dest] = v.lower() in ("1", "true", "yes", "on")
            else:
                conv[act.dest] = act.type(v) if act.type else v
        leaf.set_defaults(**conv)
        args = parser.parse_args(argv)
    return args


def dispatch(argv) -> int:
    argv = list(argv)
    try:
        args = _parse(argv)
    except UsageError as err:
        print(err, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as err:  # --help / --version
        return int(err.code or 0)
    except (ModelError, OSError, ValueError) as err:
        print(f"resilnet: input error: {err}", file=sys.stderr)
        return EXIT_INPUT
    if not 0 <= args.seed < 2 ** 64:
        print("resilnet: error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_USAGE
    if args.jobs < 1:
        print("resilnet: error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    run = Run(args, argv)
    if args.config:
        run.track_input(args.config)
    try:
        with np.errstate(over="ignore", under="ignore"):
            stem = args.func(run)
        if isinstance(stem, tuple):  # rerun
            return dispatch(stem[1])
        run.manifest(stem)
    except UsageError as err:
        print(err, file=sys.stderr)
        return EXIT_USAGE
    except Exception as err:  # map to exit codes with a diagnostic
        return _fail(err)
    return 0


def _fail(err) -> int:
    from .dynamics.equilibria import DegenerateEquilibrium
    from .dynamics.turing import PatternDivergence
    from .structural.vertex import VertexCapExceeded
    numeric = (DegenerateEquilibrium, PatternDivergence, VertexCapExceeded,
               np.linalg.LinAlgError, FloatingPointError, ArithmeticError)
    if isinstance(err, numeric):
        print(f"resilnet: numerical failure: {err}", file=sys.stderr)
        if isinstance(err, VertexCapExceeded):
            print("hint: 'resilnet ind isp' estimates the property by randomized sampling",
                  file=sys.stderr)
        return EXIT_NUMERIC
    if isinstance(err, (ModelError, OSError, ValueError, KeyError)):
        print(f"resilnet: input error: {err}", file=sys.stderr)
        return EXIT_INPUT
    print(f"resilnet: numerical failure: {type(err).__name__}: {err}", file=sys.stderr)
    return EXIT_NUMERIC


def main(argv=None) -> int:
    return dispatch(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
