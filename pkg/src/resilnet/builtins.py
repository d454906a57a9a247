"""Built-in example systems.

Most models are bundled ``.crn`` files; the Levin-Segel semi-discretization
is generated in code.  Default parameter values are the ``param`` lines of
each file (see ``resilnet.dsl.model_files()``); for ``levin_segel`` they are
a=d=e=0.5, b=c=1, D_u=1.4e-4, D_v=0.005, N=101, L=1.
"""

from __future__ import annotations

from typing import Mapping

from .dsl import load_model, model_files
from .model import ModelError, NetworkModel

__all__ = ["BUILTIN_NAMES", "builtin"]

BUILTIN_NAMES = ("gene_regulation", "sis", "sir", "sir_demography", "sirv",
                 "seirv", "sidarthe_v", "iffl", "repressilator", "promotilator",
                 "lotka_volterra", "levin_segel")

_ALIASES = {"gene": "gene_regulation", "lv": "lotka_volterra",
            "sidarthe": "sidarthe_v", "turing": "levin_segel"}


def builtin(name: str, params: Mapping[str, float] | None = None, **kw) -> NetworkModel:
    """Return a parameterized built-in model.

    ``params`` (or keyword arguments) override the defaults.  Unknown names
    raise :class:`ModelError`, as do unknown or unresolved parameters.
    """
    name = _ALIASES.get(name, name)
    values = dict(params or {})
    values.update(kw)
    if name not in BUILTIN_NAMES:
        raise ModelError(f"unknown built-in model {name!r}; "
                         f"choose from {', '.join(BUILTIN_NAMES)}")
    if name == "levin_segel":
        from .dynamics.turing import levin_segel_semidiscretize
        opts = {"a": 0.5, "b": 1.0, "c": 1.0, "d": 0.5, "e": 0.5,
                "D_u": 1.4e-4, "D_v": 0.005, "N": 101, "L": 1.0}
        unknown = set(values) - set(opts)
        if unknown:
            raise ModelError(f"unknown parameters for levin_segel: {sorted(unknown)}")
        opts.update(values)
        opts["N"] = int(opts["N"])
        return levin_segel_semidiscretize(**opts)
    model = load_model(str(model_files()[name]))
    unknown = set(values) - set(model.params)
    if unknown:
        raise ModelError(f"unknown parameters for {name}: {sorted(unknown)}")
    model = model.with_params(**values)
    missing = [k for k, p in model.params.items() if p.value is None]
    if missing:
        raise ModelError(f"missing required parameter(s): {', '.join(missing)}")
    return model.relabel(name)
