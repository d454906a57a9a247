"""Structural robustness and stochastic resilience of dynamical networks."""

from .builtins import BUILTIN_NAMES, builtin
from .compartmental import CompartmentalSpec, build_compartmental
from .dsl import DSLSyntaxError, from_json, load_model, parse_crn, serialize, to_json
from .model import (DomainError, ModelError, NetworkModel, SignDefinitenessError,
                    SignPattern, jacobian_sign_pattern, numeric_vector_field)

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_NAMES", "builtin", "CompartmentalSpec", "build_compartmental",
    "DSLSyntaxError", "from_json", "load_model", "parse_crn", "serialize", "to_json",
    "DomainError", "ModelError", "NetworkModel", "SignDefinitenessError",
    "SignPattern", "jacobian_sign_pattern", "numeric_vector_field",
]
