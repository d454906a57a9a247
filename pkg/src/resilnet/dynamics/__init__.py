"""Equilibria, bifurcations, normal forms, potentials and Turing patterns."""

from .bifurcation import BifurcationDiagram, bifurcation_sweep, fold_condition_solve
from .equilibria import (DegenerateEquilibrium, Equilibrium, classify, degree_index,
                         find_equilibria)
from .normal_forms import NORMAL_FORMS, normal_form
from .potential import Potential1D, potential_1d
from .turing import (LevinSegelKernel, PatternDivergence, homogeneous_equilibrium,
                     levin_segel_semidiscretize, pattern_condition,
                     turing_pattern_equilibrium)

__all__ = [
    "BifurcationDiagram", "bifurcation_sweep", "fold_condition_solve",
    "DegenerateEquilibrium", "Equilibrium", "classify", "degree_index",
    "find_equilibria", "NORMAL_FORMS", "normal_form", "Potential1D", "potential_1d",
    "LevinSegelKernel", "PatternDivergence", "homogeneous_equilibrium",
    "levin_segel_semidiscretize", "pattern_condition", "turing_pattern_equilibrium",
]
