"""Parameter-free structural analysis of networks."""

from .bdc import BDCDecomposition, EDFDecomposition, bdc_decompose, delta_values, edf_decompose
from .complexes import ComplexDecomposition, complexes_and_linkage, deficiency, full_stoichiometry
from .cycles import CYCLE_CAP, cooperativity_checks, cycle_classification, positivity_lint, s2c_pattern
from .dual import dual_network, network_from_stoichiometry
from .hurwitz import HurwitzReport, default_omega_grid, hull_excludes_origin, robust_hurwitz_valueset
from .vertex import (VERTEX_CAP, DetSign, InfluenceSign, VertexCapExceeded, gray_vertices, ssim,
                     steady_state_influence, structural_det_sign, vertex_values)

__all__ = [
    "BDCDecomposition", "EDFDecomposition", "bdc_decompose", "delta_values", "edf_decompose",
    "ComplexDecomposition", "complexes_and_linkage", "deficiency", "full_stoichiometry",
    "CYCLE_CAP", "cooperativity_checks", "cycle_classification", "positivity_lint",
    "s2c_pattern", "dual_network", "network_from_stoichiometry", "HurwitzReport",
    "default_omega_grid", "hull_excludes_origin", "robust_hurwitz_valueset", "VERTEX_CAP",
    "DetSign", "InfluenceSign", "VertexCapExceeded", "gray_vertices", "ssim",
    "steady_state_influence", "structural_det_sign", "vertex_values",
]
