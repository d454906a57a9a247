"""Stochastic simulation: gated additive noise, EM and Milstein schemes."""

from .gate import Gate, bump, bump_derivative, distance_to, smooth_gate
from .integrate import (CHUNK, SCHEMES, Ensemble, NoiseSpec, Trajectory, deterministic_path,
                        run_batch, simulate, simulate_ensemble, stream)
from .ou import OUExact, ou_exact, ou_model

__all__ = ["Gate", "bump", "bump_derivative", "distance_to", "smooth_gate", "CHUNK",
           "SCHEMES", "Ensemble", "NoiseSpec", "Trajectory", "deterministic_path",
           "run_batch", "simulate", "simulate_ensemble", "stream", "OUExact", "ou_exact",
           "ou_model"]
