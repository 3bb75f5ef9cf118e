"""Steady-state simulator for a measurement-driven qubit-oscillator engine."""

from .hilbert import FSpec, FockCutoff
from .model import ModelParams, ideal_steady_state, liouvillian
from .observables import (
    Benchmarks,
    FluxReport,
    active_report,
    benchmarks,
    ergotropy,
    passive_report,
    qubit_excitation,
)
from .solver import DensityMatrix, propagate, steady_state, trace_distance, vectorize

__version__ = "0.1.0"

__all__ = [
    "FSpec", "FockCutoff", "ModelParams", "DensityMatrix",
    "liouvillian", "vectorize", "steady_state", "propagate", "trace_distance",
    "ideal_steady_state", "active_report", "passive_report", "benchmarks",
    "ergotropy", "qubit_excitation", "FluxReport", "Benchmarks",
]
