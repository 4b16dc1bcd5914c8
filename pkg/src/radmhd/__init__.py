"""Radially symmetric compressible MHD with interior vacuum: simulation, blowup diagnostics,
bound calculus and a linearized Picard scheme."""

from radmhd.core import ConfigurationError, FluidParams, RadialGrid, RadialState, Scenario, VacuumTracker
from radmhd.diagnostics import DiagnosticsRecord
from radmhd.bound import BlowupBoundResult
from radmhd.solver import TerminationKind, TerminationReason, run, simulate

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "FluidParams", "RadialGrid", "RadialState", "Scenario", "VacuumTracker",
    "DiagnosticsRecord", "BlowupBoundResult", "TerminationKind", "TerminationReason", "run",
    "simulate",
]
