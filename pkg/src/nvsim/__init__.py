"""Simulation of the 15N-NV spin system under a tilted bias field."""

__version__ = "0.1.0"

from .hamiltonian import (  # noqa: F401
    EigenSystem,
    FieldConfig,
    PhysicalConstants,
    build_electron_hamiltonian,
    build_full_hamiltonian,
    solve_electron,
    sweep_eigensystem,
)
