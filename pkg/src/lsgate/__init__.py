"""Simulation and analysis of narrow-line light-shift gates on trapped-ion clock qubits.

Submodules
----------
crystal
    Two-ion equilibrium geometry, normal modes and Lamb-Dicke parameters.
hamiltonian
    Full (excited states kept), light-shift and spin-dependent-force operator models.
pulse
    Envelopes and echoed multi-loop gate schedules.
evolve
    Propagation, calibration, process fidelity, transient populations.
errors
    Analytic error formulas and the error budget.
srb
    Symmetric-subspace randomized benchmarking.
cli
    Command line front end (``lsgate``).
"""

__version__ = "0.1.0"
