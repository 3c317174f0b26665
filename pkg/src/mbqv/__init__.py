"""Logical noise and quantum volume of measurement-based quantum computers.

Modules
-------
pauli    Pauli strings, Clifford conjugation and Pauli channels
mbqc_dv  measurement patterns on qubit cluster states and their channels
gkp      Gaussian shift noise on GKP cluster states
sim      statevector / density-matrix simulation with Pauli noise
qv       the quantum volume protocol
cli      the ``mbqv`` command
"""

__version__ = "0.1.0"

from .pauli import PauliChannel, PauliString, CliffordMap, compose, depolarizing_channel  # noqa: E402
from .mbqc_dv import MeasurementPattern, effective_channel_dv, fidelity_curve, standard_pattern  # noqa: E402
from .gkp import GkpNoiseParams, effective_channel_gkp, flip_probability, rotation_error_rate  # noqa: E402
from .sim import LogicalCircuit, StateVector, apply, haar_su4, kak_decompose, euler_zxz  # noqa: E402
from .qv import DvNoise, ModelCircuit, QvRunResult, run_qv, quantum_volume, qv_sweep  # noqa: E402

__all__ = [
    "PauliChannel",
    "PauliString",
    "CliffordMap",
    "compose",
    "depolarizing_channel",
    "MeasurementPattern",
    "effective_channel_dv",
    "fidelity_curve",
    "standard_pattern",
    "GkpNoiseParams",
    "effective_channel_gkp",
    "flip_probability",
    "rotation_error_rate",
    "LogicalCircuit",
    "StateVector",
    "apply",
    "haar_su4",
    "kak_decompose",
    "euler_zxz",
    "DvNoise",
    "ModelCircuit",
    "QvRunResult",
    "run_qv",
    "quantum_volume",
    "qv_sweep",
]
