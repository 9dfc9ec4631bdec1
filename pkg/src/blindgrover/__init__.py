"""Blind quantum computation on one-time-padded qubits, and Grover search over encrypted data."""

from .gates import GateJob, GateKind
from .grover import build_grover, run_blind, run_plain
from .parties import DecoyConfig, EavesdropPolicy, run_scenario
from .protocol import BlindSession, ProtocolOptions, Transcript
from .qotp import PauliKey, decrypt, encrypt, keygen
from .qstate import StateVector

__all__ = [
    "BlindSession",
    "DecoyConfig",
    "EavesdropPolicy",
    "GateJob",
    "GateKind",
    "PauliKey",
    "ProtocolOptions",
    "StateVector",
    "Transcript",
    "build_grover",
    "decrypt",
    "encrypt",
    "keygen",
    "run_blind",
    "run_plain",
    "run_scenario",
]
