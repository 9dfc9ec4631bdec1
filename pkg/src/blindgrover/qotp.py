"""Quantum one-time pad: per-qubit ``X^x Z^z`` masks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .gates import pauli
from .qstate import StateVector, apply_unitary


@dataclass(frozen=True)
class PauliKey:
    """Ordered ``(x, z)`` bit pairs, one per wire."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        pairs = tuple((int(x), int(z)) for x, z in self.pairs)
        if any(b not in (0, 1) for p in pairs for b in p):
            raise ValueError("key bits must be 0 or 1")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def __getitem__(self, i: int) -> tuple[int, int]:
        return self.pairs[i]

    def __iter__(self):
        return iter(self.pairs)

    @classmethod
    def zeros(cls, n: int) -> "PauliKey":
        return cls(((0, 0),) * n)

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "PauliKey":
        """Build from the flat sequence ``x1 z1 x2 z2 ...``."""
        if len(bits) % 2:
            raise ValueError("need an even number of key bits")
        return cls(tuple((bits[i], bits[i + 1]) for i in range(0, len(bits), 2)))

    def bits(self) -> list[int]:
        return [b for pair in self.pairs for b in pair]

    def with_pair(self, wire: int, pair: tuple[int, int]) -> "PauliKey":
        pairs = list(self.pairs)
        pairs[wire] = pair
        return PauliKey(tuple(pairs))

    def extended(self, extra: Iterable[tuple[int, int]]) -> "PauliKey":
        return PauliKey(self.pairs + tuple(extra))

    def to_hex(self) -> str:
        bits = self.bits()
        bits += [0] * (-len(bits) % 4)
        return "".join(f"{int(''.join(map(str, bits[i:i + 4])), 2):x}" for i in range(0, len(bits), 4))

    @classmethod
    def from_hex(cls, text: str, n: int) -> "PauliKey":
        bits = [int(b) for ch in text.strip().lower() for b in format(int(ch, 16), "04b")]
        if len(bits) < 2 * n or any(bits[2 * n :]):
            raise ValueError(f"hex key {text!r} does not encode {n} qubits")
        return cls.from_bits(bits[: 2 * n])


def keygen(n: int, rng: np.random.Generator) -> PauliKey:
    if n < 1:
        raise ValueError("key needs at least one qubit")
    return PauliKey.from_bits(rng.integers(0, 2, size=2 * n).tolist())


def apply_pauli(state: StateVector, wire: int, x: int, z: int) -> StateVector:
    """Apply ``X^x Z^z`` (Z first) on one wire."""
    if not (x or z):
        return state
    return apply_unitary(state, pauli(x, z), [wire])


def _unmask(state: StateVector, wire: int, x: int, z: int) -> StateVector:
    if not (x or z):
        return state
    return apply_unitary(state, pauli(x, z).conj().T, [wire])


def _check_length(state: StateVector, key: PauliKey) -> None:
    if len(key) != state.n_qubits:
        raise ValueError(f"key covers {len(key)} wires, state has {state.n_qubits}")


def encrypt(state: StateVector, key: PauliKey) -> StateVector:
    _check_length(state, key)
    return partial_mask(state, key, range(state.n_qubits))


def decrypt(state: StateVector, key: PauliKey) -> StateVector:
    _check_length(state, key)
    for w, (x, z) in enumerate(key):
        state = _unmask(state, w, x, z)
    return state


def partial_mask(state: StateVector, key: PauliKey, wires: Iterable[int]) -> StateVector:
    """Apply the mask only on ``wires``; ``key`` is indexed by wire."""
    for w in wires:
        if not 0 <= w < state.n_qubits or w >= len(key):
            raise ValueError(f"wire {w} out of range")
        state = apply_pauli(state, w, *key[w])
    return state
