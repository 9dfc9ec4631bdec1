"""Gate matrices, the pi/8 rotation family and rotation-sequence decompositions.

Every logical gate is rewritten as a sequence of the six primitives
``R_z(pi/4)``, ``R_y(pi/4)``, their singly controlled and doubly controlled
forms.  An instruction stores a repetition count ``quarter_turns`` rather than
an angle so the sequence can be replayed one ``pi/4`` step at a time.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .qstate import TOL, is_unitary

QUARTER = np.pi / 4
# R_y and R_z have period 4*pi, i.e. 16 quarter turns
FULL_CYCLE = 16


class GateKind(enum.Enum):
    X = "X"
    Z = "Z"
    H = "H"
    S = "S"
    T = "T"
    CNOT = "CNOT"
    CZ = "CZ"
    TOFFOLI = "TOFFOLI"

    @property
    def arity(self) -> int:
        return _ARITY[self]

    @property
    def is_clifford(self) -> bool:
        return self not in (GateKind.T, GateKind.TOFFOLI)

    @classmethod
    def parse(cls, name: str) -> "GateKind":
        try:
            return cls(name.upper())
        except ValueError:
            raise ValueError(f"unknown gate {name!r}") from None


_ARITY = {
    GateKind.X: 1,
    GateKind.Z: 1,
    GateKind.H: 1,
    GateKind.S: 1,
    GateKind.T: 1,
    GateKind.CNOT: 2,
    GateKind.CZ: 2,
    GateKind.TOFFOLI: 3,
}


@dataclass(frozen=True)
class GateJob:
    """One logical gate on register wires (controls first, target last)."""

    gate: GateKind
    wires: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "wires", tuple(int(w) for w in self.wires))
        if len(self.wires) != self.gate.arity:
            raise ValueError(f"{self.gate.value} needs {self.gate.arity} wires, got {self.wires}")
        if len(set(self.wires)) != len(self.wires):
            raise ValueError(f"wire collision in {self.wires}")


@dataclass(frozen=True)
class RotationInstruction:
    axis: str
    quarter_turns: int
    control_arity: int
    wires: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "wires", tuple(int(w) for w in self.wires))
        if self.axis not in ("y", "z"):
            raise ValueError(f"axis must be 'y' or 'z', got {self.axis!r}")
        if self.quarter_turns < 1:
            raise ValueError("quarter_turns must be >= 1")
        if self.control_arity not in (0, 1, 2):
            raise ValueError("control_arity must be 0, 1 or 2")
        if len(self.wires) != self.control_arity + 1:
            raise ValueError("wire count must be control_arity + 1")
        if len(set(self.wires)) != len(self.wires):
            raise ValueError(f"wire collision in {self.wires}")

    @property
    def kind(self) -> tuple[str, int]:
        return (self.axis, self.control_arity)

    def steps(self) -> list["RotationInstruction"]:
        """Expand into single ``pi/4`` steps."""
        return [replace(self, quarter_turns=1)] * self.quarter_turns

    def remap(self, mapping: Mapping[int, int] | Sequence[int]) -> "RotationInstruction":
        return replace(self, wires=tuple(mapping[w] for w in self.wires))

    def to_line(self) -> str:
        return " ".join([self.axis, str(self.control_arity), str(self.quarter_turns), *map(str, self.wires)])


def rot(axis: str, mu: int, *wires: int) -> RotationInstruction:
    return RotationInstruction(axis, mu, len(wires) - 1, tuple(wires))


def rotation_matrix(axis: str, angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    if axis == "z":
        return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])
    if axis == "y":
        return np.array([[c, -s], [s, c]], dtype=np.complex128)
    raise ValueError(f"axis must be 'y' or 'z', got {axis!r}")


def controlled(u: np.ndarray, arity: int) -> np.ndarray:
    """Block-diagonal operator applying ``u`` only when all ``arity`` controls are 1."""
    u = np.asarray(u, dtype=np.complex128)
    if u.shape != (2, 2):
        raise ValueError("controlled() expects a single-qubit operator")
    if arity not in (0, 1, 2):
        raise ValueError("arity must be 0, 1 or 2")
    dim = 2 ** (arity + 1)
    out = np.eye(dim, dtype=np.complex128)
    out[dim - 2 :, dim - 2 :] = u
    return out


_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_Z = np.diag([1, -1]).astype(np.complex128)
_MATRICES = {
    GateKind.X: _X,
    GateKind.Z: _Z,
    GateKind.H: np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2),
    GateKind.S: np.diag([1, 1j]),
    GateKind.T: np.diag([1, np.exp(1j * np.pi / 4)]),
    GateKind.CNOT: controlled(_X, 1),
    GateKind.CZ: controlled(_Z, 1),
    GateKind.TOFFOLI: controlled(_X, 2),
}
for _m in _MATRICES.values():
    _m.flags.writeable = False


def gate_matrix(g: GateKind) -> np.ndarray:
    return _MATRICES[g]


def pauli(x: int, z: int) -> np.ndarray:
    """The mask operator ``X^x Z^z``."""
    return np.linalg.matrix_power(_X, x) @ np.linalg.matrix_power(_Z, z)


_UNIT_CACHE: dict[tuple[str, int, int], np.ndarray] = {}


def instruction_matrix(instr: RotationInstruction) -> np.ndarray:
    key = (instr.axis, instr.quarter_turns % FULL_CYCLE, instr.control_arity)
    if key not in _UNIT_CACHE:
        u = rotation_matrix(instr.axis, key[1] * QUARTER)
        m = controlled(u, instr.control_arity)
        m.flags.writeable = False
        _UNIT_CACHE[key] = m
    return _UNIT_CACHE[key]


@dataclass(frozen=True)
class DecompositionEntry:
    gate: GateKind
    sequence: tuple[RotationInstruction, ...]
    global_phase: float


# Templates on local wires 0..arity-1.  Products such as R_y(pi) R_z(pi)
# act right to left, so the R_z steps come first in the sequence.  The
# controlled gates need an extra R_z on the control(s), which cancels the
# relative phase picked up on the controls = 1 block.
DECOMPOSITIONS: dict[GateKind, DecompositionEntry] = {
    e.gate: e
    for e in [
        DecompositionEntry(GateKind.X, (rot("z", 4, 0), rot("y", 4, 0)), np.pi / 2),
        DecompositionEntry(GateKind.Z, (rot("z", 4, 0),), np.pi / 2),
        DecompositionEntry(GateKind.H, (rot("z", 4, 0), rot("y", 2, 0)), np.pi / 2),
        DecompositionEntry(GateKind.S, (rot("z", 2, 0),), np.pi / 4),
        DecompositionEntry(GateKind.T, (rot("z", 1, 0),), np.pi / 8),
        DecompositionEntry(GateKind.CZ, (rot("z", 4, 0, 1), rot("z", 2, 0)), np.pi / 4),
        DecompositionEntry(
            GateKind.CNOT, (rot("z", 4, 0, 1), rot("y", 4, 0, 1), rot("z", 2, 0)), np.pi / 4
        ),
        DecompositionEntry(
            GateKind.TOFFOLI,
            (rot("z", 4, 0, 1, 2), rot("y", 4, 0, 1, 2), rot("z", 2, 0, 1), rot("z", 1, 0)),
            np.pi / 8,
        ),
    ]
}


def decompose(
    g: GateKind,
    wires: Sequence[int],
    table: Mapping[GateKind, DecompositionEntry] = DECOMPOSITIONS,
) -> list[RotationInstruction]:
    wires = tuple(wires)
    if len(wires) != g.arity:
        raise ValueError(f"{g.value} needs {g.arity} wires, got {wires}")
    return [instr.remap(wires) for instr in table[g].sequence]


def sequence_unitary(seq: Iterable[RotationInstruction], n_wires: int) -> np.ndarray:
    """Dense matrix of an instruction sequence on ``n_wires`` local wires."""
    from .qstate import StateVector, apply_unitary

    seq = list(seq)
    dim = 2**n_wires
    cols = []
    for j in range(dim):
        e = np.zeros(dim, dtype=np.complex128)
        e[j] = 1
        s = StateVector(e)
        for instr in seq:
            s = apply_unitary(s, instruction_matrix(instr), instr.wires)
        cols.append(s.amps)
    return np.array(cols).T


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = TOL) -> bool:
    m = np.asarray(b).conj().T @ np.asarray(a)
    phase = m[0, 0]
    if abs(abs(phase) - 1) > tol:
        return False
    return bool(np.allclose(m, phase * np.eye(m.shape[0]), atol=tol, rtol=0))


def verify_decomposition(
    g: GateKind, table: Mapping[GateKind, DecompositionEntry] = DECOMPOSITIONS
) -> bool:
    entry = table[g]
    if any(instr.quarter_turns < 1 for instr in entry.sequence):
        return False
    replay = sequence_unitary(entry.sequence, g.arity)
    return is_unitary(replay) and equal_up_to_phase(replay, gate_matrix(g))


def dump_table(table: Mapping[GateKind, DecompositionEntry] = DECOMPOSITIONS) -> str:
    lines = []
    for g in GateKind:
        entry = table[g]
        lines.append(f"# {g.value} global_phase={entry.global_phase:.12f}")
        lines.extend(instr.to_line() for instr in entry.sequence)
    return "\n".join(lines) + "\n"


def mutated_table(gate: GateKind = GateKind.H) -> dict[GateKind, DecompositionEntry]:
    """Copy of the table with one instruction off by a quarter turn (test hook)."""
    table = dict(DECOMPOSITIONS)
    entry = table[gate]
    first = entry.sequence[0]
    bumped = replace(first, quarter_turns=first.quarter_turns + 1)
    table[gate] = replace(entry, sequence=(bumped, *entry.sequence[1:]))
    return table
