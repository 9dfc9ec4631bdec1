"""Dense state-vector simulation.

Wire 0 is the most significant bit of the amplitude index, so the label
``"011"`` on three wires is amplitude index 3.  Every operation returns a new
:class:`StateVector`; nothing is mutated in place.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

TOL = 1e-9


class QStateError(ValueError):
    """Raised for malformed states, wires or operators."""


@dataclass(frozen=True)
class StateVector:
    amps: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amps, dtype=np.complex128).reshape(-1)
        size = amps.shape[0]
        if size < 2 or size & (size - 1):
            raise QStateError(f"amplitude count {size} is not a power of two >= 2")
        if not np.all(np.isfinite(amps)):
            raise QStateError("state contains NaN or Inf")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > TOL:
            raise QStateError(f"state is not normalized (norm^2 = {norm!r})")
        amps.flags.writeable = False
        object.__setattr__(self, "amps", amps)

    @property
    def n_qubits(self) -> int:
        return self.amps.shape[0].bit_length() - 1

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def __len__(self) -> int:
        return self.amps.shape[0]


@dataclass(frozen=True)
class MeasurementOutcome:
    bit: int
    post_state: StateVector


def _normalized(amps: np.ndarray) -> StateVector:
    # internal results are finite and power-of-two sized by construction
    out = np.ascontiguousarray(amps, dtype=np.complex128) / np.linalg.norm(amps)
    out.flags.writeable = False
    state = object.__new__(StateVector)
    object.__setattr__(state, "amps", out)
    return state


def _check_wire(state: StateVector, q: int) -> None:
    if not 0 <= q < state.n_qubits:
        raise QStateError(f"wire {q} out of range for {state.n_qubits} qubits")


def basis_state(n: int, bits: str) -> StateVector:
    if n == 0:
        raise QStateError("empty register")
    if len(bits) != n or set(bits) - {"0", "1"}:
        raise QStateError(f"bits {bits!r} do not describe {n} qubits")
    amps = np.zeros(2**n, dtype=np.complex128)
    amps[int(bits, 2)] = 1.0
    return StateVector(amps)


def plus_state(n: int) -> StateVector:
    if n < 1:
        raise QStateError("empty register")
    return StateVector(np.full(2**n, 2 ** (-n / 2), dtype=np.complex128))


def single_qubit(label: str) -> StateVector:
    """One of the four BB84 states ``0``, ``1``, ``+``, ``-``."""
    s = 2**-0.5
    table = {"0": [1, 0], "1": [0, 1], "+": [s, s], "-": [s, -s]}
    try:
        return StateVector(np.array(table[label], dtype=np.complex128))
    except KeyError:
        raise QStateError(f"unknown single-qubit label {label!r}") from None


def random_state(n: int, rng: np.random.Generator) -> StateVector:
    """Haar-distributed pure state on ``n`` qubits."""
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return _normalized(v)


def is_unitary(u: np.ndarray, tol: float = TOL) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.allclose(u @ u.conj().T, np.eye(u.shape[0]), atol=tol, rtol=0))


_UNITARY_SEEN: set[bytes] = set()


def _check_unitary(u: np.ndarray) -> None:
    key = u.tobytes()
    if key in _UNITARY_SEEN:
        return
    if not is_unitary(u):
        raise QStateError("operator is not unitary")
    if len(_UNITARY_SEEN) < 4096:
        _UNITARY_SEEN.add(key)


def apply_unitary(state: StateVector, u: np.ndarray, wires: Sequence[int]) -> StateVector:
    """Apply ``u`` to ``wires`` (first listed wire is the most significant of ``u``)."""
    u = np.asarray(u, dtype=np.complex128)
    wires = list(wires)
    k = len(wires)
    if len(set(wires)) != k:
        raise QStateError(f"wire collision in {wires}")
    for w in wires:
        _check_wire(state, w)
    if u.shape != (2**k, 2**k):
        raise QStateError(f"operator of shape {u.shape} does not act on {k} wires")
    _check_unitary(u)

    n = state.n_qubits
    psi = state.amps.reshape((2,) * n)
    gate = u.reshape((2,) * (2 * k))
    out = np.tensordot(gate, psi, axes=(list(range(k, 2 * k)), wires))
    # tensordot puts the acted-on axes first; move them back into place
    out = np.moveaxis(out, list(range(k)), wires)
    return _normalized(out.reshape(-1))


def project_qubit(state: StateVector, q: int, bit: int) -> StateVector:
    """Post-select wire ``q`` on ``bit``; the branch must have nonzero weight."""
    _check_wire(state, q)
    psi = np.array(state.amps.reshape((2,) * state.n_qubits))
    index = [slice(None)] * state.n_qubits
    index[q] = 1 - bit
    psi[tuple(index)] = 0.0
    weight = float(np.vdot(psi, psi).real)
    if weight < TOL**2:
        raise QStateError(f"outcome {bit} on wire {q} has zero probability")
    return _normalized(psi.reshape(-1))


def bit_probability(state: StateVector, q: int) -> float:
    """Born probability of reading 1 on wire ``q``."""
    _check_wire(state, q)
    probs = state.probabilities().reshape((2,) * state.n_qubits)
    return float(np.take(probs, 1, axis=q).sum())


def measure_qubit(state: StateVector, q: int, rng: np.random.Generator) -> MeasurementOutcome:
    p1 = bit_probability(state, q)
    bit = int(rng.random() < p1)
    return MeasurementOutcome(bit, project_qubit(state, q, bit))


_BASES = {
    "z": np.eye(2, dtype=np.complex128),
    "x": np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2),
}


def measure_in_basis(state: StateVector, q: int, basis: str, rng: np.random.Generator) -> MeasurementOutcome:
    """Measure wire ``q`` in the ``z`` or ``x`` basis; bit 1 means ``|1>`` or ``|->``."""
    _check_wire(state, q)
    try:
        vecs = _BASES[basis]
    except KeyError:
        raise QStateError(f"unknown basis {basis!r}") from None
    psi = state.amps.reshape(2**q, 2, -1)
    # column k of vecs is the k-th basis vector
    comps = np.einsum("ak,iar->kir", vecs.conj(), psi)
    p1 = float(np.vdot(comps[1], comps[1]).real)
    bit = int(rng.random() < p1)
    post = np.einsum("a,ir->iar", vecs[:, bit], comps[bit])
    return MeasurementOutcome(bit, _normalized(post.reshape(-1)))


def reduced_density_matrix(state: StateVector, q: int) -> np.ndarray:
    _check_wire(state, q)
    psi = np.moveaxis(state.amps.reshape((2,) * state.n_qubits), q, 0).reshape(2, -1)
    return psi @ psi.conj().T


def discard_qubit(state: StateVector, q: int) -> StateVector:
    """Drop wire ``q``, which must be in a pure product state with the rest."""
    if state.n_qubits < 2:
        raise QStateError("cannot discard the last qubit")
    rho = reduced_density_matrix(state, q)
    purity = float(np.trace(rho @ rho).real)
    if purity < 1 - TOL:
        raise QStateError("cannot discard entangled qubit")
    psi = np.moveaxis(state.amps.reshape((2,) * state.n_qubits), q, 0)
    branch = 0 if np.linalg.norm(psi[0]) >= np.linalg.norm(psi[1]) else 1
    return _normalized(psi[branch].reshape(-1))


def tensor(a: StateVector, b: StateVector) -> StateVector:
    return StateVector(np.kron(a.amps, b.amps))


def permute_wires(state: StateVector, order: Sequence[int]) -> StateVector:
    """Relabel wires: new wire ``i`` is old wire ``order[i]``."""
    order = list(order)
    if sorted(order) != list(range(state.n_qubits)):
        raise QStateError(f"{order} is not a permutation of the wires")
    psi = state.amps.reshape((2,) * state.n_qubits)
    return StateVector(np.transpose(psi, order).reshape(-1))


def move_wire(state: StateVector, src: int, dst: int) -> StateVector:
    order = list(range(state.n_qubits))
    order.insert(dst, order.pop(src))
    return permute_wires(state, order)


def overlap(a: StateVector, b: StateVector) -> complex:
    if a.n_qubits != b.n_qubits:
        raise QStateError("dimension mismatch")
    return complex(np.vdot(a.amps, b.amps))


def fidelity(a: StateVector, b: StateVector) -> float:
    return abs(overlap(a, b)) ** 2


def equal_up_to_global_phase(a: StateVector, b: StateVector, tol: float = TOL) -> bool:
    return abs(overlap(a, b)) >= 1 - tol


def marginal_probabilities(state: StateVector, wires: Sequence[int]) -> np.ndarray:
    """Joint outcome distribution of ``wires``, indexed in listed-wire order."""
    wires = list(wires)
    for w in wires:
        _check_wire(state, w)
    probs = state.probabilities().reshape((2,) * state.n_qubits)
    rest = tuple(i for i in range(state.n_qubits) if i not in wires)
    marg = probs.sum(axis=rest) if rest else probs
    # remaining axes are in ascending wire order
    kept = sorted(wires)
    marg = np.transpose(marg, [kept.index(w) for w in wires])
    return marg.reshape(-1)


def sample_bits(state: StateVector, wires: Sequence[int], rng: np.random.Generator) -> str:
    probs = marginal_probabilities(state, wires)
    idx = int(rng.choice(len(probs), p=probs / probs.sum()))
    return format(idx, f"0{len(wires)}b")
