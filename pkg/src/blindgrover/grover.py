"""Grover search circuits over X, Z, H, S, T, CNOT, CZ and Toffoli.

Wire layout for ``n`` data qubits: data on ``0..n-1``, the phase ancilla on
``n`` (prepared in ``|1>``), then ``n-2`` clean work ancillas for the Toffoli
ladder when ``n >= 3``.  The input is taken to be already in uniform
superposition, so the opening Hadamard layer is not part of the circuit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .gates import GateJob, GateKind, gate_matrix
from .protocol import BlindSession, ProtocolOptions, Transcript
from .qotp import PauliKey, decrypt, encrypt, keygen
from .qstate import (
    StateVector,
    apply_unitary,
    basis_state,
    discard_qubit,
    marginal_probabilities,
    sample_bits,
    tensor,
)

MAX_QUBITS = 8


def _job(name: str, *wires: int) -> GateJob:
    return GateJob(GateKind.parse(name), wires)


def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_QUBITS:
        raise ValueError(f"n must be in 1..{MAX_QUBITS}, got {n}")


def _check_target(target: str, n: int) -> None:
    if len(target) != n or set(target) - {"0", "1"}:
        raise ValueError(f"target {target!r} is not a {n}-bit string")


def work_wires(n: int) -> list[int]:
    return list(range(n + 1, n + 1 + max(0, n - 2)))


def total_wires(n: int) -> int:
    return n + 1 + max(0, n - 2)


def phase_flip(wires: Sequence[int], work: Sequence[int]) -> list[GateJob]:
    """Multiply the all-ones basis state of ``wires`` by -1."""
    wires = list(wires)
    k = len(wires)
    if k == 1:
        return [_job("Z", wires[0])]
    if k == 2:
        return [_job("CZ", *wires)]
    if k == 3:
        t = wires[2]
        return [_job("H", t), _job("TOFFOLI", *wires), _job("H", t)]
    need = k - 3
    if len(work) < need:
        raise ValueError(f"{k}-wire phase flip needs {need} work ancillas")
    ladder = [_job("TOFFOLI", wires[0], wires[1], work[0])]
    for i in range(1, need):
        ladder.append(_job("TOFFOLI", work[i - 1], wires[i + 1], work[i]))
    core = phase_flip([work[need - 1], wires[-2], wires[-1]], [])
    return ladder + core + ladder[::-1]


def _x_layer(target: str) -> list[GateJob]:
    return [_job("X", i) for i, bit in enumerate(target) if bit == "0"]


def build_oracle(target: str, n: int) -> list[GateJob]:
    _check_n(n)
    _check_target(target, n)
    flip = phase_flip(list(range(n)) + [n], work_wires(n))
    return _x_layer(target) + flip + _x_layer(target)


def build_diffusion(n: int) -> list[GateJob]:
    _check_n(n)
    h = [_job("H", i) for i in range(n)]
    x = [_job("X", i) for i in range(n)]
    return h + x + phase_flip(range(n), work_wires(n)) + x + h


def grover_iterations(n: int) -> int:
    return max(1, math.floor(math.pi / 4 * math.sqrt(2**n)))


@dataclass(frozen=True)
class GroverCircuit:
    n: int
    target: str
    jobs: tuple[GateJob, ...]
    iterations: int
    oracle_spans: tuple[tuple[int, int], ...]

    @property
    def n_wires(self) -> int:
        return total_wires(self.n)

    def ancilla_state(self) -> StateVector:
        return basis_state(self.n_wires - self.n, "1" + "0" * (self.n_wires - self.n - 1))


def build_grover(target: str, iterations: Optional[int] = None) -> GroverCircuit:
    n = len(target)
    _check_n(n)
    _check_target(target, n)
    k = grover_iterations(n) if iterations is None else iterations
    oracle, diffusion = build_oracle(target, n), build_diffusion(n)
    jobs: list[GateJob] = []
    spans = []
    for _ in range(k):
        spans.append((len(jobs), len(jobs) + len(oracle)))
        jobs += oracle + diffusion
    return GroverCircuit(n, target, tuple(jobs), k, tuple(spans))


@dataclass(frozen=True)
class SearchResult:
    measured_bits: str
    success_probability: float
    oracle_calls: int


def _count_oracle_calls(c: GroverCircuit, executed: int) -> int:
    return sum(1 for start, end in c.oracle_spans if end <= executed)


def evaluate(c: GroverCircuit, final: StateVector, rng: np.random.Generator, oracle_calls: int) -> SearchResult:
    """Success probability and a sampled readout of the data wires of a full-width state."""
    probs = marginal_probabilities(final, range(c.n))
    p = float(probs[int(c.target, 2)])
    return SearchResult(sample_bits(final, range(c.n), rng), p, oracle_calls)


def apply_jobs(state: StateVector, jobs: Sequence[GateJob]) -> StateVector:
    for job in jobs:
        state = apply_unitary(state, gate_matrix(job.gate), job.wires)
    return state


def run_plain_state(c: GroverCircuit, data: StateVector) -> tuple[StateVector, int]:
    if data.n_qubits != c.n:
        raise ValueError(f"input has {data.n_qubits} qubits, circuit has {c.n} data wires")
    state = tensor(data, c.ancilla_state())
    executed = 0
    for job in c.jobs:
        state = apply_unitary(state, gate_matrix(job.gate), job.wires)
        executed += 1
    return state, _count_oracle_calls(c, executed)


def run_plain(c: GroverCircuit, data: StateVector, rng: np.random.Generator) -> SearchResult:
    final, calls = run_plain_state(c, data)
    return evaluate(c, final, rng, calls)


@dataclass
class BlindSearch:
    result: SearchResult
    dk: PauliKey
    transcript: Transcript
    state: StateVector
    decrypted: StateVector = field(repr=False)


def prepare_blind_register(
    c: GroverCircuit,
    encrypted_data: StateVector,
    key: PauliKey,
    rng: np.random.Generator,
    ancilla_key: Optional[PauliKey] = None,
) -> tuple[StateVector, PauliKey]:
    """Charlie appends the ancillas under a fresh key of his own (or ``ancilla_key``)."""
    if encrypted_data.n_qubits != c.n or len(key) != c.n:
        raise ValueError("encrypted input and key must cover the data wires")
    anc_key = keygen(c.n_wires - c.n, rng) if ancilla_key is None else ancilla_key
    if len(anc_key) != c.n_wires - c.n:
        raise ValueError("ancilla key must cover the ancilla wires")
    register = tensor(encrypted_data, encrypt(c.ancilla_state(), anc_key))
    return register, key.extended(anc_key.pairs)


def run_blind(
    c: GroverCircuit,
    encrypted_input: StateVector,
    key: PauliKey,
    rng: np.random.Generator,
    *,
    options: Optional[ProtocolOptions] = None,
    link=None,
    transcript: Optional[Transcript] = None,
    ancilla_key: Optional[PauliKey] = None,
) -> BlindSearch:
    register, full_key = prepare_blind_register(c, encrypted_input, key, rng, ancilla_key)
    session = BlindSession(register, full_key, rng, options=options, link=link, transcript=transcript)
    executed = 0
    for job in c.jobs:
        session.execute(job)
        executed += 1
    dk = session.dk
    decrypted = decrypt(session.state, dk)
    result = evaluate(c, decrypted, rng, _count_oracle_calls(c, executed))
    return BlindSearch(result, dk, session.transcript, session.state, decrypted)


def strip_ancillas(c: GroverCircuit, state: StateVector) -> StateVector:
    """Discard the (restored) ancilla wires, keeping the data register."""
    for w in range(c.n_wires - 1, c.n - 1, -1):
        state = discard_qubit(state, w)
    return state


def analytic_success(n: int, iterations: int) -> float:
    theta = math.asin(math.sqrt(1 / 2**n))
    return math.sin((2 * iterations + 1) * theta) ** 2


# --------------------------------------------------------------------------
# Circuit files


def jobs_to_text(jobs: Sequence[GateJob], c: Optional[GroverCircuit] = None) -> str:
    lines = []
    if c is not None:
        lines.append(f"# grover n={c.n} target={c.target} iterations={c.iterations} wires={c.n_wires}")
    starts = {s for s, _ in c.oracle_spans} if c else set()
    ends = {e for _, e in c.oracle_spans} if c else set()
    for i, job in enumerate(jobs):
        if i in starts:
            lines.append("# oracle")
        if i in ends:
            lines.append("# diffusion")
        lines.append(" ".join([job.gate.value, *map(str, job.wires)]))
    return "\n".join(lines) + "\n"


def parse_circuit(text: str) -> list[GateJob]:
    jobs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, *wires = line.split()
        try:
            jobs.append(GateJob(GateKind.parse(name), tuple(int(w) for w in wires)))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return jobs
