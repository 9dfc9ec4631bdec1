"""Charlie's blind-execution engine.

Charlie (the trusted key center) holds the encrypted register and the Pauli
key.  For every logical gate he assembles a three-qubit batch (the gate's
wires plus trap qubits), then drives Bob (the data center) through rounds in
which Bob applies exactly one ``pi/4`` rotation to the batch and sends it back.
Trap gates are whole rotation cycles, so they act as the identity.  Charlie
updates the decryption key after each gate from a per-gate rule.

Bob's view is collected in a :class:`Transcript`: rotation kinds on
batch-local wires, transfer counts, his own measurement outcomes and the
classical bits he receives.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, fields
from typing import Mapping, Optional, Protocol, Sequence, Union

import numpy as np

from .gates import (
    GateJob,
    GateKind,
    RotationInstruction,
    decompose,
    instruction_matrix,
)
from .qotp import PauliKey, apply_pauli
from .qstate import (
    StateVector,
    apply_unitary,
    discard_qubit,
    measure_qubit,
    move_wire,
    project_qubit,
    single_qubit,
    tensor,
)

BATCH_SIZE = 3
TO_BOB = "to_bob"
TO_CHARLIE = "to_charlie"
TRAP_POOL = ("0", "1", "+", "-")


# --------------------------------------------------------------------------
# Bob's transcript


@dataclass(frozen=True)
class RotEvent:
    axis: str
    control_arity: int
    wires: tuple[int, ...]

    def to_line(self) -> str:
        return " ".join(["ROT", self.axis, str(self.control_arity), *map(str, self.wires)])


@dataclass(frozen=True)
class XferEvent:
    direction: str
    count: int

    def to_line(self) -> str:
        return f"XFER {self.direction} {self.count}"


@dataclass(frozen=True)
class MeasEvent:
    wire: int
    outcome: int

    def to_line(self) -> str:
        return f"MEAS {self.wire} {self.outcome}"


@dataclass(frozen=True)
class CbitEvent:
    value: int

    def to_line(self) -> str:
        return f"CBIT {self.value}"


Event = Union[RotEvent, XferEvent, MeasEvent, CbitEvent]
EVENT_TYPES = (RotEvent, XferEvent, MeasEvent, CbitEvent)


@dataclass
class Transcript:
    events: list = field(default_factory=list)

    def append(self, event: Event) -> None:
        self.events.append(event)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def rotations(self) -> list[RotEvent]:
        return [e for e in self.events if isinstance(e, RotEvent)]

    def classical_bits(self) -> list[int]:
        return [e.value for e in self.events if isinstance(e, CbitEvent)]

    def kind_counts(self) -> Counter:
        return Counter((e.axis, e.control_arity) for e in self.rotations())

    def to_text(self) -> str:
        return "".join(e.to_line() + "\n" for e in self.events)

    @classmethod
    def from_text(cls, text: str) -> "Transcript":
        t = cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tag, *rest = line.split()
            try:
                if tag == "ROT":
                    t.append(RotEvent(rest[0], int(rest[1]), tuple(int(w) for w in rest[2:])))
                elif tag == "XFER":
                    t.append(XferEvent(rest[0], int(rest[1])))
                elif tag == "MEAS":
                    t.append(MeasEvent(int(rest[0]), int(rest[1])))
                elif tag == "CBIT":
                    t.append(CbitEvent(int(rest[0])))
                else:
                    raise ValueError(f"unknown event {tag!r}")
            except (IndexError, ValueError) as exc:
                raise ValueError(f"line {lineno}: cannot parse {raw!r}: {exc}") from None
        return t


# --------------------------------------------------------------------------
# Links between Charlie and Bob


class Link(Protocol):
    ideal: bool

    def transfer(self, state: StateVector, wires: Sequence[int], direction: str) -> tuple[StateVector, int]:
        """Move ``wires`` across the channel; return the delivered state and qubit count."""

    def classical(self, direction: str, value: int) -> None:
        """Carry one classical bit."""

    def instruct(self, step: RotationInstruction) -> None:
        """Carry one rotation request from Charlie to Bob."""


class IdealLink:
    ideal = True

    def transfer(self, state, wires, direction):
        return state, len(wires)

    def classical(self, direction, value):
        pass

    def instruct(self, step):
        pass


# --------------------------------------------------------------------------
# Key update rules


def _bits(in_bits: Sequence[int], n: int) -> tuple[int, ...]:
    bits = tuple(int(b) for b in in_bits)
    if len(bits) != n or any(b not in (0, 1) for b in bits):
        raise ValueError(f"expected {n} key bits, got {in_bits!r}")
    return bits


def key_update(g: GateKind, in_bits: Sequence[int], aux: Optional[Mapping[str, int]] = None) -> tuple[int, ...]:
    """Output key bits ``x1 z1 x2 z2 ...`` on the gate's wires after gate ``g``.

    ``T`` needs ``aux`` with the measurement outcome ``c`` and the ancilla bits
    ``y`` and ``d``.  For ``TOFFOLI`` the result is the key left after
    Charlie strips the correction masks, which does not depend on the
    re-encryption bits.
    """
    n = 2 * g.arity
    bits = _bits(in_bits, n)
    if g in (GateKind.X, GateKind.Z):
        return bits
    if g is GateKind.H:
        a, b = bits
        return (b, a)
    if g is GateKind.S:
        a, b = bits
        return (a, a ^ b)
    if g is GateKind.CNOT:
        a, b, c, d = bits
        return (a, b ^ d, a ^ c, d)
    if g is GateKind.CZ:
        a, b, c, d = bits
        return (a, b ^ c, c, a ^ d)
    if g is GateKind.T:
        if aux is None or not {"c", "y", "d"} <= set(aux):
            raise ValueError("T key update needs aux bits c, y and d")
        a, b = bits
        c, y, d = (int(aux[k]) for k in ("c", "y", "d"))
        return (a ^ c, (a & (c ^ y ^ 1)) ^ b ^ d ^ y)
    if g is GateKind.TOFFOLI:
        a, b = bits[:2]
        return (a, b, 0, 0, 0, 0)
    raise ValueError(f"no key rule for {g}")


def toffoli_correction_mask(in_bits: Sequence[int]) -> tuple[int, ...]:
    """Mask on the Toffoli wires after Bob's CZ/CNOT corrections, before stripping."""
    a, b, c, d, e, f = _bits(in_bits, 6)
    return (a, b ^ (c & f), c, d ^ (a & f), e ^ (a & c), f)


# --------------------------------------------------------------------------
# Traps


@dataclass(frozen=True)
class BatchLayout:
    """``slots[i]`` is the job-local logical index in batch slot ``i`` or ``None`` for a trap."""

    slots: tuple[Optional[int], ...]

    @property
    def trap_slots(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.slots) if s is None)

    def slot_of(self, logical: int) -> int:
        return self.slots.index(logical)


@dataclass(frozen=True)
class TrapQubit:
    label: str
    key: tuple[int, int]
    state: StateVector


def _as_arity(job: Union[GateJob, int]) -> int:
    return job.gate.arity if isinstance(job, GateJob) else int(job)


def insert_traps(job: Union[GateJob, int], rng: np.random.Generator) -> tuple[BatchLayout, list[TrapQubit]]:
    """Random batch layout for a job touching ``arity`` wires, plus fresh trap qubits."""
    k = _as_arity(job)
    if not 0 <= k <= BATCH_SIZE:
        raise ValueError(f"a batch holds at most {BATCH_SIZE} logical qubits")
    items: list[Optional[int]] = list(range(k)) + [None] * (BATCH_SIZE - k)
    order = rng.permutation(BATCH_SIZE)
    layout = BatchLayout(tuple(items[i] for i in order))
    traps = []
    for _ in range(BATCH_SIZE - k):
        label = TRAP_POOL[int(rng.integers(len(TRAP_POOL)))]
        x, z = (int(b) for b in rng.integers(0, 2, size=2))
        traps.append(TrapQubit(label, (x, z), apply_pauli(single_qubit(label), 0, x, z)))
    return layout, traps


def _trap_cycle(rng: np.random.Generator, batch_size: int) -> list[RotationInstruction]:
    arity = int(rng.integers(0, min(2, batch_size - 1) + 1))
    axis = "yz"[int(rng.integers(2))]
    wires = tuple(int(w) for w in rng.permutation(batch_size)[: arity + 1])
    # 2*pi is -I for a bare rotation; a controlled one needs the full 4*pi
    length = 8 if arity == 0 else 16
    return [RotationInstruction(axis, 1, arity, wires)] * length


def insert_trap_gates(
    actual: Sequence[RotationInstruction],
    trap_slots: Sequence[int],
    rng: np.random.Generator,
    *,
    batch_size: int = BATCH_SIZE,
    min_trap_steps: int = 8,
) -> list[RotationInstruction]:
    """Interleave identity-valued trap cycles with the actual steps.

    Cycles acting only on trap slots commute with the actual steps, so their
    steps are riffled in individually.  Cycles touching a logical slot are
    spliced in as contiguous blocks, which is the identity wherever it lands.
    """
    steps = [s for instr in actual for s in instr.steps()]
    traps = set(trap_slots)
    free: list[RotationInstruction] = []
    blocks: list[list[RotationInstruction]] = []
    count = 0
    while count < min_trap_steps:
        cycle = _trap_cycle(rng, batch_size)
        if set(cycle[0].wires) <= traps:
            free.extend(cycle)
        else:
            blocks.append(cycle)
        count += len(cycle)

    total = len(steps) + len(free)
    free_pos = set(rng.choice(total, size=len(free), replace=False).tolist()) if free else set()
    merged, si, fi = [], iter(steps), iter(free)
    for i in range(total):
        merged.append(next(fi) if i in free_pos else next(si))
    for block in blocks:
        pos = int(rng.integers(0, len(merged) + 1))
        merged[pos:pos] = block
    return merged


# --------------------------------------------------------------------------
# Engine


@dataclass(frozen=True)
class ProtocolOptions:
    trap_rounds: int = 8


@dataclass(frozen=True)
class BlindGateResult:
    state: StateVector
    dk: PauliKey
    transcript: Transcript


class BlindSession:
    """Mutable protocol state for one run: register, key, transcript."""

    def __init__(
        self,
        register: StateVector,
        key: PauliKey,
        rng: np.random.Generator,
        *,
        options: Optional[ProtocolOptions] = None,
        link: Optional[Link] = None,
        transcript: Optional[Transcript] = None,
    ):
        if len(key) != register.n_qubits:
            raise ValueError(f"key covers {len(key)} wires, register has {register.n_qubits}")
        self.state = register
        self.key = list(key.pairs)
        self.n = register.n_qubits
        self.rng = rng
        self.options = options or ProtocolOptions()
        self.link = link or IdealLink()
        self.transcript = transcript if transcript is not None else Transcript()

    @property
    def dk(self) -> PauliKey:
        return PauliKey(tuple(self.key))

    def result(self) -> BlindGateResult:
        return BlindGateResult(self.state, self.dk, self.transcript)

    # -- plumbing ---------------------------------------------------------

    def _send(self, wires: Sequence[int], direction: str) -> None:
        self.state, count = self.link.transfer(self.state, list(wires), direction)
        self.transcript.append(XferEvent(direction, count))

    def _mask(self, wire: int, x: int, z: int) -> None:
        self.state = apply_pauli(self.state, wire, x, z)

    def _drop(self, wire: int) -> None:
        if not self.link.ideal:
            # a disturbed trap may be entangled; measuring it first keeps the
            # remaining state pure and is what throwing it away amounts to
            self.state = measure_qubit(self.state, wire, self.rng).post_state
        self.state = discard_qubit(self.state, wire)

    def run_batch(
        self,
        logical_wires: Sequence[int],
        actual: Sequence[RotationInstruction],
        *,
        measure: Optional[int] = None,
        branch: Optional[int] = None,
    ) -> Optional[int]:
        """One batch: ``actual`` is on job-local wires ``0..k-1`` of ``logical_wires``.

        ``measure`` names a job-local wire that Bob measures after his last
        rotation; the outcome is returned.  ``branch`` post-selects that outcome.
        """
        logical_wires = list(logical_wires)
        layout, traps = insert_traps(len(logical_wires), self.rng)
        base = self.state.n_qubits
        for t in traps:
            self.state = tensor(self.state, t.state)
        trap_iter = iter(range(base, base + len(traps)))
        slot_wire = [next(trap_iter) if s is None else logical_wires[s] for s in layout.slots]

        local_to_slot = {j: layout.slot_of(j) for j in range(len(logical_wires))}
        seq = insert_trap_gates(
            [instr.remap(local_to_slot) for instr in actual],
            layout.trap_slots,
            self.rng,
            min_trap_steps=self.options.trap_rounds,
        )
        outcome = None
        rounds = max(len(seq), 1 if measure is not None else 0)
        for i in range(rounds):
            self._send(slot_wire, TO_BOB)
            if i < len(seq):
                step = seq[i]
                self.link.instruct(step)
                self.transcript.append(RotEvent(step.axis, step.control_arity, step.wires))
                self.state = apply_unitary(
                    self.state, instruction_matrix(step), [slot_wire[w] for w in step.wires]
                )
            if measure is not None and i == rounds - 1:
                outcome = self._bob_measure(logical_wires[measure], branch)
                self.transcript.append(MeasEvent(local_to_slot[measure], outcome))
            self._send(slot_wire, TO_CHARLIE)
        if outcome is not None:
            self.link.classical(TO_CHARLIE, outcome)

        for w in range(base + len(traps) - 1, base - 1, -1):
            self._drop(w)
        return outcome

    def _bob_measure(self, wire: int, branch: Optional[int]) -> int:
        if branch is None:
            m = measure_qubit(self.state, wire, self.rng)
            self.state = m.post_state
            return m.bit
        self.state = project_qubit(self.state, wire, branch)
        return branch

    # -- gates ---------------------------------------------------------------

    def execute(self, job: GateJob) -> None:
        for w in job.wires:
            if not 0 <= w < self.n:
                raise ValueError(f"wire {w} out of range for a {self.n}-qubit register")
        if job.gate is GateKind.T:
            self.t_gate(job.wires[0])
        elif job.gate is GateKind.TOFFOLI:
            self.toffoli(job.wires)
        else:
            self.run_batch(job.wires, decompose(job.gate, range(job.gate.arity)))
            self._update(job.gate, job.wires)

    def _update(self, g: GateKind, wires: Sequence[int], aux=None) -> None:
        bits = [b for w in wires for b in self.key[w]]
        out = key_update(g, bits, aux)
        for i, w in enumerate(wires):
            self.key[w] = (out[2 * i], out[2 * i + 1])

    def t_gate(
        self,
        wire: int,
        *,
        y: Optional[int] = None,
        d: Optional[int] = None,
        branch: Optional[int] = None,
    ) -> dict:
        a, b = self.key[wire]
        self.run_batch([wire], decompose(GateKind.T, [0]))

        y = int(self.rng.integers(2)) if y is None else int(y)
        d = int(self.rng.integers(2)) if d is None else int(d)
        anc = single_qubit("+")
        if y:
            anc = apply_unitary(anc, np.diag([1, 1j]), [0])
        anc = apply_pauli(anc, 0, 0, d)
        self.state = tensor(self.state, anc)
        anc_wire = self.state.n_qubits - 1

        # ancilla controls, data is the target and gets measured
        c = self.run_batch([anc_wire, wire], decompose(GateKind.CNOT, [0, 1]), measure=1, branch=branch)
        x = a ^ y
        self.link.classical(TO_BOB, x)
        self.transcript.append(CbitEvent(x))

        self.state = discard_qubit(self.state, wire)
        anc_wire -= 1
        self.run_batch([anc_wire], decompose(GateKind.S, [0]) if x else [])
        self.state = move_wire(self.state, anc_wire, wire)
        self._update(GateKind.T, [wire], {"c": c, "y": y, "d": d})
        return {"c": c, "y": y, "d": d, "x": x}

    def toffoli(self, wires: Sequence[int]) -> None:
        w = list(wires)
        a, b, c, d, e, f = (bit for q in w for bit in self.key[q])
        self.run_batch(w, decompose(GateKind.TOFFOLI, [0, 1, 2]))

        corrections = [(f, GateKind.CZ, (0, 1)), (c, GateKind.CNOT, (0, 2)), (a, GateKind.CNOT, (1, 2))]
        for needed, g, pair in corrections:
            if not needed:
                self._dummy_batch(g)
                continue
            fresh = [int(v) for v in self.rng.integers(0, 2, size=4)]
            p, q = w[pair[0]], w[pair[1]]
            self._mask(p, fresh[0], fresh[1])
            self._mask(q, fresh[2], fresh[3])
            self.run_batch(w, decompose(g, pair))
            out = key_update(g, fresh)
            self._mask(p, out[0], out[1])
            self._mask(q, out[2], out[3])

        mask = toffoli_correction_mask((a, b, c, d, e, f))
        self._mask(w[0], 0, mask[1] ^ b)
        self._mask(w[1], mask[2], mask[3])
        self._mask(w[2], mask[4], mask[5])
        self._update(GateKind.TOFFOLI, w)

    def _dummy_batch(self, g: GateKind) -> None:
        # an unneeded correction still runs, on two throwaway qubits, so the
        # number of batches Bob sees does not depend on the key
        base = self.state.n_qubits
        _, extra = insert_traps(1, self.rng)
        for t in extra:
            self.state = tensor(self.state, t.state)
        self.run_batch([base, base + 1], decompose(g, (0, 1)))
        for w in (base + 1, base):
            self.state = measure_qubit(self.state, w, self.rng).post_state
            self.state = discard_qubit(self.state, w)

    def run(self, jobs: Sequence[GateJob]) -> BlindGateResult:
        for job in jobs:
            self.execute(job)
        return self.result()


def execute_gate_blind(
    job: GateJob,
    register: StateVector,
    key: PauliKey,
    rng: np.random.Generator,
    *,
    options: Optional[ProtocolOptions] = None,
    link: Optional[Link] = None,
    transcript: Optional[Transcript] = None,
) -> BlindGateResult:
    session = BlindSession(register, key, rng, options=options, link=link, transcript=transcript)
    session.execute(job)
    return session.result()


def t_gate_protocol(
    register: StateVector,
    key: PauliKey,
    wire: int,
    rng: np.random.Generator,
    *,
    y: Optional[int] = None,
    d: Optional[int] = None,
    branch: Optional[int] = None,
    options: Optional[ProtocolOptions] = None,
    link: Optional[Link] = None,
) -> tuple[BlindGateResult, dict]:
    """Blind T gate via the ancilla gadget; also returns the bits ``c, y, d, x``."""
    session = BlindSession(register, key, rng, options=options, link=link)
    bits = session.t_gate(wire, y=y, d=d, branch=branch)
    return session.result(), bits


def toffoli_protocol(
    register: StateVector,
    key: PauliKey,
    wires: Sequence[int],
    rng: np.random.Generator,
    *,
    options: Optional[ProtocolOptions] = None,
    link: Optional[Link] = None,
) -> BlindGateResult:
    wires = tuple(wires)
    if len(set(wires)) != 3:
        raise ValueError("Toffoli needs three distinct wires")
    session = BlindSession(register, key, rng, options=options, link=link)
    session.toffoli(wires)
    return session.result()


def run_blind_jobs(
    jobs: Sequence[GateJob],
    register: StateVector,
    key: PauliKey,
    rng: np.random.Generator,
    **kwargs,
) -> BlindGateResult:
    return BlindSession(register, key, rng, **kwargs).run(jobs)


def event_field_names() -> set[str]:
    return {f.name for cls in EVENT_TYPES for f in fields(cls)}
