"""Multi-party harness for the searchable-encryption flow.

Roles: Alice1 owns the data, Alice2 searches it, Bob is the data center and
Charlie the trusted key center.  Classical messages go through a synchronous
FIFO :class:`Channel`.  Every quantum transfer carries decoy qubits, and an
optional eavesdropper sits on chosen edges.  Key material is moved by a
logical BB84 simulation used as a one-time pad.
"""

from __future__ import annotations

import enum
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import FrozenSet, Optional, Sequence

import numpy as np

from .grover import build_grover, prepare_blind_register, strip_ancillas
from .protocol import TO_BOB, BlindSession, ProtocolOptions, Transcript
from .qotp import PauliKey, decrypt, encrypt
from .qstate import (
    QStateError,
    StateVector,
    discard_qubit,
    marginal_probabilities,
    measure_in_basis,
    measure_qubit,
    plus_state,
    random_state,
    sample_bits,
    single_qubit,
    tensor,
)

class PartyId(enum.Enum):
    ALICE1 = "ALICE1"
    ALICE2 = "ALICE2"
    BOB = "BOB"
    CHARLIE = "CHARLIE"
    EVE = "EVE"


class MessageKind(enum.Enum):
    KEY_REQUEST = "KEY_REQUEST"
    KEY_REPLY = "KEY_REPLY"
    CIPHERTEXT_UPLOAD = "CIPHERTEXT_UPLOAD"
    SEARCH_REQUEST = "SEARCH_REQUEST"
    QUBIT_BATCH = "QUBIT_BATCH"
    INSTRUCTION = "INSTRUCTION"
    BATCH_RETURN = "BATCH_RETURN"
    DECOY_ANNOUNCE = "DECOY_ANNOUNCE"
    CLASSICAL_BIT = "CLASSICAL_BIT"
    RESULT = "RESULT"


@dataclass(frozen=True)
class Message:
    kind: MessageKind
    sender: PartyId
    receiver: PartyId
    payload: dict = field(default_factory=dict)


class ChannelError(RuntimeError):
    pass


class Channel:
    """Synchronous, lossless, FIFO per directed edge.  Also tracks who holds the quantum data."""

    def __init__(self, holder: PartyId = PartyId.ALICE1):
        self.log: list[Message] = []
        self.queues: dict[tuple[PartyId, PartyId], deque] = defaultdict(deque)
        self.holder = holder

    def send(self, msg: Message) -> None:
        self.log.append(msg)
        self.queues[(msg.sender, msg.receiver)].append(msg)

    def receive(self, sender: PartyId, receiver: PartyId) -> Message:
        q = self.queues[(sender, receiver)]
        if not q:
            raise ChannelError(f"no message pending on {sender.value}->{receiver.value}")
        return q.popleft()

    def exchange(self, msg: Message) -> Message:
        self.send(msg)
        return self.receive(msg.sender, msg.receiver)

    def move_quantum(self, sender: PartyId, receiver: PartyId) -> None:
        if self.holder is not sender:
            raise ChannelError(
                f"{sender.value} tried to send qubits held by {self.holder.value}"
            )
        self.holder = receiver


# --------------------------------------------------------------------------
# Decoys and the eavesdropper


@dataclass(frozen=True)
class DecoyConfig:
    m: int = 0
    state_pool: tuple[str, ...] = ("0", "1", "+", "-")

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("decoy count must be >= 0")


@dataclass(frozen=True)
class DecoyRecord:
    """Sender's private record: where the decoys sit in the transmitted order, and their states."""

    positions: tuple[int, ...]
    labels: tuple[str, ...]
    wires: tuple[int, ...]
    sequence_length: int


class EavesdropMode(enum.Enum):
    NONE = "none"
    INTERCEPT_RESEND = "intercept_resend"


QUANTUM_EDGES = frozenset({(PartyId.CHARLIE, PartyId.BOB), (PartyId.BOB, PartyId.CHARLIE)})


@dataclass(frozen=True)
class EavesdropPolicy:
    """Where Eve sits and how many transfers she attacks (``None`` means all of them)."""

    mode: EavesdropMode = EavesdropMode.NONE
    edges: FrozenSet[tuple[PartyId, PartyId]] = QUANTUM_EDGES
    max_intercepts: Optional[int] = 1

    @classmethod
    def intercept(cls, **kwargs) -> "EavesdropPolicy":
        return cls(EavesdropMode.INTERCEPT_RESEND, **kwargs)


class Eavesdropper:
    def __init__(self, policy: EavesdropPolicy, rng: np.random.Generator):
        self.policy = policy
        self.rng = rng
        self.intercepts = 0

    def attacks(self, sender: PartyId, receiver: PartyId) -> bool:
        p = self.policy
        if p.mode is EavesdropMode.NONE or (sender, receiver) not in p.edges:
            return False
        if p.max_intercepts is not None and self.intercepts >= p.max_intercepts:
            return False
        self.intercepts += 1
        return True


def _measure_in_basis(state: StateVector, wire: int, basis: str, rng) -> tuple[int, StateVector]:
    m = measure_in_basis(state, wire, basis, rng)
    return m.bit, m.post_state


def intercept_resend(state: StateVector, wires: Sequence[int], rng: np.random.Generator) -> StateVector:
    """Eve measures each listed wire in a random Z/X basis and forwards the collapsed qubit."""
    for w in wires:
        _, state = _measure_in_basis(state, w, "zx"[int(rng.integers(2))], rng)
    return state


def _decoy_states(cfg: DecoyConfig, rng) -> tuple[Optional[StateVector], tuple[str, ...]]:
    labels = tuple(cfg.state_pool[int(i)] for i in rng.integers(len(cfg.state_pool), size=cfg.m))
    state = None
    for label in labels:
        q = single_qubit(label)
        state = q if state is None else tensor(state, q)
    return state, labels


def _draw_positions(n_payload: int, m: int, rng) -> tuple[int, ...]:
    return tuple(sorted(int(p) for p in rng.choice(n_payload + m, size=m, replace=False)))


def add_decoys(
    payload: StateVector, cfg: DecoyConfig, rng: np.random.Generator
) -> tuple[StateVector, DecoyRecord]:
    """Append ``cfg.m`` decoys; the record says where they sit in the transmitted order."""
    decoys, labels = _decoy_states(cfg, rng)
    if decoys is None:
        return payload, DecoyRecord((), (), (), payload.n_qubits)
    n = payload.n_qubits
    record = DecoyRecord(
        _draw_positions(n, cfg.m, rng), labels, tuple(range(n, n + cfg.m)), n + cfg.m
    )
    return tensor(payload, decoys), record


def transmitted_order(record: DecoyRecord, payload_wires: Sequence[int]) -> list[int]:
    """Storage wires in the order they go over the channel."""
    decoy_at = dict(zip(record.positions, record.wires))
    payload = iter(payload_wires)
    return [decoy_at[i] if i in decoy_at else next(payload) for i in range(record.sequence_length)]


def check_decoys(
    batch: StateVector, record: DecoyRecord, rng: np.random.Generator
) -> tuple[bool, StateVector]:
    """Measure every decoy in its preparation basis, then remove it.

    Returns whether all decoys matched the announced states, and the batch
    with the decoy wires dropped.
    """
    if any(not 0 <= p < record.sequence_length for p in record.positions):
        raise ValueError("announced decoy position out of range")
    if any(not 0 <= w < batch.n_qubits for w in record.wires):
        raise ValueError("decoy wire out of range")
    passed = True
    for w, label in zip(record.wires, record.labels):
        basis = "z" if label in ("0", "1") else "x"
        expected = 0 if label in ("0", "+") else 1
        bit, batch = _measure_in_basis(batch, w, basis, rng)
        passed &= bit == expected
    for w in sorted(record.wires, reverse=True):
        batch = discard_qubit(batch, w)
    return bool(passed), batch


def detection_trial(m: int, rng: np.random.Generator, *, payload_qubits: int = 3, eavesdrop: bool = True) -> bool:
    """One transfer of a random encrypted batch with ``m`` decoys; True if the check fails."""
    payload = random_state(payload_qubits, rng)
    batch, record = add_decoys(payload, DecoyConfig(m), rng)
    if eavesdrop:
        batch = intercept_resend(batch, transmitted_order(record, range(payload_qubits)), rng)
    passed, _ = check_decoys(batch, record, rng)
    return not passed


def detection_rate(m: int, trials: int, seed: int = 0, *, payload_qubits: int = 3) -> float:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    hits = sum(detection_trial(m, rng, payload_qubits=payload_qubits) for _ in range(trials))
    return hits / trials


def analytic_detection(m: int) -> float:
    return 1 - 0.75**m


# --------------------------------------------------------------------------
# BB84


@dataclass(frozen=True)
class BB84Result:
    delivered: tuple[int, ...]
    sender_kept: tuple[int, ...]
    aborted: bool
    n_sifted: int
    sample_size: int
    sample_errors: int
    sifted_errors: int

    @property
    def sample_error_rate(self) -> float:
        return self.sample_errors / self.sample_size if self.sample_size else 0.0

    @property
    def sifted_error_rate(self) -> float:
        return self.sifted_errors / self.n_sifted if self.n_sifted else 0.0


def bb84_transport(
    bits: Sequence[int],
    rng: np.random.Generator,
    *,
    eavesdrop: bool = False,
    sample_fraction: float = 0.5,
) -> BB84Result:
    """Send ``bits`` through prepare-and-measure BB84 on a noiseless channel.

    Any error in the sacrificed sample aborts.  ``delivered`` is the receiver's
    copy of the kept sifted bits and ``sender_kept`` the sender's.
    """
    sent, received = [], []
    for bit in bits:
        a_basis = "zx"[int(rng.integers(2))]
        q = single_qubit("01"[bit] if a_basis == "z" else "+-"[bit])
        if eavesdrop:
            q = intercept_resend(q, [0], rng)
        b_basis = "zx"[int(rng.integers(2))]
        b_bit, _ = _measure_in_basis(q, 0, b_basis, rng)
        if a_basis == b_basis:
            sent.append(int(bit))
            received.append(b_bit)
    n = len(sent)
    k = int(round(sample_fraction * n))
    sample = set(rng.choice(n, size=k, replace=False).tolist()) if k else set()
    sample_errors = sum(sent[i] != received[i] for i in sample)
    keep = [i for i in range(n) if i not in sample]
    return BB84Result(
        delivered=tuple(received[i] for i in keep),
        sender_kept=tuple(sent[i] for i in keep),
        aborted=sample_errors > 0,
        n_sifted=n,
        sample_size=k,
        sample_errors=sample_errors,
        sifted_errors=sum(s != r for s, r in zip(sent, received)),
    )


class KeyTransportAborted(RuntimeError):
    pass


class EavesdropDetected(RuntimeError):
    pass


# --------------------------------------------------------------------------
# Scenario


class DecoyLink:
    """Bob<->Charlie link for the blind engine, with decoys and Eve."""

    ideal = False

    def __init__(self, net: "_Network"):
        self.net = net

    def transfer(self, state, wires, direction):
        if direction == TO_BOB:
            return self.net.quantum_transfer(state, wires, PartyId.CHARLIE, PartyId.BOB, MessageKind.QUBIT_BATCH)
        return self.net.quantum_transfer(state, wires, PartyId.BOB, PartyId.CHARLIE, MessageKind.BATCH_RETURN)

    def instruct(self, step):
        payload = {"axis": step.axis, "control_arity": step.control_arity, "wires": step.wires}
        self.net.channel.exchange(Message(MessageKind.INSTRUCTION, PartyId.CHARLIE, PartyId.BOB, payload))

    def classical(self, direction, value):
        if direction == TO_BOB:
            self.net.channel.exchange(Message(MessageKind.CLASSICAL_BIT, PartyId.CHARLIE, PartyId.BOB, {"bit": value}))
        else:
            self.net.channel.exchange(Message(MessageKind.CLASSICAL_BIT, PartyId.BOB, PartyId.CHARLIE, {"bit": value}))


class _Network:
    def __init__(self, decoys: DecoyConfig, eve: Eavesdropper, rng, sample_fraction: float):
        self.channel = Channel()
        self.decoys = decoys
        self.eve = eve
        self.rng = rng
        self.sample_fraction = sample_fraction
        self.checks: list[bool] = []

    def quantum_transfer(self, state, wires, sender, receiver, kind):
        self.channel.move_quantum(sender, receiver)
        m = self.decoys.m
        decoys, labels = _decoy_states(self.decoys, self.rng)
        positions = _draw_positions(len(wires), m, self.rng) if m else ()
        self.channel.exchange(Message(kind, sender, receiver, {"count": len(wires) + m}))
        if self.eve.attacks(sender, receiver):
            # decoys are never entangled with the payload, so they can be
            # simulated as a separate register without changing any statistics
            state = intercept_resend(state, wires, self.eve.rng)
            if decoys is not None:
                decoys = intercept_resend(decoys, range(m), self.eve.rng)
        if m:
            self.channel.exchange(
                Message(MessageKind.DECOY_ANNOUNCE, sender, receiver, {"positions": positions, "states": labels})
            )
            record = DecoyRecord((), labels, tuple(range(m)), m)
            # a spare wire keeps check_decoys' discard step well-defined
            passed, _ = check_decoys(tensor(single_qubit("0"), decoys), _shift(record), self.rng)
            self.checks.append(passed)
            if not passed:
                raise EavesdropDetected(f"decoy check failed on {sender.value}->{receiver.value}")
        return state, len(wires) + m

    def send_key_bits(self, bits: Sequence[int], sender, receiver, kind, field_name: str) -> tuple[int, ...]:
        """One-time-pad ``bits`` with a BB84 key; returns what the receiver recovers."""
        eavesdrop = self.eve.attacks(sender, receiver)
        pad_s: list[int] = []
        pad_r: list[int] = []
        while len(pad_s) < len(bits):
            raw = self.rng.integers(0, 2, size=8 * len(bits) + 16).tolist()
            res = bb84_transport(raw, self.rng, eavesdrop=eavesdrop, sample_fraction=self.sample_fraction)
            if res.aborted:
                raise KeyTransportAborted(f"BB84 abort on {sender.value}->{receiver.value}")
            pad_s += res.sender_kept
            pad_r += res.delivered
        masked = [b ^ p for b, p in zip(bits, pad_s)]
        msg = self.channel.exchange(Message(kind, sender, receiver, {field_name: tuple(masked)}))
        return tuple(b ^ p for b, p in zip(msg.payload[field_name], pad_r))


def _shift(record: DecoyRecord) -> DecoyRecord:
    return DecoyRecord(record.positions, record.labels, tuple(w + 1 for w in record.wires), record.sequence_length)


@dataclass
class ScenarioReport:
    result_bits: Optional[str]
    result_state: Optional[StateVector]
    success_probability: Optional[float]
    decoy_checks: list[bool]
    detection_flag: bool
    oracle_calls: int
    transcript: Transcript
    seed: int
    ek: Optional[PauliKey]
    dk: Optional[PauliKey]
    attempts: int
    aborted: bool
    key_aborts: int = 0
    messages: list[Message] = field(default_factory=list, repr=False)

    def to_records(self) -> str:
        p = "nan" if self.success_probability is None else f"{self.success_probability:.9f}"
        lines = [
            f"RESULT bits={self.result_bits if self.result_bits is not None else 'none'}",
            f"P_SUCCESS {p}",
            f"DETECTED {str(self.detection_flag).lower()}",
            f"DECOY_CHECKS {len(self.decoy_checks)}",
            f"DECOY_FAILURES {sum(not c for c in self.decoy_checks)}",
            f"ORACLE_CALLS {self.oracle_calls}",
            f"KEY_ABORTS {self.key_aborts}",
            f"ATTEMPTS {self.attempts}",
            f"ABORTED {str(self.aborted).lower()}",
            f"EK {self.ek.to_hex() if self.ek else 'none'}",
            f"DK {self.dk.to_hex() if self.dk else 'none'}",
            f"TRANSCRIPT_EVENTS {len(self.transcript)}",
            f"ROT_STEPS {len(self.transcript.rotations())}",
            f"SEED {self.seed}",
        ]
        return "\n".join(lines) + "\n"


def _complete_set(data: Optional[Sequence[str]], n: int) -> None:
    if data is None:
        return
    items = list(data)
    if any(len(x) != n or set(x) - {"0", "1"} for x in items):
        raise ValueError(f"data items must be {n}-bit strings matching the query width")
    if len(set(items)) != len(items) or len(items) != 2**n:
        raise ValueError("the register form needs the complete set of n-bit items")


def indexed_state(items: Sequence[str]) -> tuple[StateVector, int]:
    """Superposition (1/sqrt M) sum_j |j, data(j)>; returns the state and the index width."""
    m_items = len(items)
    if m_items == 0:
        raise ValueError("no items")
    width = len(items[0])
    if any(len(x) != width for x in items):
        raise ValueError("items must share one width")
    m = max(1, (m_items - 1).bit_length())
    amps = np.zeros(2 ** (m + width), dtype=np.complex128)
    for j, item in enumerate(items):
        amps[(j << width) | int(item, 2)] = 1
    return StateVector(amps / np.sqrt(m_items)), m


def encrypt_indexed(items: Sequence[str], key: PauliKey) -> tuple[StateVector, PauliKey]:
    """Encrypt only the data part; the index register is sent in the clear."""
    state, m = indexed_state(items)
    full = PauliKey(((0, 0),) * m + key.pairs)
    if len(full) != state.n_qubits:
        raise ValueError("key must cover the data wires")
    return encrypt(state, full), full


def _drain(state: StateVector, wires: Sequence[int], rng) -> StateVector:
    for w in sorted(wires, reverse=True):
        try:
            state = discard_qubit(state, w)
        except QStateError:
            state = discard_qubit(measure_qubit(state, w, rng).post_state, w)
    return state


def _attempt(net: _Network, query: str, rng, options, report: dict) -> ScenarioReport:
    n = len(query)
    ch = net.channel
    ch.holder = PartyId.ALICE1

    # key request and ek delivery
    msg = ch.exchange(Message(MessageKind.KEY_REQUEST, PartyId.ALICE1, PartyId.CHARLIE, {"n": n}))
    ek_charlie = PauliKey.from_bits(rng.integers(0, 2, size=2 * msg.payload["n"]).tolist())
    ek_alice = PauliKey.from_bits(
        net.send_key_bits(ek_charlie.bits(), PartyId.CHARLIE, PartyId.ALICE1, MessageKind.KEY_REPLY, "key")
    )
    report["ek"] = ek_charlie

    # Alice1 encrypts and uploads; Charlie fetches from Bob
    cipher = encrypt(plus_state(n), ek_alice)
    cipher, _ = net.quantum_transfer(cipher, range(n), PartyId.ALICE1, PartyId.BOB, MessageKind.CIPHERTEXT_UPLOAD)
    ch.exchange(Message(MessageKind.SEARCH_REQUEST, PartyId.ALICE2, PartyId.CHARLIE, {"query": query}))
    cipher, _ = net.quantum_transfer(cipher, range(n), PartyId.BOB, PartyId.CHARLIE, MessageKind.QUBIT_BATCH)

    # blind search
    circuit = build_grover(query)
    register, key = prepare_blind_register(circuit, cipher, ek_charlie, rng)
    session = BlindSession(register, key, rng, options=options, link=DecoyLink(net))
    for job in circuit.jobs:
        session.execute(job)
    report["transcript"] = session.transcript
    dk = session.dk
    report["dk"] = dk

    # result and dk go to Alice2
    dk_alice = PauliKey.from_bits(
        net.send_key_bits(dk.bits(), PartyId.CHARLIE, PartyId.ALICE2, MessageKind.RESULT, "dk")
    )
    final, _ = net.quantum_transfer(
        session.state, range(session.state.n_qubits), PartyId.CHARLIE, PartyId.ALICE2, MessageKind.RESULT
    )
    plain = decrypt(final, dk_alice)
    try:
        data = strip_ancillas(circuit, plain)
    except QStateError:
        data = _drain(plain, range(circuit.n, circuit.n_wires), rng)
    p = float(marginal_probabilities(data, range(n))[int(query, 2)])
    bits = sample_bits(data, range(n), rng)
    return ScenarioReport(
        result_bits=bits,
        result_state=data,
        success_probability=p,
        decoy_checks=net.checks,
        detection_flag=False,
        oracle_calls=circuit.iterations,
        transcript=session.transcript,
        seed=0,
        ek=ek_charlie,
        dk=dk,
        attempts=0,
        aborted=False,
        messages=ch.log,
    )


def run_scenario(
    query: str,
    *,
    data: Optional[Sequence[str]] = None,
    decoys: DecoyConfig = DecoyConfig(),
    eve: EavesdropPolicy = EavesdropPolicy(),
    seed: int = 0,
    retries: int = 3,
    options: Optional[ProtocolOptions] = None,
    sample_fraction: float = 0.5,
) -> ScenarioReport:
    """Run the full store-and-search flow; restart from the key request after a detection."""
    n = len(query)
    if n < 1 or set(query) - {"0", "1"}:
        raise ValueError(f"query {query!r} is not a bitstring")
    _complete_set(data, n)
    rng = np.random.default_rng(seed)
    eavesdropper = Eavesdropper(eve, np.random.default_rng([seed, 1]))
    net = _Network(decoys, eavesdropper, rng, sample_fraction)
    partial: dict = {}
    key_aborts = 0
    for attempt in range(1, retries + 2):
        try:
            report = _attempt(net, query, rng, options, partial)
        except EavesdropDetected:
            continue
        except KeyTransportAborted:
            key_aborts += 1
            continue
        report.seed = seed
        report.attempts = attempt
        report.key_aborts = key_aborts
        report.detection_flag = not all(net.checks)
        return report
    return ScenarioReport(
        result_bits=None,
        result_state=None,
        success_probability=None,
        decoy_checks=net.checks,
        detection_flag=not all(net.checks),
        oracle_calls=0,
        transcript=partial.get("transcript", Transcript()),
        seed=seed,
        ek=partial.get("ek"),
        dk=None,
        attempts=retries + 1,
        aborted=True,
        key_aborts=key_aborts,
        messages=net.channel.log,
    )
