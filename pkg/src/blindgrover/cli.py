"""Command-line front end.

Records mode (the default) prints ``KEY value`` lines; text mode prints the
same facts for a human reader.  Exit codes: 0 ok, 1 failed check, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import gates
from .gates import GateJob, GateKind, gate_matrix
from .grover import (
    MAX_QUBITS,
    apply_jobs,
    build_grover,
    jobs_to_text,
    parse_circuit,
    run_blind,
    run_plain,
)
from .parties import DecoyConfig, EavesdropPolicy, analytic_detection, detection_rate, run_scenario
from .protocol import BlindSession
from .qotp import decrypt, encrypt, keygen
from .qstate import apply_unitary, basis_state, equal_up_to_global_phase, plus_state, random_state

BLIND_MAX_QUBITS = 4
SEED_ENV = "BLINDGROVER_SEED"


class UsageError(Exception):
    pass


class Output:
    def __init__(self, mode: str, stream=None):
        self.mode = mode
        self.stream = stream or sys.stdout

    def record(self, key: str, value, label: Optional[str] = None) -> None:
        if self.mode == "records":
            print(f"{key} {value}", file=self.stream)
        else:
            print(f"{label or key.lower().replace('_', ' ')}: {value}", file=self.stream)

    def raw(self, text: str) -> None:
        self.stream.write(text)


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None


def _target(args) -> str:
    target = args.target
    if set(target) - {"0", "1"} or not target:
        raise UsageError(f"target {target!r} is not a bitstring")
    if args.n is not None and len(target) != args.n:
        raise UsageError(f"target width {len(target)} does not match --n {args.n}")
    return target


def cmd_demo(args, out: Output) -> int:
    eve = EavesdropPolicy.intercept() if args.eve == "intercept" else EavesdropPolicy()
    report = run_scenario(
        "01",
        data=["00", "01", "10", "11"],
        decoys=DecoyConfig(args.decoys),
        eve=eve,
        seed=_seed(args),
        retries=args.retries,
    )
    if out.mode == "records":
        out.raw(report.to_records())
    else:
        out.record("EK", report.ek.to_hex() if report.ek else "none", "encryption key")
        out.record("DK", report.dk.to_hex() if report.dk else "none", "decryption key")
        counts = report.transcript.kind_counts()
        out.record("TRANSCRIPT", " ".join(f"{k}={v}" for k, v in sorted(counts.items())), "transcript")
        out.record("DETECTED", str(report.detection_flag).lower(), "eavesdropper detected")
        out.record("ATTEMPTS", report.attempts, "attempts")
        out.record("RESULT", report.result_bits, "decrypted result")
    return 0 if report.result_bits == "01" else 1


def _blind_matches(g: GateKind, rng: np.random.Generator, trials: int) -> bool:
    for _ in range(trials):
        n = 3
        wires = tuple(int(w) for w in rng.permutation(n)[: g.arity])
        plain = random_state(n, rng)
        key = keygen(n, rng)
        session = BlindSession(encrypt(plain, key), key, rng)
        session.execute(GateJob(g, wires))
        got = decrypt(session.state, session.dk)
        want = apply_unitary(plain, gate_matrix(g), wires)
        if not equal_up_to_global_phase(got, want):
            return False
    return True


def cmd_gate_check(args, out: Output) -> int:
    table = gates.mutated_table() if args.mutate else gates.DECOMPOSITIONS
    selected = [GateKind.parse(args.gate)] if args.gate else list(GateKind)
    rng = np.random.default_rng(_seed(args))
    ok = True
    for g in selected:
        identity = gates.verify_decomposition(g, table)
        blind = _blind_matches(g, rng, args.trials)
        passed = identity and blind
        ok &= passed
        verdict = "PASS" if passed else "FAIL"
        out.raw(f"{verdict} {g.value} identity={'ok' if identity else 'bad'} blind={'ok' if blind else 'bad'}\n")
    return 0 if ok else 1


def cmd_grover(args, out: Output) -> int:
    target = _target(args)
    n = len(target)
    limit = BLIND_MAX_QUBITS if args.blind else MAX_QUBITS
    if n > limit:
        raise UsageError(f"{'blind' if args.blind else 'plain'} mode supports n <= {limit}")
    rng = np.random.default_rng(_seed(args))
    circuit = build_grover(target, args.iterations)
    if args.blind:
        key = keygen(n, rng)
        search = run_blind(circuit, encrypt(plus_state(n), key), key, rng)
        result = search.result
    else:
        result = run_plain(circuit, plus_state(n), rng)
    out.record("ORACLE_CALLS", result.oracle_calls)
    out.record("P_SUCCESS", f"{result.success_probability:.9f}")
    out.record("RESULT", f"bits={result.measured_bits}" if out.mode == "records" else result.measured_bits)
    if args.blind:
        out.record("DK", search.dk.to_hex())
        out.record("TRANSCRIPT_EVENTS", len(search.transcript))
    return 0


def cmd_eavesdrop(args, out: Output) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    if args.m < 0:
        raise UsageError("--m must be >= 0")
    rate = detection_rate(args.m, args.trials, _seed(args))
    out.record("M", args.m, "decoys")
    out.record("TRIALS", args.trials, "trials")
    out.record("EMPIRICAL", f"{rate:.6f}", "empirical detection rate")
    out.record("ANALYTIC", f"{analytic_detection(args.m):.6f}", "1 - (3/4)^m")
    return 0


def cmd_circuit(args, out: Output) -> int:
    target = _target(args)
    out.raw(jobs_to_text(build_grover(target, args.iterations).jobs, build_grover(target, args.iterations)))
    return 0


def cmd_transcript(args, out: Output) -> int:
    target = _target(args)
    if len(target) > BLIND_MAX_QUBITS:
        raise UsageError(f"blind mode supports n <= {BLIND_MAX_QUBITS}")
    rng = np.random.default_rng(_seed(args))
    circuit = build_grover(target, args.iterations)
    key = keygen(len(target), rng)
    search = run_blind(circuit, encrypt(plus_state(len(target)), key), key, rng)
    out.raw(search.transcript.to_text())
    return 0


def cmd_run(args, out: Output) -> int:
    try:
        with open(args.circuit) as fh:
            jobs = parse_circuit(fh.read())
    except OSError as exc:
        raise UsageError(str(exc)) from None
    except ValueError as exc:
        raise UsageError(f"{args.circuit}: {exc}") from None
    used = max((w for j in jobs for w in j.wires), default=-1) + 1
    bits = args.input if args.input is not None else "0" * max(used, 1)
    if set(bits) - {"0", "1"} or len(bits) < used:
        raise UsageError(f"input {bits!r} must be a bitstring covering {used} wires")
    if args.blind and len(bits) > BLIND_MAX_QUBITS + 3:
        raise UsageError("blind mode register too large")
    state = basis_state(len(bits), bits)
    rng = np.random.default_rng(_seed(args))
    if args.blind:
        key = keygen(len(bits), rng)
        session = BlindSession(encrypt(state, key), key, rng)
        for job in jobs:
            session.execute(job)
        final = decrypt(session.state, session.dk)
        out.record("DK", session.dk.to_hex())
        out.record("TRANSCRIPT_EVENTS", len(session.transcript))
    else:
        final = apply_jobs(state, jobs)
    probs = final.probabilities()
    width = len(bits)
    for idx in np.flatnonzero(probs > 1e-12):
        out.record("OUTCOME", f"{format(int(idx), f'0{width}b')} {probs[idx]:.9f}", "outcome")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"RNG seed (fallback: ${SEED_ENV}, then 0)")
    common.add_argument("--format", choices=["text", "records"], default="records", dest="output_mode")

    p = argparse.ArgumentParser(prog="blindgrover", description="Blind Grover search over one-time-padded qubits.")
    sub = p.add_subparsers(dest="subcommand", required=True)

    d = sub.add_parser("demo", parents=[common], help="two-qubit store-and-search scenario")
    d.add_argument("--eve", choices=["none", "intercept"], default="none")
    d.add_argument("--decoys", type=int, default=4)
    d.add_argument("--retries", type=int, default=3)
    d.set_defaults(func=cmd_demo)

    g = sub.add_parser("gate-check", parents=[common], help="verify decompositions and blind gates")
    g.add_argument("--gate", choices=[k.value for k in GateKind], type=str.upper)
    g.add_argument("--mutate", action="store_true", help="corrupt one table entry (test hook)")
    g.add_argument("--trials", type=int, default=10)
    g.set_defaults(func=cmd_gate_check)

    for name, func, text in [
        ("grover", cmd_grover, "run Grover search, plain or blind"),
        ("circuit", cmd_circuit, "print the Grover circuit file"),
        ("transcript", cmd_transcript, "print the server's view of a blind search"),
    ]:
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("--target", required=True)
        s.add_argument("--n", type=int)
        s.add_argument("--iterations", type=int)
        if name == "grover":
            s.add_argument("--blind", action="store_true")
        s.set_defaults(func=func)

    e = sub.add_parser("eavesdrop", parents=[common], help="decoy detection statistics")
    e.add_argument("--m", type=int, default=4)
    e.add_argument("--trials", type=int, default=10000)
    e.set_defaults(func=cmd_eavesdrop)

    r = sub.add_parser("run", parents=[common], help="execute a circuit file on a basis input")
    r.add_argument("circuit")
    r.add_argument("--input")
    r.add_argument("--blind", action="store_true")
    r.set_defaults(func=cmd_run)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    out = Output(args.output_mode)
    try:
        return args.func(args, out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
