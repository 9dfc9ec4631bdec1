import itertools
import math

import numpy as np
import pytest

import oracles
from blindgrover.gates import GateKind
from blindgrover.grover import (
    MAX_QUBITS,
    analytic_success,
    apply_jobs,
    build_diffusion,
    build_grover,
    build_oracle,
    grover_iterations,
    jobs_to_text,
    parse_circuit,
    run_blind,
    run_plain,
    run_plain_state,
    strip_ancillas,
    total_wires,
    work_wires,
)
from blindgrover.qotp import PauliKey, decrypt, encrypt, keygen
from blindgrover.qstate import (
    StateVector,
    basis_state,
    equal_up_to_global_phase,
    plus_state,
    random_state,
    tensor,
)

# amplitude-iteration oracle values, frozen
FROZEN_SUCCESS = {
    ("1", 1): 0.5,
    ("01", 1): 1.0,
    ("101", 2): 121 / 128,
    ("1100", 3): 0.9613189697265625,
}


def ancilla_state(n):
    m = total_wires(n) - n
    return basis_state(m, "1" + "0" * (m - 1))


def jobs_unitary(jobs, n_wires):
    u = np.eye(2**n_wires, dtype=complex)
    for j in jobs:
        u = oracles.embed(oracles.GATES[j.gate.value], j.wires, n_wires) @ u
    return u


class TestOracle:
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_sign_property(self, n):
        for target in map("".join, itertools.product("01", repeat=n)):
            jobs = build_oracle(target, n)
            anc = ancilla_state(n)
            for b in map("".join, itertools.product("01", repeat=n)):
                s = tensor(basis_state(n, b), anc)
                out = apply_jobs(s, jobs)
                sign = -1 if b == target else 1
                assert np.allclose(out.amps, sign * s.amps, atol=1e-12), (target, b)

    def test_empty_x_layer(self):
        assert all(j.gate is not GateKind.X for j in build_oracle("11", 2))

    def test_range(self):
        with pytest.raises(ValueError):
            build_oracle("0" * (MAX_QUBITS + 1), MAX_QUBITS + 1)
        with pytest.raises(ValueError):
            build_oracle("01", 3)

    def test_toffoli_ladder_uses_clean_work_wires(self):
        assert work_wires(2) == [] and work_wires(4) == [5, 6]
        used = {w for j in build_oracle("1010", 4) for w in j.wires}
        assert used <= set(range(total_wires(4)))


class TestDiffusion:
    def test_one_qubit_reflection(self):
        u = jobs_unitary(build_diffusion(1), total_wires(1))
        # restrict to the ancilla |1> block
        block = u.reshape(2, 2, 2, 2)[:, 1, :, 1]
        plus = np.array([1, 1]) / math.sqrt(2)
        assert oracles.ops_equal_up_to_phase(block, 2 * np.outer(plus, plus) - np.eye(2))

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_plus_fixed_orthogonal_negated(self, n):
        jobs = build_diffusion(n)
        anc = ancilla_state(n)
        s = tensor(plus_state(n), anc)
        out = apply_jobs(s, jobs)
        assert equal_up_to_global_phase(out, s)
        phase = np.vdot(s.amps, out.amps)
        v = np.zeros(2**n)
        v[0], v[1] = 1, -1
        orth = tensor(StateVector(v / math.sqrt(2)), anc)
        got = apply_jobs(orth, jobs)
        assert np.allclose(got.amps, -phase * orth.amps, atol=1e-12)


class TestBuild:
    def test_iterations(self):
        assert build_grover("01").iterations == 1
        assert build_grover("1").iterations == 1
        assert build_grover("101").iterations == 2
        for n in range(1, MAX_QUBITS + 1):
            assert grover_iterations(n) == max(1, math.floor(math.pi / 4 * math.sqrt(2**n)))

    def test_two_qubit_structure(self):
        c = build_grover("01")
        names = [j.gate.value for j in c.jobs]
        assert names == ["X", "H", "TOFFOLI", "H", "X", "H", "H", "X", "X", "CZ", "X", "X", "H", "H"]
        assert c.oracle_spans == ((0, 5),)
        assert c.n_wires == 3

    def test_only_allowed_gates(self):
        for target in ["1", "01", "110", "0110"]:
            assert {j.gate for j in build_grover(target).jobs} <= set(GateKind)


class TestPlain:
    @pytest.mark.parametrize("target,k", list(FROZEN_SUCCESS))
    def test_success_frozen_and_oracle(self, target, k):
        n = len(target)
        r = run_plain(build_grover(target), plus_state(n), np.random.default_rng(0))
        assert r.oracle_calls == k
        assert r.success_probability == pytest.approx(FROZEN_SUCCESS[(target, k)], abs=1e-9)
        assert r.success_probability == pytest.approx(oracles.grover_probability(n, target, k), abs=1e-9)
        assert r.success_probability == pytest.approx(analytic_success(n, k), abs=1e-9)

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_closed_form_all_targets(self, n):
        k = grover_iterations(n)
        for target in map("".join, itertools.product("01", repeat=n)):
            r = run_plain(build_grover(target), plus_state(n), np.random.default_rng(1))
            assert r.success_probability == pytest.approx(math.sin((2 * k + 1) * math.asin(2 ** (-n / 2))) ** 2, abs=1e-9)

    @pytest.mark.parametrize("target", ["01", "101", "0011"])
    def test_data_register_matches_amplitude_oracle(self, target):
        n = len(target)
        c = build_grover(target)
        final, _ = run_plain_state(c, plus_state(n))
        data = strip_ancillas(c, final)
        want = StateVector(oracles.grover_state_after(n, target, c.iterations))
        assert equal_up_to_global_phase(data, want)

    def test_width_mismatch(self):
        with pytest.raises(ValueError):
            run_plain(build_grover("01"), plus_state(3), np.random.default_rng(0))

    def test_measured_bits_for_exact_case(self):
        rng = np.random.default_rng(3)
        for target in ["00", "01", "10", "11"]:
            assert run_plain(build_grover(target), plus_state(2), rng).measured_bits == target


class TestBlind:
    def test_example_key_pattern(self):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            key = keygen(2, rng)
            s = run_blind(build_grover("01"), encrypt(plus_state(2), key), key, rng)
            (x1, z1), _ = key.pairs
            assert s.dk.pairs == ((x1, z1), (z1, 0), (0, 0))
            assert s.result.success_probability == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("target", ["10", "011"])
    def test_zero_key_matches_plain_before_decryption(self, target):
        c = build_grover(target)
        n = c.n
        s = run_blind(c, plus_state(n), PauliKey.zeros(n), np.random.default_rng(4),
                      ancilla_key=PauliKey.zeros(c.n_wires - n))
        plain, _ = run_plain_state(c, plus_state(n))
        assert equal_up_to_global_phase(s.state, plain)
        assert s.dk == PauliKey.zeros(c.n_wires)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_blind_equals_plain(self, n):
        rng = np.random.default_rng(40 + n)
        for _ in range(20):
            target = "".join(rng.choice(["0", "1"], size=n))
            c = build_grover(target)
            data = random_state(n, rng)
            key = keygen(n, rng)
            s = run_blind(c, encrypt(data, key), key, rng)
            plain, _ = run_plain_state(c, data)
            assert equal_up_to_global_phase(s.decrypted, plain)


class TestCircuitText:
    def test_round_trip(self):
        c = build_grover("110")
        text = jobs_to_text(c.jobs, c)
        assert "# oracle" in text and "# diffusion" in text
        assert parse_circuit(text) == list(c.jobs)

    def test_parse(self):
        jobs = parse_circuit("H 0\nCNOT 0 1  # entangle\n\nTOFFOLI 0 1 2\n")
        assert [j.gate for j in jobs] == [GateKind.H, GateKind.CNOT, GateKind.TOFFOLI]

    def test_parse_errors(self):
        with pytest.raises(ValueError, match="line 2"):
            parse_circuit("H 0\nSWAP 0 1\n")
        with pytest.raises(ValueError):
            parse_circuit("CNOT 0\n")
