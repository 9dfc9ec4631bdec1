"""Reference computations that share no code with the package.

Everything here is plain numpy on full 2^n matrices built index by index, so
a bug in the state-vector engine cannot hide itself.
"""

import itertools
import math

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
S = np.array([[1, 0], [0, 1j]], dtype=complex)
T = np.array([[1, 0], [0, np.exp(1j * math.pi / 4)]], dtype=complex)


def cnot():
    m = np.zeros((4, 4), dtype=complex)
    for c, t in itertools.product((0, 1), repeat=2):
        m[2 * c + (t ^ c), 2 * c + t] = 1
    return m


def cz():
    return np.diag([1, 1, 1, -1]).astype(complex)


def toffoli():
    m = np.zeros((8, 8), dtype=complex)
    for a, b, t in itertools.product((0, 1), repeat=3):
        m[4 * a + 2 * b + (t ^ (a & b)), 4 * a + 2 * b + t] = 1
    return m


GATES = {"X": X, "Z": Z, "H": H, "S": S, "T": T, "CNOT": cnot(), "CZ": cz(), "TOFFOLI": toffoli()}


def rz(theta):
    return np.diag([np.exp(-1j * theta / 2), np.exp(1j * theta / 2)])


def ry(theta):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def embed(u, wires, n):
    """Full 2^n operator of ``u`` on ``wires`` (wire 0 = most significant bit)."""
    k = len(wires)
    dim = 2**n
    out = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        bits = [(col >> (n - 1 - w)) & 1 for w in range(n)]
        sub_in = sum(bits[w] << (k - 1 - i) for i, w in enumerate(wires))
        for sub_out in range(2**k):
            amp = u[sub_out, sub_in]
            if amp == 0:
                continue
            new = list(bits)
            for i, w in enumerate(wires):
                new[w] = (sub_out >> (k - 1 - i)) & 1
            out[int("".join(map(str, new)), 2), col] += amp
    return out


def mask(x, z):
    return np.linalg.matrix_power(X, x) @ np.linalg.matrix_power(Z, z)


def mask_register(pairs):
    m = np.eye(1, dtype=complex)
    for x, z in pairs:
        m = np.kron(m, mask(x, z))
    return m


def same_up_to_phase(a, b, tol=1e-9):
    a, b = np.asarray(a).reshape(-1), np.asarray(b).reshape(-1)
    return abs(abs(np.vdot(a, b)) - 1) <= tol


def ops_equal_up_to_phase(a, b, tol=1e-9):
    idx = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    phase = a[idx] / b[idx]
    return abs(abs(phase) - 1) <= tol and np.allclose(a, phase * b, atol=tol)


def clifford_key_update(name, pairs):
    """Brute force: the unique Pauli mask P' with G P = P' G up to phase."""
    g = GATES[name]
    k = len(pairs)
    target = g @ mask_register(pairs)
    hits = []
    for bits in itertools.product((0, 1), repeat=2 * k):
        cand = [(bits[2 * i], bits[2 * i + 1]) for i in range(k)]
        if ops_equal_up_to_phase(target, mask_register(cand) @ g):
            hits.append(tuple(bits))
    assert len(hits) == 1, hits
    return hits[0]


def grover_probability(n, target, iterations):
    """Amplitude iteration on the N-dimensional search space."""
    N = 2**n
    psi = np.full(N, 1 / math.sqrt(N))
    t = int(target, 2)
    for _ in range(iterations):
        psi[t] = -psi[t]
        psi = 2 * psi.mean() - psi
    return float(psi[t] ** 2)


def grover_state_after(n, target, iterations):
    N = 2**n
    psi = np.full(N, 1 / math.sqrt(N), dtype=complex)
    t = int(target, 2)
    for _ in range(iterations):
        psi[t] = -psi[t]
        psi = 2 * psi.mean() - psi
    return psi


def t_gadget_key(a, b, c, y, d):
    """T-gate key update as printed with the gadget."""
    return a ^ c, (a & (c ^ y ^ 1)) ^ b ^ d ^ y


def decoy_detection(m):
    return 1 - (3 / 4) ** m


def binomial_3sigma(p, trials):
    return 3 * math.sqrt(p * (1 - p) / trials)
