"""Small-register simulation of logical circuits with Pauli noise.

Qubit 0 is the most significant bit of a basis index, so the probability
vector of an n-qubit register is indexed by the integer whose binary digits
read ``s_0 s_1 ... s_{n-1}``. A two-qubit gate on ``(a, b)`` uses the matrix
index ``2 * bit_a + bit_b``.

Circuits are executed block by block: consecutive operations that fit on the
same pair of qubits are fused, so an SU(4) block together with the Pauli
channels interleaved inside it costs a single 16x16 superoperator in exact
mode, and a single 4x4 matrix per distinct error pattern in trajectory mode.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm

from .pauli import PauliChannel

__all__ = [
    "StateVector",
    "Gate",
    "Noise",
    "LogicalCircuit",
    "KakDecomposition",
    "haar_unitary",
    "haar_su4",
    "kak_decompose",
    "weyl_coordinates",
    "euler_zxz",
    "apply",
    "outcome_distribution",
    "ideal_distribution",
    "distribution_csv",
    "task_rng",
    "rz",
    "rx",
    "HADAMARD",
    "CNOT",
    "CZ",
    "MAX_EXACT_QUBITS",
]

MAX_EXACT_QUBITS = 12
UNITARY_TOL = 1e-10
NORM_TOL = 1e-10

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
CZ = np.diag([1, 1, 1, -1]).astype(complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.diag([1.0, -1.0]).astype(complex)
_I2 = np.eye(2, dtype=complex)


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def rx(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def task_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for task ``key`` under master ``seed``.

    Streams depend only on (seed, key), never on scheduling, so results are
    identical for any number of workers.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def _is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return float(np.abs(u.conj().T @ u - np.eye(len(u))).max()) <= tol


# ---------------------------------------------------------------- data types


@dataclass
class StateVector:
    n: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.amplitudes.size != 2**self.n:
            raise ValueError(f"need 2^{self.n} amplitudes")
        if abs(np.linalg.norm(self.amplitudes) - 1.0) > NORM_TOL:
            raise ValueError("state is not normalised")

    @classmethod
    def zero(cls, n: int) -> StateVector:
        amps = np.zeros(2**n, dtype=complex)
        amps[0] = 1.0
        return cls(n, amps)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class Gate:
    matrix: np.ndarray = field(repr=False)
    qubits: tuple[int, ...]
    name: str = "u"


@dataclass(frozen=True)
class Noise:
    channel: PauliChannel
    qubits: tuple[int, ...]
    name: str = "noise"


class LogicalCircuit:
    """Ordered unitaries and Pauli channels on an n-qubit register."""

    def __init__(self, n: int, ops: Iterable = ()):
        self.n = n
        self.ops: list = []
        for op in ops:
            self.append(op)

    def append(self, op):
        qs = tuple(op.qubits)
        if len(set(qs)) != len(qs) or any(not 0 <= q < self.n for q in qs):
            raise ValueError(f"invalid qubits {qs} for a {self.n}-qubit circuit")
        if isinstance(op, Gate):
            if op.matrix.shape != (2 ** len(qs),) * 2 or not _is_unitary(op.matrix):
                raise ValueError(f"gate {op.name} is not a unitary on {len(qs)} qubits")
        elif isinstance(op, Noise):
            if op.channel.n != len(qs):
                raise ValueError("channel size does not match its qubits")
        else:
            raise TypeError(f"unsupported operation {op!r}")
        self.ops.append(op)

    def unitary(self, q: int, matrix: np.ndarray, name: str = "u"):
        self.append(Gate(np.asarray(matrix, dtype=complex), (q,), name))

    def two_qubit(self, pair: Sequence[int], matrix: np.ndarray, name: str = "u2"):
        self.append(Gate(np.asarray(matrix, dtype=complex), tuple(pair), name))

    def channel(self, channel: PauliChannel, qubits: Sequence[int], name: str = "noise"):
        self.append(Noise(channel, tuple(qubits), name))

    def census(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for op in self.ops:
            key = op.name if isinstance(op, Gate) else "channel"
            out[key] = out.get(key, 0) + 1
        return out

    def ideal(self) -> LogicalCircuit:
        return LogicalCircuit(self.n, [op for op in self.ops if isinstance(op, Gate)])

    def to_unitary(self) -> np.ndarray:
        """Dense unitary of the gates (channels ignored); small n only."""
        if self.n > 10:
            raise ValueError("dense unitary only for n <= 10")
        dim = 2**self.n
        cols = np.eye(dim, dtype=complex).reshape((dim,) + (2,) * self.n)
        for op in self.ops:
            if isinstance(op, Gate):
                cols = _apply_matrix(cols, op.matrix, op.qubits, offset=1)
        return cols.reshape(dim, dim).T


def _apply_matrix(states: np.ndarray, m: np.ndarray, qubits: Sequence[int], offset: int) -> np.ndarray:
    """Apply ``m`` to ``qubits`` of a batch of states shaped (batch..., 2, ..., 2)."""
    k = len(qubits)
    axes = [offset + q for q in qubits]
    front = list(range(offset, offset + k))
    moved = np.moveaxis(states, axes, front)
    shape = moved.shape
    lead = int(np.prod(shape[:offset], dtype=int))
    flat = moved.reshape(lead, 2**k, -1)
    out = np.matmul(m, flat).reshape(shape)
    return np.moveaxis(out, front, axes)


# ---------------------------------------------------------------- sampling


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random U(dim): QR of a complex Ginibre matrix with the phase fix on R."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def haar_su4(rng: np.random.Generator) -> np.ndarray:
    u = haar_unitary(4, rng)
    return u / np.linalg.det(u) ** 0.25


# ---------------------------------------------------------------- decompositions

_MAGIC = np.array([[1, 0, 0, 1j], [0, 1j, 1, 0], [0, 1j, -1, 0], [1, 0, 0, -1j]], dtype=complex) / math.sqrt(2.0)
_XX, _YY, _ZZ = np.kron(_X, _X), np.kron(_Y, _Y), np.kron(_Z, _Z)
# eigenvalues of XX, YY, ZZ on the magic basis vectors, plus a global-phase column
_MAGIC_SIGNS = np.array(
    [np.real(np.diag(_MAGIC.conj().T @ p @ _MAGIC)) for p in (_XX, _YY, _ZZ)] + [np.ones(4)]
).T


def _kron_factor(k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a 4x4 product A (x) C into 2x2 unitaries (A carries det 1)."""
    t = k.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    u, s, vh = np.linalg.svd(t)
    a = u[:, 0].reshape(2, 2) * math.sqrt(s[0])
    c = vh[0].reshape(2, 2) * math.sqrt(s[0])
    f = np.sqrt(np.linalg.det(a))
    return a / f, c * f


def _interaction(a: float, b: float, c: float) -> np.ndarray:
    return expm(1j * (a * _XX + b * _YY + c * _ZZ))


def _canonical(abc: Sequence[float]) -> tuple[float, float, float]:
    q = math.pi / 4
    v = [((x + q) % (2 * q)) - q for x in abc]
    v.sort(key=abs, reverse=True)
    a, b, c = v
    if a < 0:
        a, c = -a, -c
    if b < 0:
        b, c = -b, -c
    if abs(a - q) < 1e-12 and c < 0:
        c = -c
    return float(a), float(b), float(c)


@dataclass(frozen=True)
class KakDecomposition:
    """U = phase * L3 . CNOT . L2 . CNOT . L1 . CNOT . L0 (time order L0 first).

    ``layers[i]`` is the pair of single-qubit unitaries (qubit 0, qubit 1)
    of local layer i, ``cnots[i]`` the (control, target) of CNOT i.
    ``before`` and ``after`` are the outer local factors of the Cartan form
    ``after . exp(i(a XX + b YY + c ZZ)) . before``; ``interaction`` holds
    (a, b, c) reduced to the Weyl chamber.
    """

    layers: tuple[tuple[np.ndarray, np.ndarray], ...]
    cnots: tuple[tuple[int, int], ...]
    phase: complex
    interaction: tuple[float, float, float]
    raw_interaction: tuple[float, float, float]
    before: tuple[np.ndarray, np.ndarray]
    after: tuple[np.ndarray, np.ndarray]

    def reconstruct(self) -> np.ndarray:
        out = np.eye(4, dtype=complex)
        for i, (u0, u1) in enumerate(self.layers):
            out = np.kron(u0, u1) @ out
            if i < len(self.cnots):
                out = _cnot_matrix(*self.cnots[i]) @ out
        return self.phase * out


def _cnot_matrix(control: int, target: int) -> np.ndarray:
    if (control, target) == (0, 1):
        return CNOT
    swap = np.eye(4)[[0, 2, 1, 3]]
    return swap @ CNOT @ swap


def kak_decompose(u: np.ndarray) -> KakDecomposition:
    """Cartan decomposition of a two-qubit unitary into 3 CNOTs and local gates."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (4, 4) or not _is_unitary(u, 1e-9):
        raise ValueError("kak_decompose needs a 4x4 unitary")
    det_root = np.linalg.det(u) ** 0.25
    ub = _MAGIC.conj().T @ (u / det_root) @ _MAGIC
    m = ub.T @ ub
    for r in (0.0, 1.0, 0.7071, 1.4142, 0.3183, 2.7183, 0.5772):
        _, v = np.linalg.eigh(m.real + r * m.imag)
        d2 = v.T @ m @ v
        if np.allclose(d2, np.diag(np.diagonal(d2)), atol=1e-10):
            break
    else:
        raise ArithmeticError("failed to diagonalise the symmetric unitary")
    if np.linalg.det(v) < 0:
        v[:, 0] = -v[:, 0]
    lam = np.angle(np.diagonal(d2)) / 2
    o1 = ub @ v @ np.diag(np.exp(-1j * lam))
    o1 = o1.real
    if np.linalg.det(o1) < 0:
        o1[:, 0] = -o1[:, 0]
        lam[0] += math.pi
    a, b, c, g = np.linalg.solve(_MAGIC_SIGNS, lam)
    k1 = _MAGIC @ o1 @ _MAGIC.conj().T
    k2 = _MAGIC @ v.T @ _MAGIC.conj().T
    a1, a2 = _kron_factor(k1)
    b1, b2 = _kron_factor(k2)
    t1, t2, t3 = math.pi / 2 - 2 * c, 2 * a - math.pi / 2, math.pi / 2 - 2 * b
    layers = (
        (b1, rz(-math.pi / 2) @ b2),
        (rz(t1), ry(t2)),
        (_I2, ry(t3)),
        (a1 @ rz(math.pi / 2), a2),
    )
    cnots = ((1, 0), (0, 1), (1, 0))
    draft = KakDecomposition(layers, cnots, 1.0, (0, 0, 0), (0, 0, 0), (b1, b2), (a1, a2))
    rec = draft.reconstruct()
    phase = np.vdot(rec.reshape(-1), u.reshape(-1)) / 4
    phase /= abs(phase)
    return KakDecomposition(
        layers, cnots, complex(phase), _canonical((a, b, c)), (float(a), float(b), float(c)), (b1, b2), (a1, a2)
    )


def weyl_coordinates(u: np.ndarray) -> tuple[float, float, float]:
    return kak_decompose(u).interaction


def euler_zxz(u: np.ndarray) -> tuple[float, float, float]:
    """Angles (alpha, beta, gamma) with u = phase * Rz(alpha) Rx(beta) Rz(gamma)."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2) or not _is_unitary(u):
        raise ValueError("euler_zxz needs a 2x2 unitary")
    su = u / np.sqrt(np.linalg.det(u))
    a, b = su[0, 0], su[1, 0]
    beta = 2 * math.atan2(abs(b), abs(a))
    plus = -2 * np.angle(a) if abs(a) > 1e-12 else 0.0
    minus = 2 * np.angle(b) + math.pi if abs(b) > 1e-12 else 0.0
    alpha = (plus + minus) / 2
    gamma = (plus - minus) / 2
    if abs(b) <= 1e-12:
        alpha, gamma = plus, 0.0
    return float(alpha), float(beta), float(gamma)


# ---------------------------------------------------------------- execution


def _kron_conj(u: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> u rho u^dag on row-major vec(rho)."""
    d = u.shape[0]
    return (u[:, None, :, None] * u.conj()[None, :, None, :]).reshape(d * d, d * d)


@functools.lru_cache(maxsize=256)
def _channel_data(channel: PauliChannel, local: tuple[int, ...], k: int):
    """Lifted Pauli matrices, probabilities and superoperator of a placed channel."""
    terms = list(channel.probs.items())
    probs = np.array([v for _, v in terms])
    mats = np.stack([_lift(p.matrix(), local, k) for p, _ in terms])
    sup = np.einsum("t,tac,tbd->abcd", probs, mats, mats.conj()).reshape(4**k, 4**k)
    return probs, np.cumsum(probs), mats, sup


class _Block:
    """Consecutive ops on at most two qubits, in local labelling."""

    def __init__(self, qubits: tuple[int, ...]):
        self.qubits = qubits
        self.ops: list = []

    def add(self, op):
        self.ops.append(op)

    def finalize(self):
        k = len(self.qubits)
        dim = 2**k
        pos = {q: i for i, q in enumerate(self.qubits)}
        ideal = np.eye(dim, dtype=complex)
        segment = np.eye(dim, dtype=complex)
        self.segments = []  # unitary run preceding each channel
        self.channels = []
        self.moved = []
        for op in self.ops:
            local = tuple(pos[q] for q in op.qubits)
            if isinstance(op, Gate):
                m = _lift(op.matrix, local, k)
                ideal = m @ ideal
                segment = m @ segment
            else:
                data = _channel_data(op.channel, local, k)
                self.channels.append(data)
                self.segments.append(segment)
                segment = np.eye(dim, dtype=complex)
                # an error after prefix W equals W^dag P W at the block start
                self.moved.append(np.matmul(ideal.conj().T, np.matmul(data[2], ideal)))
        self.tail = segment
        self.ideal = ideal
        self.identity_index = np.array(
            [0 if not op.channel.probs or next(iter(op.channel.probs)).is_identity() else -1
             for op in self.ops if isinstance(op, Noise)], dtype=np.int64)  # fmt: skip

    def superop(self) -> np.ndarray:
        dim = 2 ** len(self.qubits)
        s = np.eye(dim * dim, dtype=complex)
        for seg, data in zip(self.segments, self.channels):
            s = data[3] @ (_kron_conj(seg) @ s)
        return _kron_conj(self.tail) @ s

    def sample(self, rng: np.random.Generator, batch: int) -> np.ndarray:
        """Index of the sampled Pauli for each (trajectory, channel)."""
        out = np.empty((batch, len(self.channels)), dtype=np.int64)
        for j, ch in enumerate(self.channels):
            cum = ch[1]
            out[:, j] = np.minimum(np.searchsorted(cum, rng.random(batch) * cum[-1], side="right"), len(cum) - 1)
        return out

    def error_matrices(self, choice: np.ndarray) -> np.ndarray:
        """Per-trajectory error factors E with block matrix = ideal . E.

        An error P after gate prefix W is moved to the start of the block
        as W^dag P W, so E = prod_j W_j^dag P_j W_j.
        """
        dim = 2 ** len(self.qubits)
        m = np.broadcast_to(np.eye(dim, dtype=complex), (choice.shape[0], dim, dim)).copy()
        for j, stack in enumerate(self.moved):
            rows = np.nonzero(choice[:, j] != self.identity_index[j])[0]
            if rows.size:
                m[rows] = np.matmul(stack[choice[rows, j]], m[rows])
        return m


def _lift(m: np.ndarray, local: Sequence[int], k: int) -> np.ndarray:
    """Embed ``m`` acting on ``local`` positions into a k-qubit matrix."""
    if list(local) == list(range(k)):
        return np.asarray(m, dtype=complex)
    if k == 2 and len(local) == 1:
        out = np.zeros((4, 4), dtype=complex)
        if local[0] == 0:
            out[0::2, 0::2] = m
            out[1::2, 1::2] = m
        else:
            out[:2, :2] = m
            out[2:, 2:] = m
        return out
    if k == 2 and list(local) == [1, 0]:
        swap = np.eye(4)[[0, 2, 1, 3]]
        return swap @ m @ swap
    raise ValueError(f"cannot lift onto {local} of {k}")


def _fuse(circuit: LogicalCircuit) -> list[_Block]:
    blocks: list[_Block] = []
    cur: _Block | None = None
    support: list[int] = []
    for op in circuit.ops:
        qs = list(op.qubits)
        merged = support + [q for q in qs if q not in support]
        if cur is not None and len(merged) <= 2:
            support = merged
            cur.add(op)
            continue
        if cur is not None:
            cur.qubits = tuple(support)
            blocks.append(cur)
        support = list(qs)
        cur = _Block(tuple(qs))
        cur.add(op)
    if cur is not None:
        cur.qubits = tuple(support)
        blocks.append(cur)
    for b in blocks:
        b.finalize()
    return blocks


def _trajectory_batch(blocks: list[_Block], n: int, psi0: np.ndarray, rng: np.random.Generator, batch: int):
    states = np.broadcast_to(psi0.reshape((1,) + (2,) * n), (batch,) + (2,) * n).copy()
    for blk in blocks:
        if blk.channels:
            choice = blk.sample(rng, batch)
            rows = np.nonzero(np.any(choice != blk.identity_index, axis=1))[0]
            if rows.size:
                states[rows] = _apply_batched(states[rows], blk.error_matrices(choice[rows]), blk.qubits)
        states = _apply_matrix(states, blk.ideal, blk.qubits, offset=1)
    return states


def _apply_batched(states: np.ndarray, ms: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    """Apply a different matrix to each state of the batch."""
    k = len(qubits)
    axes = [1 + q for q in qubits]
    front = list(range(1, 1 + k))
    moved = np.moveaxis(states, axes, front)
    shape = moved.shape
    out = np.matmul(ms, moved.reshape(shape[0], 2**k, -1)).reshape(shape)
    return np.moveaxis(out, front, axes)


def apply(state: StateVector, circuit: LogicalCircuit, rng: np.random.Generator | None = None, mode: str = "trajectory"):
    """Run ``circuit`` on ``state``.

    ``trajectory`` draws one Pauli from every channel and returns the
    resulting :class:`StateVector`. ``exact`` evolves the density matrix and
    returns the outcome probability vector.
    """
    if state.n != circuit.n:
        raise ValueError("state and circuit sizes differ")
    if mode == "trajectory":
        rng = rng if rng is not None else np.random.default_rng()
        out = _trajectory_batch(_fuse(circuit), circuit.n, state.amplitudes, rng, 1)[0].reshape(-1)
        return StateVector(circuit.n, out)
    if mode == "exact":
        return _exact_probs(circuit, state.amplitudes)
    raise ValueError(f"unknown mode {mode!r}")


def _exact_probs(circuit: LogicalCircuit, psi0: np.ndarray) -> np.ndarray:
    n = circuit.n
    if n > MAX_EXACT_QUBITS:
        raise ValueError(f"exact mode limited to n <= {MAX_EXACT_QUBITS} qubits, got {n}")
    rho = np.outer(psi0, psi0.conj()).reshape((2,) * (2 * n))
    for blk in _fuse(circuit):
        s = blk.superop()
        k = len(blk.qubits)
        axes = list(blk.qubits) + [n + q for q in blk.qubits]
        moved = np.moveaxis(rho, axes, list(range(2 * k)))
        shape = moved.shape
        moved = (s @ moved.reshape(4**k, -1)).reshape(shape)
        rho = np.moveaxis(moved, list(range(2 * k)), axes)
    probs = np.real(np.diagonal(rho.reshape(2**n, 2**n))).copy()
    probs[probs < 0] = 0.0
    return probs


def ideal_distribution(circuit: LogicalCircuit) -> np.ndarray:
    n = circuit.n
    psi = StateVector.zero(n).amplitudes.reshape((1,) + (2,) * n)
    for blk in _fuse(circuit.ideal()):
        psi = _apply_matrix(psi, blk.ideal, blk.qubits, offset=1)
    return np.abs(psi.reshape(-1)) ** 2


def outcome_distribution(
    circuit: LogicalCircuit,
    mode: str = "exact",
    shots: int = 1000,
    seed: int = 0,
    key: Sequence[int] = (),
    chunk: int = 256,
) -> np.ndarray:
    """Outcome distribution of ``circuit`` on |0...0>.

    In trajectory mode the returned distribution is the mean of |psi|^2 over
    ``shots`` trajectories. Trajectories are drawn in chunks of ``chunk``;
    chunk c uses the stream ``task_rng(seed, *key, c)``.
    """
    n = circuit.n
    psi0 = StateVector.zero(n).amplitudes
    if mode == "exact":
        return _exact_probs(circuit, psi0)
    if mode != "trajectory":
        raise ValueError(f"unknown mode {mode!r}")
    blocks = _fuse(circuit)
    acc = np.zeros(2**n)
    done = 0
    c = 0
    while done < shots:
        b = min(chunk, shots - done)
        states = _trajectory_batch(blocks, n, psi0, task_rng(seed, *key, c), b)
        acc += (np.abs(states.reshape(b, -1)) ** 2).sum(axis=0)
        done += b
        c += 1
    return acc / shots


def distribution_csv(probs: np.ndarray) -> str:
    """CSV text ``bitstring,probability`` for a probability vector, one row per outcome."""
    probs = np.asarray(probs, dtype=float)
    n = int(probs.size).bit_length() - 1
    if probs.ndim != 1 or n < 1 or 1 << n != probs.size:
        raise ValueError("probability vector length must be a power of two >= 2")
    rows = ["bitstring,probability"] + [f"{i:0{n}b},{format(float(p), '.17g')}" for i, p in enumerate(probs)]
    return "\n".join(rows) + "\n"
