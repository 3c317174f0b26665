"""Pauli strings, Clifford conjugation and Pauli error channels.

Every effective noise model in the package is expressed as a
:class:`PauliChannel`: a probability distribution over n-qubit Pauli
operators acting as ``rho -> sum_P p_P P rho P``.

Conventions
-----------
A Pauli string is stored as two bitmasks. Bit ``q`` of ``x_mask`` (``z_mask``)
is the X (Z) component on qubit ``q``. Labels are written with qubit 0 first,
so ``"XZ"`` is X on qubit 0 and Z on qubit 1. With phases, the string
``(x, z)`` denotes ``prod_q i^(x_q z_q) X_q^x_q Z_q^z_q``, which makes the
``x = z = 1`` factor exactly Y.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "PauliString",
    "PauliChannel",
    "CliffordMap",
    "depolarizing_channel",
    "conjugate",
    "conjugate_with_phase",
    "compose",
    "embed",
    "average_gate_fidelity",
    "process_fidelity",
    "infidelity",
]

PRUNE_TOL = 1e-300
SUM_TOL = 1e-12

_LETTERS = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_BITS = {v: k for k, v in _LETTERS.items()}


@dataclass(frozen=True, order=True)
class PauliString:
    """An n-qubit Pauli operator modulo phase."""

    n: int
    x_mask: int = 0
    z_mask: int = 0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("qubit count must be non-negative")
        limit = 1 << self.n
        if not (0 <= self.x_mask < limit and 0 <= self.z_mask < limit):
            raise ValueError(f"masks do not fit in {self.n} qubits")

    @classmethod
    def identity(cls, n: int) -> PauliString:
        return cls(n)

    @classmethod
    def from_label(cls, label: str) -> PauliString:
        x = z = 0
        for q, ch in enumerate(label.upper()):
            try:
                bx, bz = _BITS[ch]
            except KeyError:
                raise ValueError(f"invalid Pauli letter {ch!r} in {label!r}") from None
            x |= bx << q
            z |= bz << q
        return cls(len(label), x, z)

    @classmethod
    def single(cls, n: int, qubit: int, letter: str) -> PauliString:
        if not 0 <= qubit < n:
            raise ValueError(f"qubit {qubit} out of range for n={n}")
        bx, bz = _BITS[letter.upper()]
        return cls(n, bx << qubit, bz << qubit)

    def letter(self, qubit: int) -> str:
        return _LETTERS[(self.x_mask >> qubit) & 1, (self.z_mask >> qubit) & 1]

    @property
    def label(self) -> str:
        return "".join(self.letter(q) for q in range(self.n))

    @property
    def weight(self) -> int:
        return bin(self.x_mask | self.z_mask).count("1")

    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0

    def commutes(self, other: PauliString) -> bool:
        _check_n(self.n, other.n)
        overlap = (self.x_mask & other.z_mask) ^ (self.z_mask & other.x_mask)
        return bin(overlap).count("1") % 2 == 0

    def __mul__(self, other: PauliString) -> PauliString:
        _check_n(self.n, other.n)
        return PauliString(self.n, self.x_mask ^ other.x_mask, self.z_mask ^ other.z_mask)

    def restrict(self, qubits: Sequence[int]) -> PauliString:
        """The Pauli acting on ``qubits``, relabelled ``0..len(qubits)-1``."""
        x = z = 0
        for i, q in enumerate(qubits):
            x |= ((self.x_mask >> q) & 1) << i
            z |= ((self.z_mask >> q) & 1) << i
        return PauliString(len(qubits), x, z)

    def matrix(self) -> np.ndarray:
        """Dense matrix, qubit 0 as the most significant tensor factor."""
        out = np.ones((1, 1), dtype=complex)
        for q in range(self.n):
            out = np.kron(out, _PAULI_MATRICES[self.letter(q)])
        return out

    def __str__(self):
        return self.label

    def __repr__(self):
        return f"PauliString({self.label!r})"


_PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _check_n(a: int, b: int):
    if a != b:
        raise ValueError(f"qubit count mismatch: {a} vs {b}")


def _product_phase(a: PauliString, b: PauliString) -> int:
    """Exponent k (mod 4) such that a*b = i^k (a^b) with the Y-convention masks."""
    k = 0
    for q in range(a.n):
        x1, z1 = (a.x_mask >> q) & 1, (a.z_mask >> q) & 1
        x2, z2 = (b.x_mask >> q) & 1, (b.z_mask >> q) & 1
        if x1 and z1:
            k += z2 - x2
        elif x1:
            k += z2 * (2 * x2 - 1)
        elif z1:
            k += x2 * (1 - 2 * z2)
    return k % 4


def all_paulis(n: int) -> list[PauliString]:
    """All 4^n Pauli strings on n qubits, in label order."""
    return [PauliString.from_label("".join(t)) for t in itertools.product("IXYZ", repeat=n)]


class CliffordMap:
    """Action of a Clifford unitary C by conjugation, P -> C P C^dagger.

    Stored as the images of the generators X_q and Z_q, each a Pauli string
    together with a sign bit (True means a factor of -1).
    """

    def __init__(self, n: int, x_images, z_images):
        self.n = n
        self.x_images = tuple(x_images)
        self.z_images = tuple(z_images)
        if len(self.x_images) != n or len(self.z_images) != n:
            raise ValueError("need one image per generator")
        self._check_symplectic()

    def _check_symplectic(self):
        imgs = [p for p, _ in self.x_images] + [p for p, _ in self.z_images]
        n = self.n
        for i in range(2 * n):
            for j in range(i + 1, 2 * n):
                should_anticommute = j == i + n
                if imgs[i].commutes(imgs[j]) == should_anticommute:
                    raise ValueError("generator images violate the commutation relations")

    @classmethod
    def identity(cls, n: int) -> CliffordMap:
        xs = [(PauliString.single(n, q, "X"), False) for q in range(n)]
        zs = [(PauliString.single(n, q, "Z"), False) for q in range(n)]
        return cls(n, xs, zs)

    @classmethod
    def hadamard(cls, n: int, q: int) -> CliffordMap:
        c = cls.identity(n)
        xs, zs = list(c.x_images), list(c.z_images)
        xs[q], zs[q] = zs[q], xs[q]
        return cls(n, xs, zs)

    @classmethod
    def phase(cls, n: int, q: int) -> CliffordMap:
        c = cls.identity(n)
        xs = list(c.x_images)
        xs[q] = (PauliString.single(n, q, "Y"), False)
        return cls(n, xs, c.z_images)

    @classmethod
    def cz(cls, n: int, a: int, b: int) -> CliffordMap:
        if a == b:
            raise ValueError("CZ needs two distinct qubits")
        c = cls.identity(n)
        xs = list(c.x_images)
        xs[a] = (PauliString(n, 1 << a, 1 << b), False)
        xs[b] = (PauliString(n, 1 << b, 1 << a), False)
        return cls(n, xs, c.z_images)

    @classmethod
    def cnot(cls, n: int, control: int, target: int) -> CliffordMap:
        if control == target:
            raise ValueError("CNOT needs two distinct qubits")
        c = cls.identity(n)
        xs, zs = list(c.x_images), list(c.z_images)
        xs[control] = (PauliString(n, (1 << control) | (1 << target), 0), False)
        zs[target] = (PauliString(n, 0, (1 << control) | (1 << target)), False)
        return cls(n, xs, zs)

    def then(self, other: CliffordMap) -> CliffordMap:
        """The map of applying ``self`` first and ``other`` second."""
        _check_n(self.n, other.n)
        xs = [_signed_conjugate(p, s, other) for p, s in self.x_images]
        zs = [_signed_conjugate(p, s, other) for p, s in self.z_images]
        return CliffordMap(self.n, xs, zs)

    def __eq__(self, other):
        return (
            isinstance(other, CliffordMap)
            and self.x_images == other.x_images
            and self.z_images == other.z_images
        )

    def __hash__(self):
        return hash((self.x_images, self.z_images))


def _signed_conjugate(p: PauliString, sign: bool, c: CliffordMap):
    q, s = conjugate_with_phase(p, c)
    return q, s != sign


def conjugate_with_phase(p: PauliString, c: CliffordMap) -> tuple[PauliString, bool]:
    """Return ``(q, negative)`` with ``C p C^dagger = (-1)^negative q``."""
    _check_n(p.n, c.n)
    acc = PauliString(p.n)
    k = 0
    for q in range(p.n):
        bx, bz = (p.x_mask >> q) & 1, (p.z_mask >> q) & 1
        if bx and bz:
            k += 1
        for bit, (img, neg) in ((bx, c.x_images[q]), (bz, c.z_images[q])):
            if bit:
                k += _product_phase(acc, img) + 2 * neg
                acc = acc * img
    k %= 4
    if k % 2:
        raise AssertionError("conjugate of a Hermitian Pauli is not Hermitian")
    return acc, k == 2


def conjugate(p: PauliString, c: CliffordMap) -> PauliString:
    """``C p C^dagger`` with the sign discarded."""
    return conjugate_with_phase(p, c)[0]


class PauliChannel:
    """Probability distribution over n-qubit Pauli operators.

    Parameters
    ----------
    n : int
        Number of qubits.
    probs : mapping
        Pauli string (or label) to probability. Entries at or below
        ``PRUNE_TOL`` are dropped; the remaining mass must sum to one.
    """

    __slots__ = ("n", "_probs", "_hash")

    def __init__(self, n: int, probs: Mapping):
        clean = {}
        for key, value in probs.items():
            p = key if isinstance(key, PauliString) else PauliString.from_label(key)
            if p.n != n:
                raise ValueError(f"Pauli {p.label} does not act on {n} qubits")
            value = float(value)
            if value < -SUM_TOL or not math.isfinite(value):
                raise ValueError(f"invalid probability {value} for {p.label}")
            if value > PRUNE_TOL:
                clean[p] = clean.get(p, 0.0) + value
        total = math.fsum(clean.values())
        if abs(total - 1.0) > SUM_TOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        self.n = n
        self._probs = MappingProxyType(dict(sorted(clean.items(), key=lambda kv: kv[0].label)))
        self._hash = None

    @classmethod
    def identity(cls, n: int) -> PauliChannel:
        return cls(n, {PauliString(n): 1.0})

    @classmethod
    def _normalized(cls, n: int, probs: Mapping[PauliString, float]) -> PauliChannel:
        kept = {k: v for k, v in probs.items() if v > PRUNE_TOL}
        total = math.fsum(kept.values())
        return cls(n, {k: v / total for k, v in kept.items()})

    @property
    def probs(self) -> Mapping[PauliString, float]:
        return self._probs

    def __getitem__(self, key) -> float:
        p = key if isinstance(key, PauliString) else PauliString.from_label(key)
        return self._probs.get(p, 0.0)

    def __iter__(self):
        return iter(self._probs.items())

    def __len__(self):
        return len(self._probs)

    def __eq__(self, other):
        return isinstance(other, PauliChannel) and self.n == other.n and dict(self._probs) == dict(other._probs)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.n, tuple(self._probs.items())))
        return self._hash

    def __repr__(self):
        body = ", ".join(f"{p.label}: {v:.6g}" for p, v in self._probs.items())
        return f"PauliChannel(n={self.n}, {{{body}}})"

    @property
    def identity_prob(self) -> float:
        return self._probs.get(PauliString(self.n), 0.0)

    @property
    def error_mass(self) -> float:
        """Total probability of non-identity Paulis, summed directly (no 1 - p_I cancellation)."""
        return math.fsum(v for p, v in self._probs.items() if not p.is_identity())

    def labels(self) -> dict[str, float]:
        return {p.label: v for p, v in self._probs.items()}

    def compose(self, other: PauliChannel) -> PauliChannel:
        return compose(self, other)

    def conjugated(self, c: CliffordMap) -> PauliChannel:
        """Channel C E C^dagger: each term P becomes C P C^dagger."""
        out: dict[PauliString, float] = {}
        for p, v in self._probs.items():
            q = conjugate(p, c)
            out[q] = out.get(q, 0.0) + v
        return PauliChannel(self.n, out)

    def ptm_diagonal(self) -> np.ndarray:
        """Eigenvalues lambda_Q = sum_P p_P (-1)^<P,Q> of the Pauli transfer matrix, label order."""
        qs = all_paulis(self.n)
        return np.array([sum(v if p.commutes(q) else -v for p, v in self._probs.items()) for q in qs])

    def to_json(self) -> str:
        terms = ", ".join(
            f'{{"pauli": "{p.label}", "prob": {format(v, ".17g")}}}' for p, v in self._probs.items()
        )
        return f'{{"n": {self.n}, "terms": [{terms}]}}'

    @classmethod
    def from_json(cls, text: str) -> PauliChannel:
        data = json.loads(text)
        return cls(int(data["n"]), {t["pauli"]: t["prob"] for t in data["terms"]})


def depolarizing_channel(n: int, p: float) -> PauliChannel:
    """Identity with weight 1-p, each non-identity Pauli with weight p/(4^n - 1)."""
    if n not in (1, 2):
        raise ValueError("depolarizing channel defined for 1 or 2 qubits")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"error rate must lie in [0, 1], got {p}")
    k = 4**n - 1
    probs = {q: p / k for q in all_paulis(n) if not q.is_identity()}
    probs[PauliString(n)] = 1.0 - p
    return PauliChannel(n, probs)


def flip_channel(pauli: PauliString, q: float) -> PauliChannel:
    """Apply ``pauli`` with probability q, otherwise nothing."""
    if pauli.is_identity():
        return PauliChannel.identity(pauli.n)
    return PauliChannel(pauli.n, {PauliString(pauli.n): 1.0 - q, pauli: q})


def compose(a: PauliChannel, b: PauliChannel) -> PauliChannel:
    """Channel of two independent Pauli errors: probs convolve over the group product."""
    _check_n(a.n, b.n)
    out: dict[PauliString, float] = {}
    for p, u in a.probs.items():
        for q, v in b.probs.items():
            r = p * q
            out[r] = out.get(r, 0.0) + u * v
    return PauliChannel._normalized(a.n, out)


def compose_all(channels: Iterable[PauliChannel], n: int) -> PauliChannel:
    out = PauliChannel.identity(n)
    for c in channels:
        out = compose(out, c)
    return out


def embed(c: PauliChannel, sites: Sequence[int], n_total: int) -> PauliChannel:
    """Place ``c`` on ``sites`` of an ``n_total``-qubit register, identity elsewhere."""
    sites = list(sites)
    if len(sites) != c.n:
        raise ValueError(f"channel acts on {c.n} qubits, got {len(sites)} sites")
    if len(set(sites)) != len(sites):
        raise ValueError(f"repeated site in {sites}")
    if any(not 0 <= s < n_total for s in sites):
        raise ValueError(f"site out of range for {n_total} qubits: {sites}")
    out = {}
    for p, v in c.probs.items():
        x = z = 0
        for i, s in enumerate(sites):
            x |= ((p.x_mask >> i) & 1) << s
            z |= ((p.z_mask >> i) & 1) << s
        out[PauliString(n_total, x, z)] = v
    return PauliChannel(n_total, out)


def process_fidelity(c: PauliChannel) -> float:
    """Entanglement fidelity with the identity; for a Pauli channel this is p_I."""
    return c.identity_prob


def average_gate_fidelity(c: PauliChannel) -> float:
    d = 2**c.n
    return (d * c.identity_prob + 1.0) / (d + 1.0)


def infidelity(c: PauliChannel) -> float:
    """``1 - average_gate_fidelity`` computed from the error mass, accurate for tiny errors."""
    d = 2**c.n
    return d * c.error_mass / (d + 1.0)
