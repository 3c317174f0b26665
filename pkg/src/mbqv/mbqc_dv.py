"""Measurement patterns on discrete-variable cluster states and their effective noise.

A pattern starts from the logical input on ``input_sites`` and ``|+>`` on every
other site, applies CZ along each edge in schedule order, then measures every
non-output site. Noise model: a two-qubit depolarizing channel after each CZ
and a single-qubit depolarizing channel right before each measurement.

Because the patterns implemented here only use Pauli measurements, any Pauli
error on the prepared cluster can be pushed to the end of the computation: a
component that anticommutes with a site's measured operator flips that
outcome, which the byproduct correction turns into a fixed logical Pauli
(the site's *frame* entry). Components on output sites act on the logical
output directly.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .pauli import (
    CliffordMap,
    PauliChannel,
    PauliString,
    average_gate_fidelity,
    conjugate,
    depolarizing_channel,
)

__all__ = [
    "MeasurementPattern",
    "ErrorLocation",
    "standard_pattern",
    "enumerate_locations",
    "propagate_error",
    "effective_channel_dv",
    "fidelity_curve",
    "NOISE_CASES",
]

Basis = Union[str, float]

GATES = ("hadamard", "cnot", "cz", "rotation", "identity")

# Noise cases for fidelity curves: which physical rates track the swept p.
NOISE_CASES = {1: (True, False), 2: (False, True), 3: (True, True)}
_CASE_NAMES = {"meas": 1, "measurement": 1, "cz": 2, "both": 3}

_BASIS_PAULI = {"X": "X", "Y": "Y", "Z": "Z"}


@dataclass(frozen=True)
class MeasurementPattern:
    """Cluster graph plus measurement bases for one logical gate.

    ``edges`` doubles as the CZ schedule. ``bases`` maps each measured site
    to ``"X"``, ``"Y"``, ``"Z"`` or an XY-plane angle (radians from the X
    axis towards Y). ``byproduct_frame[k]`` is the logical Pauli toggled by
    flipping the outcome at site k; ``byproduct_offset`` is the correction
    applied when all outcomes are +1. Logical qubit i lives on
    ``input_sites[i]`` at the start and on ``output_sites[i]`` at the end.
    """

    n_sites: int
    edges: tuple[tuple[int, int], ...]
    input_sites: tuple[int, ...]
    output_sites: tuple[int, ...]
    bases: tuple[tuple[int, Basis], ...]
    target_gate: str
    byproduct_offset: PauliString
    byproduct_frame: tuple[tuple[int, PauliString], ...] = field(default=())

    def __post_init__(self):
        seen = set()
        for a, b in self.edges:
            if a == b or not (0 <= a < self.n_sites and 0 <= b < self.n_sites):
                raise ValueError(f"invalid edge {(a, b)}")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
        measured = {s for s, _ in self.bases}
        outputs = set(self.output_sites)
        if measured & outputs:
            raise ValueError("output sites must stay unmeasured")
        if measured | outputs != set(range(self.n_sites)):
            raise ValueError("every non-output site needs a measurement basis")
        if len(self.input_sites) != len(self.output_sites):
            raise ValueError("input and output registers differ in size")
        for _, b in self.bases:
            if isinstance(b, str) and b not in _BASIS_PAULI:
                raise ValueError(f"unknown basis {b!r}")
        if not self.byproduct_frame:
            object.__setattr__(self, "byproduct_frame", tuple(sorted(_solve_frame(self).items())))

    @property
    def n_logical(self) -> int:
        return len(self.output_sites)

    @property
    def measured_sites(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.bases)

    @property
    def basis(self) -> dict[int, Basis]:
        return dict(self.bases)

    @property
    def frame(self) -> dict[int, PauliString]:
        return dict(self.byproduct_frame)

    @property
    def graph(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {s: [] for s in range(self.n_sites)}
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return adj

    @property
    def is_clifford(self) -> bool:
        return all(isinstance(b, str) for _, b in self.bases)

    def clifford_skeleton(self) -> MeasurementPattern:
        """Same graph with every XY-plane angle replaced by an X measurement."""
        bases = tuple((s, b if isinstance(b, str) else "X") for s, b in self.bases)
        return MeasurementPattern(
            self.n_sites,
            self.edges,
            self.input_sites,
            self.output_sites,
            bases,
            self.target_gate + "/skeleton",
            self.byproduct_offset,
            self.byproduct_frame,
        )

    def to_json(self) -> str:
        data = {
            "sites": list(range(self.n_sites)),
            "edges": [list(e) for e in self.edges],
            "input_sites": list(self.input_sites),
            "output_sites": list(self.output_sites),
            "bases": {str(s): (b if isinstance(b, str) else format(b, ".17g")) for s, b in self.bases},
            "byproduct_frame": {str(s): p.label for s, p in self.byproduct_frame},
            "byproduct_offset": self.byproduct_offset.label,
            "target_gate": self.target_gate,
        }
        return json.dumps(data, sort_keys=True)


@dataclass(frozen=True)
class ErrorLocation:
    kind: str
    sites: tuple[int, ...]
    order_index: int

    def __post_init__(self):
        want = {"cz_gate": 2, "measurement": 1}.get(self.kind)
        if want is None:
            raise ValueError(f"unknown location kind {self.kind!r}")
        if len(self.sites) != want:
            raise ValueError(f"{self.kind} location needs {want} sites")


def _measured_pauli(basis: Basis) -> str:
    if isinstance(basis, str):
        return _BASIS_PAULI[basis]
    return "X"  # XY-plane angle: flips come from Z exactly as for X


def _gf2_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """One solution of a x = b over GF(2); raises if inconsistent."""
    a = a.copy() % 2
    b = b.copy() % 2
    rows, cols = a.shape
    pivots = []
    r = 0
    for c in range(cols):
        hit = np.nonzero(a[r:, c])[0]
        if hit.size == 0:
            continue
        p = r + hit[0]
        a[[r, p]] = a[[p, r]]
        b[[r, p]] = b[[p, r]]
        for i in range(rows):
            if i != r and a[i, c]:
                a[i] ^= a[r]
                b[i] ^= b[r]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    if np.any(b[r:]):
        raise ValueError("pattern does not absorb this error: linear system inconsistent")
    x = np.zeros(cols, dtype=np.uint8)
    for i, c in enumerate(pivots):
        x[c] = b[i]
    return x


def _absorb(pattern: MeasurementPattern, error: PauliString) -> PauliString:
    """Logical Pauli equivalent to ``error`` on the freshly prepared cluster.

    Multiplies ``error`` by graph-state stabilizers X_v Z_N(v) (v not an input
    site) until it commutes with every measured operator; what remains on the
    outputs is the logical effect.
    """
    n = pattern.n_sites
    adj = pattern.graph
    inputs = set(pattern.input_sites)
    gens = [v for v in range(n) if v not in inputs]
    col = {v: i for i, v in enumerate(gens)}
    measured = pattern.measured_sites
    basis = pattern.basis
    a = np.zeros((len(measured), len(gens)), dtype=np.uint8)
    rhs = np.zeros(len(measured), dtype=np.uint8)
    for row, j in enumerate(measured):
        m = PauliString.from_label(_measured_pauli(basis[j]))
        mx, mz = m.x_mask, m.z_mask
        ex, ez = (error.x_mask >> j) & 1, (error.z_mask >> j) & 1
        # x-bit of the product on j: ex + t_j ; z-bit: ez + sum_{v in N(j)} t_v
        if mz and j in col:
            a[row, col[j]] ^= 1
        if mx:
            for v in adj[j]:
                if v in col:
                    a[row, col[v]] ^= 1
        rhs[row] = (mz * ex + mx * ez) % 2
    t = _gf2_solve(a, rhs)
    total = error
    for v, bit in zip(gens, t):
        if bit:
            zmask = sum(1 << w for w in adj[v])
            total = total * PauliString(n, 1 << v, zmask)
    return total.restrict(pattern.output_sites)


def _solve_frame(pattern: MeasurementPattern) -> dict[int, PauliString]:
    frame = {}
    for s, b in pattern.bases:
        flip = "Z" if _measured_pauli(b) in ("X", "Y") else "X"
        frame[s] = _absorb(pattern, PauliString.single(pattern.n_sites, s, flip))
    return frame


def _wire(bases: Sequence[Basis], target: str, offset: str) -> MeasurementPattern:
    n = len(bases) + 1
    edges = tuple((i, i + 1) for i in range(n - 1))
    return MeasurementPattern(
        n, edges, (0,), (n - 1,), tuple(enumerate(bases)), target, PauliString.from_label(offset)
    )


@functools.lru_cache(maxsize=None)
def _cnot_pattern() -> MeasurementPattern:
    # control wire 0-6, target wire 8-14, bridge 3-7-11; sweep order keeps the
    # CZ schedule local.
    edges = [
        (0, 1), (8, 9), (1, 2), (9, 10), (2, 3), (10, 11), (3, 7), (7, 11),
        (3, 4), (11, 12), (4, 5), (12, 13), (5, 6), (13, 14),
    ]  # fmt: skip
    bases = {0: "X", 1: "Y", 2: "Y", 3: "Y", 4: "Y", 5: "Y", 7: "Y",
             8: "X", 9: "X", 10: "X", 11: "Y", 12: "X", 13: "X"}  # fmt: skip
    return MeasurementPattern(
        15, tuple(edges), (0, 8), (6, 14), tuple(sorted(bases.items())), "cnot", PauliString.from_label("ZI")
    )


@functools.lru_cache(maxsize=None)
def _cz_pattern() -> MeasurementPattern:
    # two identity wires 0-1-2 and 3-4-5 joined at their inputs
    edges = ((0, 3), (0, 1), (3, 4), (1, 2), (4, 5))
    bases = ((0, "X"), (1, "X"), (3, "X"), (4, "X"))
    return MeasurementPattern(6, edges, (0, 3), (2, 5), bases, "cz", PauliString.from_label("II"))


@functools.lru_cache(maxsize=None)
def standard_pattern(gate: str, theta: float | None = None) -> MeasurementPattern:
    """Canonical measurement pattern for ``gate``.

    ``hadamard`` is a five-site wire measured X, Y, Y, Y. ``rotation`` (with
    ``theta``) is the wire X, X, theta, X, which implements
    diag(1, e^{i theta}) when all outcomes are +1. ``identity`` is the
    all-X wire. ``cnot`` uses the 15-site nearest-neighbour layout with the
    control on logical qubit 0; ``cz`` joins two identity wires by an edge
    between their inputs.
    """
    gate = gate.lower()
    if gate in ("hadamard", "h"):
        return _wire(("X", "Y", "Y", "Y"), "hadamard", "I")
    if gate == "identity":
        return _wire(("X", "X", "X", "X"), "identity", "I")
    if gate == "rotation":
        if theta is None:
            raise ValueError("rotation pattern needs an angle")
        theta = float(theta)
        if theta == 0.0:
            return _wire(("X", "X", "X", "X"), "rotation(0)", "I")
        return _wire(("X", "X", theta, "X"), f"rotation({theta!r})", "I")
    if gate == "cnot":
        return _cnot_pattern()
    if gate == "cz":
        return _cz_pattern()
    raise ValueError(f"unsupported gate {gate!r}; expected one of {GATES}")


def enumerate_locations(pattern: MeasurementPattern) -> list[ErrorLocation]:
    """All CZ locations in schedule order, then one location per measured site."""
    locs = [ErrorLocation("cz_gate", tuple(e), i) for i, e in enumerate(pattern.edges)]
    base = len(pattern.edges)
    locs += [ErrorLocation("measurement", (s,), base + k) for k, s in enumerate(pattern.measured_sites)]
    return locs


@functools.lru_cache(maxsize=256)
def _suffix_maps(pattern: MeasurementPattern) -> tuple[CliffordMap, ...]:
    """``maps[k]`` conjugates through CZs k, k+1, ... of the schedule."""
    n = pattern.n_sites
    maps = [CliffordMap.identity(n)]
    for a, b in reversed(pattern.edges):
        maps.append(CliffordMap.cz(n, a, b).then(maps[-1]))
    maps.reverse()
    return tuple(maps)


def _push_to_outputs(pattern: MeasurementPattern, final: PauliString) -> PauliString:
    basis = pattern.basis
    frame = pattern.frame
    out = final.restrict(pattern.output_sites)
    for s in pattern.measured_sites:
        comp = final.restrict((s,))
        if comp.is_identity():
            continue
        b = basis[s]
        if not isinstance(b, str) and comp.letter(0) != "Z":
            raise ValueError(
                f"{comp.letter(0)} error at XY-plane site {s} is not a Pauli flip; "
                "use the pattern's clifford_skeleton()"
            )
        if not comp.commutes(PauliString.from_label(_measured_pauli(b))):
            out = out * frame[s]
    return out


def propagate_error(pattern: MeasurementPattern, loc: ErrorLocation, error: PauliString) -> PauliString:
    """Logical Pauli caused by ``error`` occurring at ``loc``.

    ``error`` acts either on ``loc.sites`` (local labelling) or on the full
    register of ``pattern.n_sites`` qubits with support inside ``loc.sites``.
    """
    n = pattern.n_sites
    if loc.kind == "cz_gate":
        if loc.order_index >= len(pattern.edges) or set(pattern.edges[loc.order_index]) != set(loc.sites):
            raise ValueError(f"{loc} is not an edge of this pattern")
        later = loc.order_index + 1
    else:
        if loc.sites[0] not in pattern.measured_sites:
            raise ValueError(f"{loc} is not a measured site of this pattern")
        later = len(pattern.edges)
    if error.n == len(loc.sites):
        x = z = 0
        for i, s in enumerate(loc.sites):
            x |= ((error.x_mask >> i) & 1) << s
            z |= ((error.z_mask >> i) & 1) << s
        full = PauliString(n, x, z)
    elif error.n == n:
        allowed = sum(1 << s for s in loc.sites)
        if (error.x_mask | error.z_mask) & ~allowed:
            raise ValueError("error not supported on the location's sites")
        full = error
    else:
        raise ValueError(f"error acts on {error.n} qubits; location has {len(loc.sites)}")
    final = conjugate(full, _suffix_maps(pattern)[later])
    return _push_to_outputs(pattern, final)


def _check_rate(name: str, p: float):
    if not (0.0 <= p <= 1.0) or math.isnan(p):
        raise ValueError(f"{name} must lie in [0, 1], got {p}")


def location_channels(pattern: MeasurementPattern, p_cz: float, p_m: float) -> list[PauliChannel]:
    """Logical channel contributed by each error location, in location order."""
    out = []
    for loc in enumerate_locations(pattern):
        local = depolarizing_channel(2, p_cz) if loc.kind == "cz_gate" else depolarizing_channel(1, p_m)
        probs: dict[PauliString, float] = {}
        for e, w in local.probs.items():
            logical = propagate_error(pattern, loc, e)
            probs[logical] = probs.get(logical, 0.0) + w
        out.append(PauliChannel(pattern.n_logical, probs))
    return out


def effective_channel_dv(pattern: MeasurementPattern, p_cz: float, p_m: float) -> PauliChannel:
    """Effective logical Pauli channel of a noisy Clifford pattern.

    Locations are independent, so their logical channels compose.
    """
    _check_rate("p_cz", p_cz)
    _check_rate("p_m", p_m)
    if not pattern.is_clifford:
        raise ValueError(
            "DV channels are only derived for Pauli-measurement patterns; "
            "pass pattern.clifford_skeleton() for rotation wires"
        )
    chan = PauliChannel.identity(pattern.n_logical)
    for c in location_channels(pattern, p_cz, p_m):
        chan = chan.compose(c)
    return chan


def _case_number(case) -> int:
    if isinstance(case, str):
        key = case.lower()
        if key.isdigit():
            return _case_number(int(key))
        if key not in _CASE_NAMES:
            raise ValueError(f"unknown noise case {case!r}")
        return _CASE_NAMES[key]
    if case not in NOISE_CASES:
        raise ValueError(f"unknown noise case {case!r}")
    return int(case)


def fidelity_curve(gate: str, case, p_grid: Iterable[float]) -> tuple[np.ndarray, np.ndarray]:
    """Average gate fidelity of ``gate`` against a common error rate p.

    ``case`` 1 sets p_m = p (p_cz = 0), 2 sets p_cz = p (p_m = 0), 3 sets both.
    """
    use_m, use_cz = NOISE_CASES[_case_number(case)]
    pattern = standard_pattern(gate)
    ps = np.asarray(list(p_grid), dtype=float)
    fids = np.array(
        [
            average_gate_fidelity(effective_channel_dv(pattern, p if use_cz else 0.0, p if use_m else 0.0))
            for p in ps
        ]
    )
    return ps, fids


def pattern_census(pattern: MeasurementPattern) -> Mapping[str, int]:
    return {
        "sites": pattern.n_sites,
        "edges": len(pattern.edges),
        "measured": len(pattern.measured_sites),
        "locations": len(pattern.edges) + len(pattern.measured_sites),
    }
