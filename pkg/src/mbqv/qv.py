"""Quantum volume on the noisy measurement-based gate set.

A width-d model circuit has d layers; each layer permutes the qubit labels
uniformly at random and applies independent Haar SU(4) blocks to the pairs
(perm[0], perm[1]), (perm[2], perm[3]), ... . Blocks are compiled onto
CNOT, H and Rz primitives, each followed by the effective Pauli channel of
its measurement pattern, and the heavy-output probability of the noisy
circuit decides whether width d passes.

Randomness follows a counter-based scheme: instance i at width d draws its
circuit from ``task_rng(seed, d, i, 0)`` and trajectory chunk c from
``task_rng(seed, d, i, 1, c)``, so results never depend on how instances
are scheduled.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from .gkp import GkpNoiseParams, effective_channel_gkp, rotation_channel
from .mbqc_dv import effective_channel_dv, standard_pattern
from .pauli import PauliChannel, depolarizing_channel
from .sim import (
    CNOT,
    HADAMARD,
    LogicalCircuit,
    euler_zxz,
    haar_su4,
    ideal_distribution,
    kak_decompose,
    outcome_distribution,
    rz,
    task_rng,
)

__all__ = [
    "DvNoise",
    "GateNoise",
    "ModelCircuit",
    "QvRunResult",
    "generate_model_circuit",
    "heavy_set",
    "heavy_output_probability",
    "gate_set_channels",
    "compile_noisy",
    "instance_heavy_output",
    "run_qv",
    "quantum_volume",
    "qv_sweep",
    "SWEEP_HEADER",
    "THRESHOLD",
    "DEFAULT_INSTANCES",
    "DEFAULT_EXACT_MAX",
]

THRESHOLD = 2.0 / 3.0
DEFAULT_INSTANCES = 1600
DEFAULT_EXACT_MAX = 8
DEFAULT_SHOTS = 256
POLICIES = ("threshold", "confidence")
SWEEP_HEADER = "eta,s_gkp_db,cz_mode,log2_qv,mean_h,stderr,n_instances,seed"
PROB_TOL = 1e-9


@dataclass(frozen=True)
class DvNoise:
    """Qubit cluster with depolarizing CZ gates and flipped measurements."""

    p_cz: float = 0.0
    p_m: float = 0.0

    def __post_init__(self):
        for name in ("p_cz", "p_m"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must satisfy 0 <= {name} <= 1, got {v}")


@dataclass(frozen=True)
class GateNoise:
    """Plain gate-level depolarizing noise on the compiled primitives.

    Not a measurement-based model; useful as a reference point and for
    limiting cases such as full depolarization.
    """

    p1: float = 0.0
    p2: float = 0.0

    def __post_init__(self):
        for name in ("p1", "p2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must satisfy 0 <= {name} <= 1, got {v}")


Noise = Union[DvNoise, GkpNoiseParams, GateNoise, None]


def _noise_dict(noise: Noise) -> dict:
    if noise is None:
        return {"model": "none"}
    if isinstance(noise, DvNoise):
        return {"model": "dv", **asdict(noise)}
    if isinstance(noise, GateNoise):
        return {"model": "gate", **asdict(noise)}
    return {"model": "gkp", **noise.as_dict()}


# ---------------------------------------------------------------- model circuits


@dataclass(frozen=True)
class ModelCircuit:
    d: int
    layers: tuple[tuple[tuple[int, ...], tuple[np.ndarray, ...]], ...] = field(repr=False)

    def __post_init__(self):
        if len(self.layers) != self.d:
            raise ValueError("a model circuit has exactly d layers")
        for perm, blocks in self.layers:
            if sorted(perm) != list(range(self.d)) or len(blocks) != self.d // 2:
                raise ValueError("malformed layer")

    def pairs(self, layer: int) -> list[tuple[int, int]]:
        perm = self.layers[layer][0]
        return [(perm[2 * j], perm[2 * j + 1]) for j in range(self.d // 2)]

    def to_circuit(self) -> LogicalCircuit:
        c = LogicalCircuit(self.d)
        for i, (_, blocks) in enumerate(self.layers):
            for pair, u in zip(self.pairs(i), blocks):
                c.two_qubit(pair, u, "su4")
        return c

    def ideal_probabilities(self) -> np.ndarray:
        return ideal_distribution(self.to_circuit())


def generate_model_circuit(d: int, rng: np.random.Generator) -> ModelCircuit:
    if d < 2:
        raise ValueError(f"model circuits need d >= 2, got {d}")
    layers = []
    for _ in range(d):
        perm = tuple(int(q) for q in rng.permutation(d))
        layers.append((perm, tuple(haar_su4(rng) for _ in range(d // 2))))
    return ModelCircuit(d, tuple(layers))


# ---------------------------------------------------------------- heavy outputs


def _check_distribution(probs: np.ndarray) -> int:
    probs = np.asarray(probs, dtype=float)
    n = int(round(math.log2(probs.size))) if probs.size else -1
    if probs.ndim != 1 or n < 0 or 2**n != probs.size:
        raise ValueError("distribution length must be a power of two")
    if np.any(probs < -PROB_TOL) or abs(math.fsum(probs) - 1.0) > PROB_TOL:
        raise ValueError("probabilities must be non-negative and sum to 1")
    return n


def _heavy_mask(probs: np.ndarray) -> tuple[np.ndarray, float]:
    _check_distribution(probs)
    s = np.sort(probs)
    m = s.size // 2
    p_med = float(s[m]) if s.size % 2 else 0.5 * (float(s[m - 1]) + float(s[m]))
    return probs > p_med, p_med


def heavy_set(ideal_probs: Sequence[float]) -> tuple[frozenset[str], float]:
    """Bitstrings whose ideal probability strictly exceeds the median, and the median."""
    probs = np.asarray(ideal_probs, dtype=float)
    mask, p_med = _heavy_mask(probs)
    n = _check_distribution(probs)
    return frozenset(format(i, f"0{n}b") for i in np.nonzero(mask)[0]), p_med


def heavy_output_probability(noisy_probs: np.ndarray, mask: np.ndarray) -> float:
    return math.fsum(np.asarray(noisy_probs)[mask])


# ---------------------------------------------------------------- compilation


@functools.lru_cache(maxsize=64)
def gate_set_channels(noise: Noise) -> dict[str, PauliChannel]:
    """Effective channels following each compiled primitive.

    ``cnot`` acts on (control, target). For the qubit cluster the Rz wire
    carries the channel of its Clifford skeleton, since DV channels are
    only defined for Clifford patterns.
    """
    if noise is None:
        return {"cnot": PauliChannel.identity(2), "h": PauliChannel.identity(1), "rz": PauliChannel.identity(1)}
    if isinstance(noise, GateNoise):
        one = depolarizing_channel(1, noise.p1)
        return {"cnot": depolarizing_channel(2, noise.p2), "h": one, "rz": one}
    if isinstance(noise, DvNoise):
        wire = standard_pattern("rotation", 0.0).clifford_skeleton()
        return {
            "cnot": effective_channel_dv(standard_pattern("cnot"), noise.p_cz, noise.p_m),
            "h": effective_channel_dv(standard_pattern("hadamard"), noise.p_cz, noise.p_m),
            "rz": effective_channel_dv(wire, noise.p_cz, noise.p_m),
        }
    if isinstance(noise, GkpNoiseParams):
        return {
            "cnot": effective_channel_gkp(standard_pattern("cnot"), noise),
            "h": effective_channel_gkp(standard_pattern("hadamard"), noise),
            "rz": rotation_channel(0.0, noise),
        }
    raise TypeError(f"unsupported noise model {noise!r}")


def _is_phase_identity(u: np.ndarray, tol: float = 1e-12) -> bool:
    return abs(abs(np.trace(u)) - 2.0) < tol


def _emit_single(circuit: LogicalCircuit, q: int, u: np.ndarray, chans: dict):
    # u = Rz(a) Rx(b) Rz(c) with Rx(b) = H Rz(b) H; time order Rz(c) H Rz(b) H Rz(a)
    if _is_phase_identity(u):
        return
    a, b, c = euler_zxz(u)
    for kind, arg in (("rz", c), ("h", None), ("rz", b), ("h", None), ("rz", a)):
        if kind == "h":
            circuit.unitary(q, HADAMARD, "h")
        else:
            circuit.unitary(q, rz(arg), "rz")
        if not chans[kind].identity_prob == 1.0:
            circuit.channel(chans[kind], (q,), kind)


def compile_noisy(mc: ModelCircuit, noise: Noise) -> LogicalCircuit:
    """Lower ``mc`` onto CNOT/H/Rz primitives, each followed by its effective channel."""
    chans = gate_set_channels(noise)
    c = LogicalCircuit(mc.d)
    for i, (_, blocks) in enumerate(mc.layers):
        for pair, u in zip(mc.pairs(i), blocks):
            k = kak_decompose(u)
            for j, (u0, u1) in enumerate(k.layers):
                _emit_single(c, pair[0], u0, chans)
                _emit_single(c, pair[1], u1, chans)
                if j < len(k.cnots):
                    ctl, tgt = (pair[k.cnots[j][0]], pair[k.cnots[j][1]])
                    c.two_qubit((ctl, tgt), CNOT, "cnot")
                    if not chans["cnot"].identity_prob == 1.0:
                        c.channel(chans["cnot"], (ctl, tgt), "cnot")
    return c


# ---------------------------------------------------------------- runs


@dataclass(frozen=True)
class QvRunResult:
    d: int
    n_instances: int
    mean_h: float
    stderr: float
    threshold_pass: bool
    confidence_pass: bool
    metadata: dict

    def __post_init__(self):
        if not 0.0 <= self.mean_h <= 1.0:
            raise ValueError("mean_h outside [0, 1]")

    def passed(self, policy: str = "threshold") -> bool:
        if policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}")
        return self.threshold_pass if policy == "threshold" else self.confidence_pass

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2, default=_json_default)

    @classmethod
    def from_json(cls, text: str) -> QvRunResult:
        return cls(**json.loads(text))


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def instance_heavy_output(
    d: int, noise: Noise, index: int, seed: int, mode: str = "exact", shots: int = DEFAULT_SHOTS
) -> float:
    """h_U of model-circuit instance ``index``; see module docstring for streams."""
    mc = generate_model_circuit(d, task_rng(seed, d, index, 0))
    ideal = mc.ideal_probabilities()
    mask, _ = _heavy_mask(ideal)
    if mode == "uniform":
        probs = np.full(2**d, 2.0**-d)
    elif noise is None:
        # compilation is exact, so the noiseless output is the ideal one
        probs = ideal
    else:
        probs = outcome_distribution(compile_noisy(mc, noise), mode, shots=shots, seed=seed, key=(d, index, 1))
    return heavy_output_probability(probs, mask)


def _instance_task(args):
    return instance_heavy_output(*args)


def _resolve_mode(d: int, mode: str, exact_max: int) -> str:
    if mode == "auto":
        return "exact" if d <= exact_max else "trajectory"
    if mode == "exact" and d > 12:
        raise ValueError(f"exact mode infeasible at d = {d} (density matrix limited to 12 qubits)")
    if mode not in ("exact", "trajectory", "uniform"):
        raise ValueError(f"unknown mode {mode!r}")
    return mode


def run_qv(
    d: int,
    noise: Noise,
    n_instances: int = DEFAULT_INSTANCES,
    shots: int = DEFAULT_SHOTS,
    seed: int = 0,
    mode: str = "auto",
    exact_max: int = DEFAULT_EXACT_MAX,
    map_fn: Callable = map,
) -> QvRunResult:
    """Mean heavy-output probability of ``n_instances`` random width-d circuits.

    ``mode="auto"`` uses the exact density matrix for d <= ``exact_max`` and
    ``shots`` trajectories beyond. ``map_fn`` may be a pool's ordered map.
    """
    if d < 2 or n_instances < 1:
        raise ValueError("run_qv needs d >= 2 and n_instances >= 1")
    resolved = _resolve_mode(d, mode, exact_max)
    tasks = [(d, noise, i, seed, resolved, shots) for i in range(n_instances)]
    h = np.array(list(map_fn(_instance_task, tasks)))
    mean_h = float(math.fsum(h) / n_instances)
    stderr = float(np.std(h, ddof=1) / math.sqrt(n_instances)) if n_instances > 1 else 0.0
    meta = {
        "noise": _noise_dict(noise),
        "seed": seed,
        "mode": resolved,
        "shots": shots if resolved == "trajectory" else None,
        "exact_max": exact_max,
        "threshold": THRESHOLD,
    }
    return QvRunResult(
        d=d,
        n_instances=n_instances,
        mean_h=mean_h,
        stderr=stderr,
        threshold_pass=mean_h >= THRESHOLD,
        confidence_pass=mean_h - 2.0 * stderr >= THRESHOLD,
        metadata=meta,
    )


def quantum_volume(
    noise: Noise,
    d_max: int,
    policy: str = "threshold",
    d_min: int = 2,
    return_runs: bool = False,
    **run_kw,
):
    """log2 of the quantum volume: the largest passing width d <= d_max, else 0.

    Widths are tried from d_max downwards and the scan stops at the first
    pass. With ``return_runs`` the per-width results are returned as well.
    """
    if d_max < 2:
        raise ValueError("d_max must be at least 2")
    if policy not in POLICIES:
        raise ValueError(f"policy must be one of {POLICIES}")
    runs: dict[int, QvRunResult] = {}
    best = 0
    for d in range(d_max, d_min - 1, -1):
        runs[d] = run_qv(d, noise, **run_kw)
        if runs[d].passed(policy):
            best = d
            break
    return (best, runs) if return_runs else best


def qv_sweep(
    eta_grid: Iterable[float],
    s_grid: Iterable[float],
    cz_mode: str = "equal",
    d_max: int = 10,
    n_instances: int = 100,
    shots: int = DEFAULT_SHOTS,
    seed: int = 0,
    policy: str = "threshold",
    exact_max: int = DEFAULT_EXACT_MAX,
    d_min: int = 2,
    map_fn: Callable = map,
    log: Callable[[str], None] | None = None,
    **noise_kw,
) -> list[dict]:
    """One row per (eta, s_gkp) cell, columns as in ``SWEEP_HEADER``.

    Every cell uses the same master seed, so neighbouring cells see the same
    model circuits (common random numbers). ``mean_h``/``stderr`` refer to
    the passing width, or to ``d_min`` when no width passes.
    """
    eta_grid, s_grid = list(eta_grid), list(s_grid)
    if not eta_grid or not s_grid:
        raise ValueError("sweep grids must be non-empty")
    rows = []
    for eta in eta_grid:
        for s in s_grid:
            params = GkpNoiseParams.for_cz_mode(float(s), float(eta), cz_mode, **noise_kw)
            q, runs = quantum_volume(
                params,
                d_max,
                policy,
                d_min=d_min,
                return_runs=True,
                n_instances=n_instances,
                shots=shots,
                seed=seed,
                exact_max=exact_max,
                map_fn=map_fn,
            )
            ref = runs[q] if q else runs[d_min]
            row = {
                "eta": float(eta),
                "s_gkp_db": float(s),
                "cz_mode": cz_mode,
                "log2_qv": q,
                "mean_h": ref.mean_h,
                "stderr": ref.stderr,
                "n_instances": n_instances,
                "seed": seed,
            }
            rows.append(row)
            if log is not None:
                log(f"eta={eta:g} s_gkp_db={s:g} cz_mode={cz_mode} log2_qv={q} mean_h={ref.mean_h:.4f}")
    return rows
