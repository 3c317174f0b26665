"""GKP cluster states under the twirling approximation.

Finite squeezing, noisy CZ gates and inefficient homodyne detection are all
Gaussian random displacements, so the noise on an N-mode cluster is captured by
a 2N x 2N covariance matrix over ``(x_1..x_N, p_1..p_N)``. A homodyne outcome
is decoded by rounding to the nearest multiple of sqrt(pi); landing on an odd
multiple flips the logical outcome. Flips are routed to logical Paulis with
the byproduct frame of the DV pattern, since the GKP Clifford patterns share
the same graph and Pauli bases.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Union

import numpy as np
from scipy.special import ndtr

from .mbqc_dv import MeasurementPattern, standard_pattern
from .pauli import (
    PauliChannel,
    PauliString,
    compose,
    depolarizing_channel,
    flip_channel,
    infidelity,
)

__all__ = [
    "GkpNoiseParams",
    "QuadratureNoise",
    "GkpMeasurementBasis",
    "db_to_variance",
    "variance_to_db",
    "homodyne_variance",
    "init_cluster_noise",
    "apply_cz",
    "measured_variance",
    "flip_probability",
    "cluster_noise",
    "effective_channel_gkp",
    "rotation_error_rate",
    "rotation_channel",
    "infidelity_vs_squeezing",
    "CZ_MODES",
    "site_flip_probabilities",
    "gate_channel",
]

SQRT_PI = math.sqrt(math.pi)
PSD_TOL = 1e-10

# p_rot = clamp(c0 + c1 * 10^(-s_gkp/10)): a per-rotation depolarizing rate.
DEFAULT_ROT_C0 = 2.0e-5
DEFAULT_ROT_C1 = 0.05

# s_cz tied to s_gkp, or no CZ noise at all
CZ_MODES = ("equal", "zero")


def db_to_variance(s_db: float) -> float:
    """Shift variance for a squeezing level in dB: s = -10 log10(2 sigma^2)."""
    if math.isnan(s_db):
        raise ValueError("squeezing must be a number")
    if s_db == math.inf:
        return 0.0
    return 10.0 ** (-s_db / 10.0) / 2.0


def variance_to_db(var: float) -> float:
    if var <= 0:
        return math.inf
    return -10.0 * math.log10(2.0 * var)


def homodyne_variance(eta: float) -> float:
    """Extra shift variance (1 - eta) / (2 eta) of a detector with efficiency eta."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"homodyne efficiency must satisfy 0 < eta <= 1, got {eta}")
    return (1.0 - eta) / (2.0 * eta)


@dataclass(frozen=True)
class GkpNoiseParams:
    """Physical noise knobs of a GKP cluster-state machine.

    CZ noise is given either as a squeezing-like level ``s_cz_db`` (``inf``
    disables it) or directly as ``kappa_over_g``, the ratio of loss rate to
    coupling, which is the CZ shift variance.
    """

    s_gkp_db: float
    eta: float = 1.0
    s_cz_db: float = math.inf
    kappa_over_g: float | None = None
    xcov: float = 0.0
    rot_c0: float = DEFAULT_ROT_C0
    rot_c1: float = DEFAULT_ROT_C1
    mode: str = "analytic"

    def __post_init__(self):
        if not self.s_gkp_db >= 0:
            raise ValueError(f"s_gkp_db must be >= 0, got {self.s_gkp_db}")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must satisfy 0 < eta <= 1, got {self.eta}")
        if self.kappa_over_g is not None and not self.kappa_over_g >= 0:
            raise ValueError(f"kappa_over_g must be >= 0, got {self.kappa_over_g}")
        if math.isnan(self.s_cz_db):
            raise ValueError("s_cz_db must be a number")
        if not -1.0 <= self.xcov <= 1.0:
            raise ValueError(f"xcov must lie in [-1, 1], got {self.xcov}")
        if self.mode not in ("analytic", "sampled"):
            raise ValueError(f"mode must be 'analytic' or 'sampled', got {self.mode!r}")

    @classmethod
    def for_cz_mode(cls, s_gkp_db: float, eta: float, cz_mode: str, **kw) -> GkpNoiseParams:
        if cz_mode == "equal":
            return cls(s_gkp_db, eta, s_cz_db=s_gkp_db, **kw)
        if cz_mode == "zero":
            return cls(s_gkp_db, eta, s_cz_db=math.inf, **kw)
        raise ValueError(f"cz_mode must be one of {CZ_MODES}, got {cz_mode!r}")

    @property
    def sigma2_gkp(self) -> float:
        return db_to_variance(self.s_gkp_db)

    @property
    def sigma2_cz(self) -> float:
        if self.kappa_over_g is not None:
            return float(self.kappa_over_g)
        return db_to_variance(self.s_cz_db)

    @property
    def sigma2_m(self) -> float:
        return homodyne_variance(self.eta)

    def as_dict(self) -> dict:
        return {
            "s_gkp_db": self.s_gkp_db,
            "s_cz_db": self.s_cz_db,
            "kappa_over_g": self.kappa_over_g,
            "eta": self.eta,
            "xcov": self.xcov,
            "rot_c0": self.rot_c0,
            "rot_c1": self.rot_c1,
            "mode": self.mode,
            "sigma2_gkp": self.sigma2_gkp,
            "sigma2_cz": self.sigma2_cz,
            "sigma2_m": self.sigma2_m,
            "p_rot": rotation_error_rate(0.0, self),
        }


@dataclass(frozen=True)
class QuadratureNoise:
    """Covariance of Gaussian displacement errors, ordering (x_1..x_N, p_1..p_N)."""

    n_modes: int
    cov: np.ndarray = field(repr=False)

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (2 * self.n_modes, 2 * self.n_modes):
            raise ValueError(f"covariance must be {2 * self.n_modes}x{2 * self.n_modes}")
        if not np.allclose(cov, cov.T, atol=1e-12, rtol=0):
            raise ValueError("covariance is not symmetric")
        if cov.size and np.linalg.eigvalsh(cov).min() < -PSD_TOL:
            raise ValueError("covariance is not positive semidefinite")
        cov.setflags(write=False)
        object.__setattr__(self, "cov", cov)

    def block(self, mode: int) -> np.ndarray:
        """2x2 covariance of (x_mode, p_mode)."""
        idx = [mode, self.n_modes + mode]
        return self.cov[np.ix_(idx, idx)]


class GkpMeasurementBasis:
    """Quadrature read out by a homodyne detector for a GKP Pauli measurement.

    X is read from p, Z from x, Y from the diagonal x - p (unit-normalised).
    An XY-plane angle is a non-Gaussian rotation followed by reading p.
    """

    _DIRECTIONS = {
        "X": (0.0, 1.0),
        "Z": (1.0, 0.0),
        "Y": (1.0 / math.sqrt(2.0), -1.0 / math.sqrt(2.0)),
    }

    def __init__(self, basis: Union[str, float]):
        if isinstance(basis, str):
            if basis not in self._DIRECTIONS:
                raise ValueError(f"unknown GKP measurement basis {basis!r}")
            self.name = basis
            self.angle = None
        else:
            self.name = "XY"
            self.angle = float(basis)

    @property
    def direction(self) -> np.ndarray:
        return np.array(self._DIRECTIONS.get(self.name, self._DIRECTIONS["X"]))

    def __repr__(self):
        return f"GkpMeasurementBasis({self.name if self.angle is None else self.angle!r})"


def init_cluster_noise(n_modes: int, sigma2_gkp: float) -> QuadratureNoise:
    if sigma2_gkp < 0:
        raise ValueError("variance must be non-negative")
    return QuadratureNoise(n_modes, sigma2_gkp * np.eye(2 * n_modes))


def cz_symplectic(n_modes: int, j: int, k: int) -> np.ndarray:
    """Heisenberg map of exp(-i x_j x_k): p_j -> p_j - x_k, p_k -> p_k - x_j."""
    s = np.eye(2 * n_modes)
    s[n_modes + j, k] = -1.0
    s[n_modes + k, j] = -1.0
    return s


def cz_noise_covariance(n_modes: int, j: int, k: int, sigma2_cz: float, xcov: float = 0.0) -> np.ndarray:
    a = np.zeros((2 * n_modes, 2 * n_modes))
    xj, xk, pj, pk = j, k, n_modes + j, n_modes + k
    for i in (xj, xk, pj, pk):
        a[i, i] = sigma2_cz
    for u, v in ((xj, pk), (xk, pj)):
        a[u, v] = a[v, u] = xcov * sigma2_cz
    return a


def apply_cz(noise: QuadratureNoise, j: int, k: int, sigma2_cz: float, xcov: float = 0.0) -> QuadratureNoise:
    """Propagate the covariance through an ideal CZ, then add the gate's own shift noise."""
    n = noise.n_modes
    if j == k or not (0 <= j < n and 0 <= k < n):
        raise ValueError(f"invalid mode pair ({j}, {k}) for {n} modes")
    if sigma2_cz < 0:
        raise ValueError("CZ noise variance must be non-negative")
    s = cz_symplectic(n, j, k)
    cov = s @ noise.cov @ s.T + cz_noise_covariance(n, j, k, sigma2_cz, xcov)
    cov = 0.5 * (cov + cov.T)
    return QuadratureNoise(n, cov)


def measured_variance(noise: QuadratureNoise, mode: int, basis, eta: float = 1.0) -> float:
    """Variance of the decoded quadrature, including detector inefficiency."""
    if not isinstance(basis, GkpMeasurementBasis):
        basis = GkpMeasurementBasis(basis)
    u = basis.direction
    block = noise.block(mode) + homodyne_variance(eta) * np.eye(2)
    return float(u @ block @ u)


def flip_probability(var: float, tol: float = 1e-18) -> float:
    """Probability that a N(0, var) shift rounds to an odd multiple of sqrt(pi).

    Small variances sum the bin masses directly; large ones use the Fourier
    series of the parity square wave, which converges fast there. Summation
    stops once a term drops below ``tol`` times the running total.
    """
    if var < 0 or math.isnan(var):
        raise ValueError(f"variance must be non-negative, got {var}")
    if var == 0.0:
        return 0.0
    if math.isinf(var):
        return 0.5
    sigma = math.sqrt(var)
    if sigma <= 1.0:
        total = 0.0
        n = 1
        while True:
            term = float(ndtr(-(n - 0.5) * SQRT_PI / sigma) - ndtr(-(n + 0.5) * SQRT_PI / sigma))
            total += term
            if term <= tol * total:
                break
            n += 2
        return 2.0 * total
    # 1/2 - (2/pi) sum_m (-1)^m/(2m+1) exp(-(2m+1)^2 pi var / 2)
    acc = 0.0
    m = 0
    while True:
        k = 2 * m + 1
        term = math.exp(-k * k * math.pi * var / 2.0) / k
        acc += term if m % 2 == 0 else -term
        if term <= tol * max(abs(acc), 1e-300):
            break
        m += 1
    return 0.5 - 2.0 / math.pi * acc


def cluster_noise(pattern: MeasurementPattern, params: GkpNoiseParams) -> QuadratureNoise:
    noise = init_cluster_noise(pattern.n_sites, params.sigma2_gkp)
    for j, k in pattern.edges:
        noise = apply_cz(noise, j, k, params.sigma2_cz, params.xcov)
    return noise


def site_flip_probabilities(pattern: MeasurementPattern, params: GkpNoiseParams, tol: float = 1e-18) -> dict:
    noise = cluster_noise(pattern, params)
    basis = pattern.basis
    return {
        s: flip_probability(measured_variance(noise, s, basis[s], params.eta), tol)
        for s in pattern.measured_sites
    }


def _analytic_channel(pattern: MeasurementPattern, params: GkpNoiseParams, tol: float) -> PauliChannel:
    frame = pattern.frame
    chan = PauliChannel.identity(pattern.n_logical)
    for s, q in site_flip_probabilities(pattern, params, tol).items():
        chan = compose(chan, flip_channel(frame[s], q))
    return chan


def _sampled_channel(
    pattern: MeasurementPattern, params: GkpNoiseParams, n_samples: int, rng: np.random.Generator
) -> PauliChannel:
    """Monte Carlo over correlated shifts, decoding all measured sites jointly."""
    noise = cluster_noise(pattern, params)
    n = pattern.n_sites
    sites = list(pattern.measured_sites)
    basis = pattern.basis
    proj = np.zeros((len(sites), 2 * n))
    for r, s in enumerate(sites):
        u = GkpMeasurementBasis(basis[s]).direction
        proj[r, s], proj[r, n + s] = u
    shifts = rng.multivariate_normal(np.zeros(2 * n), noise.cov, size=n_samples, method="eigh")
    readout = shifts @ proj.T
    if params.sigma2_m > 0:
        readout += rng.normal(0.0, math.sqrt(params.sigma2_m), size=readout.shape)
    flips = (np.rint(readout / SQRT_PI).astype(np.int64) % 2).astype(bool)
    frame = pattern.frame
    fx = np.array([frame[s].x_mask for s in sites], dtype=np.int64)
    fz = np.array([frame[s].z_mask for s in sites], dtype=np.int64)
    lx = np.bitwise_xor.reduce(np.where(flips, fx, 0), axis=1)
    lz = np.bitwise_xor.reduce(np.where(flips, fz, 0), axis=1)
    keys, counts = np.unique(lx * (1 << pattern.n_logical) + lz, return_counts=True)
    nl = pattern.n_logical
    probs = {PauliString(nl, int(k) >> nl, int(k) & ((1 << nl) - 1)): c / n_samples for k, c in zip(keys, counts)}
    return PauliChannel(nl, probs)


def effective_channel_gkp(
    pattern: MeasurementPattern,
    params: GkpNoiseParams,
    *,
    n_samples: int = 200_000,
    rng: np.random.Generator | None = None,
    tol: float = 1e-18,
) -> PauliChannel:
    """Logical Pauli channel of a Clifford pattern on a noisy GKP cluster.

    In ``analytic`` mode (default) each measured site flips independently
    with the probability set by its marginal variance. ``sampled`` mode
    draws correlated shift vectors from the full covariance instead.
    """
    if not pattern.is_clifford:
        raise ValueError("pattern has XY-plane measurements; use rotation_channel for rotations")
    if params.mode == "sampled":
        return _sampled_channel(pattern, params, n_samples, rng if rng is not None else np.random.default_rng(0))
    return _cached_analytic(pattern, params, tol)


@functools.lru_cache(maxsize=512)
def _cached_analytic(pattern, params, tol):
    return _analytic_channel(pattern, params, tol)


def rotation_error_rate(theta: float, params: GkpNoiseParams) -> float:
    """Depolarizing rate of the non-Gaussian Z rotation on a GKP qubit.

    Configurable model ``clamp(rot_c0 + rot_c1 * 10^(-s_gkp/10), 0, 1)``;
    the angle does not enter.
    """
    rate = params.rot_c0 + params.rot_c1 * 10.0 ** (-params.s_gkp_db / 10.0)
    return min(max(rate, 0.0), 1.0)


def rotation_channel(theta: float, params: GkpNoiseParams) -> PauliChannel:
    """Rotation gate: depolarizing error composed with the measurement noise of its wire."""
    wire = effective_channel_gkp(standard_pattern("rotation", theta).clifford_skeleton(), replace(params, mode="analytic"))
    return compose(depolarizing_channel(1, rotation_error_rate(theta, params)), wire)


def gate_channel(gate: str, params: GkpNoiseParams, **kw) -> PauliChannel:
    gate = gate.lower()
    if gate == "rotation":
        return rotation_channel(0.0, params)
    return effective_channel_gkp(standard_pattern(gate), params, **kw)


def infidelity_vs_squeezing(
    gate: str, eta: float, s_grid: Iterable[float], cz_mode: str = "equal", metric: str = "average", **kw
) -> np.ndarray:
    """Gate infidelity at each squeezing level in ``s_grid``.

    ``metric="average"`` gives 1 - average gate fidelity, ``"process"``
    gives 1 - process fidelity.
    """
    out = []
    for s in s_grid:
        if not s > 0:
            raise ValueError("squeezing grid must be positive")
        params = GkpNoiseParams.for_cz_mode(float(s), eta, cz_mode, **kw)
        chan = gate_channel(gate, params)
        if metric == "average":
            out.append(infidelity(chan))
        elif metric == "process":
            out.append(chan.error_mass)
        else:
            raise ValueError(f"unknown metric {metric!r}")
    return np.array(out)

