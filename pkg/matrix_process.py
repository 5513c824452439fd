"""Switched matrix diffusion on real symmetric N x N matrices.

Time is cut into intervals of length 1/n. On each interval a Bernoulli(p)
switch picks either a free slice (GOE increment dH, independent of M) or a
commuting slice (dY sharing the eigenbasis of M at the interval start):

    dM = -M/2 dt + eps dH + (1 - eps) dY
"""

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from rich.console import Console

from errors import ConfigError, ConvergenceError, DomainError
from spectral_stats import SpectrumSample
from streams import stream

console = Console(stderr=True)

JACOBI_TOL = 1e-12
MAX_SWEEPS = 50

EigMethod = Literal["jacobi", "lapack"]


@dataclass(frozen=True)
class SymMatrixState:
    m: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DomainError(f"expected a square matrix, got shape {m.shape}")
        if not np.array_equal(m, m.T):
            raise DomainError("matrix is not exactly symmetric")
        object.__setattr__(self, "m", m)

    @property
    def n_dim(self):
        return self.m.shape[0]

    @classmethod
    def zeros(cls, n_dim):
        return cls(np.zeros((n_dim, n_dim)), 0.0)


@dataclass(frozen=True)
class EigenSystem:
    """values ascending; column i of vectors pairs with values[i]."""

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self):
        return (self.vectors * self.values) @ self.vectors.T


def _off_norm(a):
    return math.sqrt(max(float(np.sum(a * a) - np.sum(np.diag(a) ** 2)), 0.0))


def _rotate(a, v, p, q):
    """Zero a[p, q] with one Jacobi rotation, updating a and v in place."""
    apq = a[p, q]
    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
    c = 1.0 / math.sqrt(t * t + 1.0)
    s = t * c

    col_p, col_q = a[:, p].copy(), a[:, q].copy()
    a[:, p] = c * col_p - s * col_q
    a[:, q] = s * col_p + c * col_q
    row_p, row_q = a[p, :].copy(), a[q, :].copy()
    a[p, :] = c * row_p - s * row_q
    a[q, :] = s * row_p + c * row_q
    a[p, q] = a[q, p] = 0.0

    vec_p, vec_q = v[:, p].copy(), v[:, q].copy()
    v[:, p] = c * vec_p - s * vec_q
    v[:, q] = s * vec_p + c * vec_q


def _jacobi(a, v, tol, max_sweeps):
    n = a.shape[0]
    scale = math.sqrt(float(np.sum(a * a)))
    if scale == 0.0:
        return np.diag(a).copy(), v
    for sweep in range(max_sweeps):
        off = _off_norm(a)
        if off <= tol * scale:
            return np.diag(a).copy(), v
        # threshold sweeps: skip small elements while the matrix is far from diagonal
        threshold = 0.2 * off / (n * n) if sweep < 3 else 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) > threshold and a[p, q] != 0.0:
                    _rotate(a, v, p, q)
    if _off_norm(a) <= tol * scale:
        return np.diag(a).copy(), v
    raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")


def _canonical(values, vectors):
    """Ascending values; each column's largest-magnitude entry (first on ties) made positive."""
    order = np.argsort(values, kind="stable")
    values, vectors = values[order], vectors[:, order].copy()
    mags = np.abs(vectors)
    for i in range(vectors.shape[1]):
        lead = int(np.argmax(mags[:, i] >= mags[:, i].max() * (1.0 - 1e-8)))
        if vectors[lead, i] < 0:
            vectors[:, i] = -vectors[:, i]
    return EigenSystem(values, vectors)


def eigh(state, guess=None, method="jacobi", tol=JACOBI_TOL, max_sweeps=MAX_SWEEPS):
    """Full eigendecomposition of a real symmetric matrix.

    `guess` is a previous EigenSystem; the matrix is rotated into its basis
    first, which leaves only a few sweeps when M has moved little.
    """
    m = state.m if isinstance(state, SymMatrixState) else np.asarray(state, dtype=float)
    if not np.all(np.isfinite(m)):
        raise DomainError("matrix has non-finite entries")
    if method == "lapack":
        values, vectors = np.linalg.eigh(m)
        return _canonical(values, vectors)
    if method != "jacobi":
        raise DomainError(f"unknown eigensolver {method!r}")
    if guess is not None:
        v = guess.vectors.copy()
        a = v.T @ m @ v
        a = 0.5 * (a + a.T)
    else:
        v = np.eye(m.shape[0])
        a = m.copy()
    values, vectors = _jacobi(a, v, tol, max_sweeps)
    return _canonical(values, vectors)


def free_increment(n_dim, dt, sigma, rng):
    """GOE increment: diagonal variance sigma^2 dt, off-diagonal sigma^2 dt / 2."""
    g = rng.standard_normal((n_dim, n_dim))
    return sigma * math.sqrt(dt) * 0.5 * (g + g.T)


def step_free(state, dt, sigma, rng, increment=None):
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    dh = free_increment(state.n_dim, dt, sigma, rng) if increment is None else increment
    return SymMatrixState(state.m * (1.0 - 0.5 * dt) + dh, state.t + dt)


def step_commuting(state, dt, sigma, rng, basis):
    """Noise diagonal in `basis`: V diag(sigma sqrt(dt) xi) V^T."""
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    xi = sigma * math.sqrt(dt) * rng.standard_normal(state.n_dim)
    v = basis.vectors
    dy = (v * xi) @ v.T
    dy = 0.5 * (dy + dy.T)
    return SymMatrixState(state.m * (1.0 - 0.5 * dt) + dy, state.t + dt)


def _whole(span, unit, option):
    k = round(span / unit)
    if k < 1 or abs(k * unit - span) > 1e-9 * max(span, unit):
        raise ConfigError(option, f"{span} is not a whole multiple of {unit}")
    return int(k)


@dataclass(frozen=True)
class MatrixConfig:
    n_dim: int
    p: float = 0.5
    switch_rate: int = 100
    sigma: float = 1.0
    dt: float = 1e-2
    burn_in: float = 40.0
    sample_stride: float = 1.0
    n_samples: int = 100
    seed: int = 0
    replica: int = 0
    eig_method: EigMethod = "jacobi"
    keep_vectors: bool = False

    @property
    def interval(self):
        return 1.0 / self.switch_rate

    @property
    def duration(self):
        """Recorded span T after burn-in."""
        return self.n_samples * self.sample_stride

    def validate(self):
        if self.n_dim < 1:
            raise ConfigError("n_dim", f"must be a positive integer, got {self.n_dim}")
        if not 0 <= self.p <= 1:
            raise ConfigError("p", f"must lie in [0, 1], got {self.p}")
        if self.switch_rate < 1:
            raise ConfigError("switch_rate", f"must be >= 1, got {self.switch_rate}")
        if not self.sigma > 0:
            raise ConfigError("sigma", f"must be positive, got {self.sigma}")
        if not self.dt > 0:
            raise ConfigError("dt", f"must be positive, got {self.dt}")
        if self.burn_in < 0:
            raise ConfigError("burn_in", f"must be non-negative, got {self.burn_in}")
        if self.n_samples < 1:
            raise ConfigError("n_samples", f"must be a positive integer, got {self.n_samples}")
        if self.eig_method not in ("jacobi", "lapack"):
            raise ConfigError("eig_method", f"unknown eigensolver {self.eig_method!r}")
        _whole(self.interval, self.dt, "dt")
        _whole(self.sample_stride, self.interval, "sample_stride")
        if self.burn_in > 0:
            _whole(self.burn_in, self.interval, "burn_in")
        return self


@dataclass
class MatrixRun:
    samples: list
    snapshots: list = field(default_factory=list)
    final_state: SymMatrixState | None = None
    counters: dict = field(default_factory=dict)


def simulate_switched(cfg, initial=None, verbose=False):
    """Run burn-in plus n_samples strides, sampling the spectrum at stride boundaries."""
    cfg.validate()
    rng = stream(cfg.seed, "matrix", cfg.replica)
    schedule = stream(cfg.seed, "schedule", cfg.replica)
    state = initial if initial is not None else SymMatrixState.zeros(cfg.n_dim)
    if state.n_dim != cfg.n_dim:
        raise ConfigError("initial", f"expected a {cfg.n_dim}x{cfg.n_dim} matrix, got {state.n_dim}")

    steps_per_interval = _whole(cfg.interval, cfg.dt, "dt")
    burn = _whole(cfg.burn_in, cfg.interval, "burn_in") if cfg.burn_in > 0 else 0
    stride = _whole(cfg.sample_stride, cfg.interval, "sample_stride")
    total = burn + cfg.n_samples * stride
    t0 = state.t

    run = MatrixRun(samples=[])
    counts = {"free_intervals": 0, "commuting_intervals": 0, "eigh_calls": 0}
    basis = None
    for k in range(total):
        free = schedule.random() < cfg.p
        if free:
            counts["free_intervals"] += 1
            for _ in range(steps_per_interval):
                state = step_free(state, cfg.dt, cfg.sigma, rng)
        else:
            counts["commuting_intervals"] += 1
            basis = eigh(state, guess=basis, method=cfg.eig_method)
            counts["eigh_calls"] += 1
            for _ in range(steps_per_interval):
                state = step_commuting(state, cfg.dt, cfg.sigma, rng, basis)
        state = SymMatrixState(state.m, t0 + (k + 1) * cfg.interval)

        if k + 1 == burn and verbose:
            console.log(f"🔥 burn-in finished at t={state.t:g}")
        if k + 1 > burn and (k + 1 - burn) % stride == 0:
            basis = eigh(state, guess=basis, method=cfg.eig_method)
            counts["eigh_calls"] += 1
            run.samples.append(SpectrumSample(t=state.t, lambdas=basis.values.copy()))
            if cfg.keep_vectors:
                run.snapshots.append(basis)

    run.final_state = state
    run.counters = counts
    if verbose:
        console.log(f"🎲 replica {cfg.replica}: {len(run.samples)} samples, {counts}")
    return run


def haar_overlap_samples(snapshots, direction, index=0):
    """(v_index . e)^2 across snapshots."""
    e = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(e) - 1.0) > 1e-9:
        raise DomainError("direction must be a unit vector")
    return np.array([float(s.vectors[:, index] @ e) ** 2 for s in snapshots])


_HEADER = struct.Struct("<qd")


def save_snapshot(state, path):
    """Little-endian int64 N, float64 t, then N*N float64 entries row-major."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = np.ascontiguousarray(state.m, dtype="<f8").tobytes()
    path.write_bytes(_HEADER.pack(state.n_dim, state.t) + body)


def load_snapshot(path):
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DomainError(f"{path} is too short for a snapshot header")
    n, t = _HEADER.unpack_from(raw)
    body = raw[_HEADER.size :]
    if len(body) != 8 * n * n:
        raise DomainError(f"{path}: expected {n * n} entries, found {len(body) // 8}")
    m = np.frombuffer(body, dtype="<f8").reshape(n, n).astype(float)
    return SymMatrixState(m, t)
