"""Eigenvalue SDEs of the switched, fixed-beta and crossover-scaled gases.

    d lambda_i = -lambda_i/2 dt + g * sum_{j != i} dt / (lambda_i - lambda_j) + sigma db_i

with coupling g = beta sigma^2/2 (fixed_beta), c sigma^2/N (crossover) or
eps_t sigma^2/2 (switched, eps_t ~ Bernoulli(p) held over intervals of 1/n).
Euler-Maruyama, then the particles are re-sorted; a step whose repulsion is
too stiff for its local gap is bisected along a Brownian bridge.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np
from joblib import Parallel, delayed
from rich.console import Console

from errors import ConfigError, DomainError, SingularityError
from spectral_stats import SpectrumSample
from streams import NoiseBlock, stream

console = Console(stderr=True)

GAP_FRACTION = 0.1
MAX_HALVINGS = 20
GUARD_GAP = 1e-9  # in units of sigma
CROSSOVER_MAX_DT = 0.01

SdeMode = Literal["fixed_beta", "crossover", "switched"]


@dataclass(frozen=True)
class GasState:
    lambdas: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        if lam.ndim != 1:
            raise DomainError("particle positions must be a 1-D array")
        if np.any(np.diff(lam) < 0):
            raise DomainError("particle positions must be sorted ascending")
        object.__setattr__(self, "lambdas", lam)


def _whole_steps(span, dt, option):
    steps = round(span / dt)
    if abs(steps * dt - span) > 1e-9 * max(span, dt):
        raise ConfigError(option, f"{span} is not a whole number of dt = {dt} steps")
    return int(steps)


@dataclass(frozen=True)
class SdeConfig:
    n_dim: int
    mode: SdeMode = "fixed_beta"
    beta: float = 1.0
    c: float = 0.0
    p: float = 0.5
    switch_rate: int = 100
    sigma: float = 1.0
    dt: float = 1e-3
    burn_in: float = 40.0
    sample_stride: float = 1.0
    n_samples: int = 100
    seed: int = 0
    replica: int = 0

    def validate(self):
        if self.n_dim < 1:
            raise ConfigError("n_dim", f"must be a positive integer, got {self.n_dim}")
        if self.mode not in ("fixed_beta", "crossover", "switched"):
            raise ConfigError("mode", f"unknown mode {self.mode!r}")
        if self.mode == "fixed_beta" and not 0 <= self.beta <= 2:
            raise ConfigError("beta", f"must lie in [0, 2], got {self.beta}")
        if self.mode == "crossover":
            if self.c < 0:
                raise ConfigError("c", f"attractive gases (c < 0) are not simulated, got {self.c}")
            if self.dt > CROSSOVER_MAX_DT:
                raise ConfigError("dt", f"crossover mode needs dt <= {CROSSOVER_MAX_DT}, got {self.dt}")
        if self.mode == "switched":
            if not 0 <= self.p <= 1:
                raise ConfigError("p", f"must lie in [0, 1], got {self.p}")
            if self.switch_rate < 1:
                raise ConfigError("switch_rate", f"must be >= 1, got {self.switch_rate}")
            _whole_steps(1.0 / self.switch_rate, self.dt, "dt")
        if not self.sigma > 0:
            raise ConfigError("sigma", f"must be positive, got {self.sigma}")
        if not self.dt > 0:
            raise ConfigError("dt", f"must be positive, got {self.dt}")
        if self.dt > self.sample_stride:
            raise ConfigError("sample_stride", f"must be >= dt = {self.dt}, got {self.sample_stride}")
        if self.burn_in < 0:
            raise ConfigError("burn_in", f"must be non-negative, got {self.burn_in}")
        if self.n_samples < 1:
            raise ConfigError("n_samples", f"must be a positive integer, got {self.n_samples}")
        if self.replica < 0:
            raise ConfigError("replica", f"must be non-negative, got {self.replica}")
        _whole_steps(self.sample_stride, self.dt, "sample_stride")
        _whole_steps(self.burn_in, self.dt, "burn_in")
        return self

    @property
    def burn_in_steps(self):
        return _whole_steps(self.burn_in, self.dt, "burn_in")

    @property
    def stride_steps(self):
        return _whole_steps(self.sample_stride, self.dt, "sample_stride")

    @property
    def interval_steps(self):
        """Global steps per switching interval 1/n (switched mode only)."""
        return _whole_steps(1.0 / self.switch_rate, self.dt, "dt")

    def coupling(self, eps=1.0):
        s2 = self.sigma**2
        if self.mode == "fixed_beta":
            return 0.5 * self.beta * s2
        if self.mode == "crossover":
            return self.c * s2 / self.n_dim
        return 0.5 * eps * s2


@dataclass
class StepCounters:
    steps: int = 0
    substeps: int = 0
    separations: int = 0
    reorders: int = 0

    def merge(self, other):
        self.steps += other.steps
        self.substeps += other.substeps
        self.separations += other.separations
        self.reorders += other.reorders

    def as_dict(self):
        return {
            "steps": self.steps,
            "substeps": self.substeps,
            "separations": self.separations,
            "reorders": self.reorders,
        }


@dataclass
class GasStreams:
    """Per-replica random streams plus the counters of one simulation."""

    noise: NoiseBlock
    refine: np.random.Generator
    schedule: np.random.Generator
    counters: StepCounters = field(default_factory=StepCounters)

    @classmethod
    def for_config(cls, cfg, counters=None):
        return cls(
            noise=NoiseBlock(stream(cfg.seed, "noise", cfg.replica), cfg.n_dim),
            refine=stream(cfg.seed, "refine", cfg.replica),
            schedule=stream(cfg.seed, "schedule", cfg.replica),
            counters=counters if counters is not None else StepCounters(),
        )


def _drift(lam, coupling):
    out = -0.5 * lam
    if coupling == 0.0 or len(lam) < 2:
        return out
    diff = lam[:, None] - lam[None, :]
    np.fill_diagonal(diff, np.inf)
    if np.any(diff == 0.0):
        raise SingularityError("two particles coincide")
    return out + coupling * np.sum(1.0 / diff, axis=1)


def drift(state, coupling):
    """-lambda_i/2 + coupling * sum_{j != i} 1/(lambda_i - lambda_j)."""
    lam = state.lambdas if isinstance(state, GasState) else np.asarray(state, dtype=float)
    return _drift(lam, coupling)


def _separate(lam, g_min, counters):
    """Push apart, symmetrically about their midpoint, pairs closer than g_min."""
    for _ in range(len(lam)):
        close = np.flatnonzero(np.diff(lam) < g_min)
        if len(close) == 0:
            return lam
        lam = lam.copy()
        for i in close:
            mid = 0.5 * (lam[i] + lam[i + 1])
            lam[i], lam[i + 1] = mid - 0.5 * g_min, mid + 0.5 * g_min
            counters.separations += 1
    return lam


def _local_gaps(lam):
    gaps = np.diff(lam)
    left = np.concatenate(([np.inf], gaps))
    right = np.concatenate((gaps, [np.inf]))
    return np.minimum(left, right)


def _advance(lam, coupling, h, dw, sigma, streams, depth):
    counters = streams.counters
    lam = _separate(lam, GUARD_GAP * sigma, counters)
    f = _drift(lam, coupling)
    if coupling != 0.0 and depth < MAX_HALVINGS and len(lam) > 1:
        if np.any(np.abs(f) * h > GAP_FRACTION * _local_gaps(lam)):
            # Brownian bridge: W(h/2) | W(h) = dw has mean dw/2 and variance sigma^2 h/4
            w1 = 0.5 * dw + 0.5 * sigma * math.sqrt(h) * streams.refine.standard_normal(len(lam))
            counters.substeps += 1
            lam = _advance(lam, coupling, 0.5 * h, w1, sigma, streams, depth + 1)
            return _advance(lam, coupling, 0.5 * h, dw - w1, sigma, streams, depth + 1)
    new = lam + f * h + dw
    if np.any(np.diff(new) < 0):
        counters.reorders += 1
        new.sort()
    return new


def step(state, cfg, streams, eps=1.0):
    """One global Euler-Maruyama step of length cfg.dt; eps gates the interaction."""
    dw = cfg.sigma * math.sqrt(cfg.dt) * streams.noise.next()
    lam = _advance(state.lambdas, cfg.coupling(eps), cfg.dt, dw, cfg.sigma, streams, 0)
    streams.counters.steps += 1
    return GasState(lam, state.t + cfg.dt)


def initial_state(cfg):
    """Sorted independent N(0, sigma^2) draws from the "init" stream."""
    rng = stream(cfg.seed, "init", cfg.replica)
    return GasState(np.sort(cfg.sigma * rng.standard_normal(cfg.n_dim)), 0.0)


def simulate(cfg, initial=None, verbose=False, counters=None):
    """Burn in, then record n_samples spectra every sample_stride time units."""
    cfg.validate()
    streams = GasStreams.for_config(cfg, counters)
    state = initial if initial is not None else initial_state(cfg)
    if len(state.lambdas) != cfg.n_dim:
        raise ConfigError("initial", f"expected {cfg.n_dim} particles, got {len(state.lambdas)}")
    t0 = state.t
    burn, stride = cfg.burn_in_steps, cfg.stride_steps
    total = burn + cfg.n_samples * stride
    interval = cfg.interval_steps if cfg.mode == "switched" else 0

    samples = []
    eps = 1.0
    for k in range(total):
        if interval and k % interval == 0:
            eps = 1.0 if streams.schedule.random() < cfg.p else 0.0
        state = step(state, cfg, streams, eps)
        state = GasState(state.lambdas, t0 + (k + 1) * cfg.dt)
        if k + 1 == burn and verbose:
            console.log(f"🔥 burn-in finished at t={state.t:g}")
        if k + 1 > burn and (k + 1 - burn) % stride == 0:
            samples.append(SpectrumSample(t=state.t, lambdas=state.lambdas.copy()))
    if verbose:
        console.log(f"🎲 replica {cfg.replica}: {len(samples)} samples, {streams.counters.as_dict()}")
    return samples


def _run_replica(cfg, verbose):
    counters = StepCounters()
    return simulate(cfg, verbose=verbose, counters=counters), counters


def simulate_replicas(cfg, replicas, n_jobs=1, verbose=False, counters=None):
    """Independent replicas (stream id = replica index), concatenated in replica order."""
    if replicas < 1:
        raise ConfigError("replicas", f"must be >= 1, got {replicas}")
    cfg.validate()
    configs = [replace(cfg, replica=cfg.replica + r) for r in range(replicas)]
    results = Parallel(n_jobs=n_jobs, prefer="threads")(delayed(_run_replica)(c, verbose) for c in configs)
    samples = []
    for replica_samples, replica_counters in results:
        samples.extend(replica_samples)
        if counters is not None:
            counters.merge(replica_counters)
    return samples


def stieltjes_sample(state, z):
    """G(z) = (1/N) sum 1/(lambda_i - z) for one configuration."""
    z = complex(z)
    if z.imag == 0:
        raise DomainError("z must lie off the real axis")
    lam = state.lambdas if isinstance(state, (GasState, SpectrumSample)) else np.asarray(state, dtype=float)
    return complex(np.mean(1.0 / (lam - z)))
