"""Statistics over ensembles of spectra: histograms, spacings, moments, goodness of fit."""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats
from scipy.special import gammaln

from density import DensityCurve
from errors import DomainError, EmptySampleError

DEFAULT_JACKKNIFE_BLOCKS = 64
MIN_EXPECTED_PER_BIN = 20.0
MIN_HISTOGRAM_BINS = 10


@dataclass(frozen=True)
class SpectrumSample:
    t: float
    lambdas: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        if lam.ndim != 1:
            raise DomainError("a spectrum is a 1-D array of eigenvalues")
        if np.any(np.diff(lam) < 0):
            raise DomainError("spectrum must be sorted ascending")
        object.__setattr__(self, "lambdas", lam)

    @property
    def n_dim(self):
        return len(self.lambdas)


@dataclass(frozen=True)
class SpacingSet:
    """Unfolded nearest-neighbour spacings, rescaled to mean 1."""

    spacings: np.ndarray
    dropped: int = 0
    bulk_fraction: float = 0.5
    n_samples: int = 0
    unfolding: str = "none"

    def metadata(self):
        return {
            "count": int(len(self.spacings)),
            "dropped": int(self.dropped),
            "bulk_fraction": self.bulk_fraction,
            "n_samples": int(self.n_samples),
            "unfolding": self.unfolding,
        }

    def to_csv(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(path, self.spacings, header="s", comments="", fmt="%.17g")
        path.with_suffix(".meta.json").write_text(json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n")


@dataclass(frozen=True)
class MomentEstimate:
    value: float
    stderr: float
    n_blocks: int


@dataclass(frozen=True)
class GofResult:
    statistic: float
    pvalue: float
    dof: int


@dataclass(frozen=True)
class HaarReport:
    mean: float
    stderr: float
    expected_mean: float
    ks: float
    ks_max: float
    passed: bool = field(init=False)

    def __post_init__(self):
        ok = abs(self.mean - self.expected_mean) <= 3.0 * self.stderr and self.ks <= self.ks_max
        object.__setattr__(self, "passed", bool(ok))


def _pool(samples):
    if not samples:
        raise EmptySampleError("no spectra given")
    return np.concatenate([s.lambdas for s in samples])


def histogram(samples, bins, range):
    """Density histogram over [lo, hi) with left-closed bins (the last bin also holds hi).

    Values outside the range are ignored; the bin heights sum to 1/width.
    """
    lo, hi = range
    if bins < MIN_HISTOGRAM_BINS:
        raise DomainError(f"bins must be >= {MIN_HISTOGRAM_BINS}, got {bins}")
    if not hi > lo:
        raise DomainError(f"degenerate histogram range [{lo}, {hi}]")
    data = _pool(samples)
    inside = data[(data >= lo) & (data <= hi)]
    if len(inside) == 0:
        raise EmptySampleError(f"no eigenvalue falls in [{lo}, {hi}]")
    heights, edges = np.histogram(inside, bins=bins, range=(lo, hi), density=True)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return DensityCurve(centers, heights)


def nns(samples, bulk_fraction=0.5, model=None):
    """Nearest-neighbour spacings from the central bulk of every spectrum.

    With a density model each spacing is divided by the local mean spacing
    1/(N rho(midpoint)); without one only the global rescaling applies.
    Pass DensityModel("corrected", beta=..., n_dim=..., sigma=...) to unfold
    by the finite-N density, as the CLI does for any --beta below 2.
    Non-positive unfolded spacings are dropped and counted.
    """
    if not 0 < bulk_fraction <= 1:
        raise DomainError(f"bulk_fraction must be in (0, 1], got {bulk_fraction}")
    if not samples:
        raise EmptySampleError("no spectra given")
    pooled = []
    dropped = 0
    for sample in samples:
        lam = sample.lambdas
        n = len(lam)
        if n < 4:
            raise DomainError(f"spacing statistics need N >= 4, got {n}")
        keep = max(2, int(round(bulk_fraction * n)))
        start = (n - keep) // 2
        bulk = lam[start : start + keep]
        s = np.diff(bulk)
        if model is not None:
            mid = 0.5 * (bulk[:-1] + bulk[1:])
            s = s * n * np.asarray(model.evaluate(mid), dtype=float)
        good = s > 0
        dropped += int(np.count_nonzero(~good))
        pooled.append(s[good])
    spacings = np.concatenate(pooled)
    if len(spacings) == 0:
        raise EmptySampleError("every spacing was dropped")
    spacings = spacings / spacings.mean()
    return SpacingSet(
        spacings=spacings,
        dropped=dropped,
        bulk_fraction=bulk_fraction,
        n_samples=len(samples),
        unfolding=model.kind if model is not None else "none",
    )


def surmise_constants(beta):
    """(a, b) with a s^beta e^{-b s^2} normalised to unit mass and unit mean."""
    if not beta > 0:
        raise DomainError(f"Wigner surmise needs beta > 0, got {beta}")
    g1 = float(gammaln(0.5 * (beta + 1.0)))
    b = math.exp(2.0 * (float(gammaln(0.5 * (beta + 2.0))) - g1))
    a = 2.0 * math.exp(0.5 * (beta + 1.0) * math.log(b) - g1)
    return a, b


def wigner_surmise(beta, s):
    a, b = surmise_constants(beta)
    x = np.asarray(s, dtype=float)
    if np.any(x < 0):
        raise DomainError("spacings must be non-negative")
    out = a * x**beta * np.exp(-b * x * x)
    return float(out) if np.ndim(s) == 0 else out


def wigner_surmise_cdf(beta, s):
    """CDF of the surmise: the regularised lower incomplete gamma P((beta+1)/2, b s^2)."""
    _, b = surmise_constants(beta)
    x = np.asarray(s, dtype=float)
    out = stats.gamma.cdf(b * np.clip(x, 0.0, None) ** 2, 0.5 * (beta + 1.0))
    return float(out) if np.ndim(s) == 0 else out


def ks_distance(data, cdf):
    """One-sample Kolmogorov-Smirnov statistic sup |F_n - cdf|."""
    x = np.asarray(data, dtype=float).ravel()
    if len(x) == 0:
        raise EmptySampleError("KS distance over no data")
    return float(stats.kstest(x, cdf).statistic)


def moment(samples, k, n_blocks=None):
    """Pooled k-th moment of the eigenvalues with a blocked jackknife error.

    Blocks are contiguous runs of samples, so time-correlated streams are
    handled as long as a block spans several correlation times.
    """
    if k < 1:
        raise DomainError(f"moment order must be >= 1, got {k}")
    if not samples:
        raise EmptySampleError("no spectra given")
    sums = np.array([np.sum(s.lambdas**k) for s in samples])
    counts = np.array([len(s.lambdas) for s in samples], dtype=float)
    total_s, total_c = sums.sum(), counts.sum()
    if total_c == 0:
        raise EmptySampleError("spectra hold no eigenvalues")
    value = float(total_s / total_c)

    blocks = min(len(samples), n_blocks or DEFAULT_JACKKNIFE_BLOCKS)
    if blocks < 2:
        return MomentEstimate(value, math.nan, blocks)
    parts = np.array_split(np.arange(len(samples)), blocks)
    block_s = np.array([sums[p].sum() for p in parts])
    block_c = np.array([counts[p].sum() for p in parts])
    loo = (total_s - block_s) / (total_c - block_c)
    se = math.sqrt((blocks - 1) / blocks * np.sum((loo - loo.mean()) ** 2))
    return MomentEstimate(value, se, blocks)


def small_s_exponent(spacings, lo=0.05, hi=0.3):
    """Estimate beta from P(s) ~ s^beta: log-log slope of the empirical CDF, minus one."""
    s = np.sort(np.asarray(getattr(spacings, "spacings", spacings), dtype=float))
    if len(s) == 0:
        raise EmptySampleError("no spacings given")
    ecdf = np.arange(1, len(s) + 1) / len(s)
    window = (s >= lo) & (s <= hi)
    if np.count_nonzero(window) < 2:
        raise EmptySampleError(f"fewer than two spacings in [{lo}, {hi}]")
    slope, _ = np.polyfit(np.log(s[window]), np.log(ecdf[window]), 1)
    return float(slope - 1.0)


def _merge_small_bins(observed, expected, minimum):
    obs_out, exp_out = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(observed, expected):
        o_acc += o
        e_acc += e
        if e_acc >= minimum:
            obs_out.append(o_acc)
            exp_out.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0 and exp_out:
        obs_out[-1] += o_acc
        exp_out[-1] += e_acc
    return np.array(obs_out), np.array(exp_out)


def chi2_gof(data, cdf, bins, range):
    """Pearson chi-square of binned data against a CDF; sparse bins are merged to >= 20 expected."""
    lo, hi = range
    x = np.asarray(data, dtype=float).ravel()
    x = x[(x >= lo) & (x <= hi)]
    if len(x) == 0:
        raise EmptySampleError(f"no data in [{lo}, {hi}]")
    observed, edges = np.histogram(x, bins=bins, range=(lo, hi))
    probs = np.diff(np.asarray(cdf(edges), dtype=float))
    if probs.sum() <= 0:
        raise DomainError("reference CDF puts no mass on the histogram range")
    expected = len(x) * probs / probs.sum()
    obs, exp = _merge_small_bins(observed.astype(float), expected, MIN_EXPECTED_PER_BIN)
    if len(obs) < 2:
        raise EmptySampleError("too few counts for a chi-square test")
    result = stats.chisquare(obs, exp)
    return GofResult(float(result.statistic), float(result.pvalue), len(obs) - 1)


def haar_test(overlaps, n_dim, ks_max=0.05):
    """Squared overlaps (v.e)^2 against Haar: mean 1/N and the Beta(1/2, (N-1)/2) law."""
    if n_dim < 2:
        raise DomainError("the overlap law needs N >= 2")
    x = np.asarray(overlaps, dtype=float)
    if len(x) < 2:
        raise EmptySampleError("need at least two overlaps")
    law = stats.beta(0.5, 0.5 * (n_dim - 1))
    return HaarReport(
        mean=float(x.mean()),
        stderr=float(x.std(ddof=1) / math.sqrt(len(x))),
        expected_mean=1.0 / n_dim,
        ks=ks_distance(x, law.cdf),
        ks_max=ks_max,
    )


def spacing_histogram(spacing_set, bins=40, s_max=4.0):
    """P(s) on [0, s_max) normalised over all spacings, not just those in range."""
    s = spacing_set.spacings
    counts, edges = np.histogram(s, bins=bins, range=(0.0, s_max))
    width = edges[1] - edges[0]
    centers = 0.5 * (edges[:-1] + edges[1:])
    return DensityCurve(centers, counts / (len(s) * width))


def write_samples_csv(samples, path):
    """One row per sample: t, lambda_1 .. lambda_N."""
    if not samples:
        raise EmptySampleError("no spectra to write")
    n = samples[0].n_dim
    header = ",".join(["t"] + [f"lambda_{i + 1}" for i in range(n)])
    rows = np.array([np.concatenate(([s.t], s.lambdas)) for s in samples])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, rows, delimiter=",", header=header, comments="", fmt="%.17g")


def read_samples_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] == 0:
        raise EmptySampleError(f"{path} holds no samples")
    return [SpectrumSample(t=float(row[0]), lambdas=row[1:]) for row in data]


def write_samples_json(samples, path, metadata=None):
    payload = {
        "metadata": metadata or {},
        "samples": [{"t": s.t, "lambdas": s.lambdas.tolist()} for s in samples],
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload) + "\n")


def read_samples_json(path):
    payload = json.loads(Path(path).read_text())
    return [SpectrumSample(t=float(s["t"]), lambdas=np.asarray(s["lambdas"])) for s in payload["samples"]]
