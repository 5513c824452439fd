"""Self-checks behind `cli verify`.

Each suite returns a list of Check records. The deterministic suites run in
seconds; the simulation suites take minutes at their default sizes.
"""

import math
from dataclasses import dataclass

import numpy as np
from rich.table import Table
from scipy.integrate import quad

import density
import eigen_sde
import matrix_process
import spectral_stats
import special_fn
from eigen_sde import SdeConfig
from matrix_process import MatrixConfig
from spectral_stats import SpectrumSample

LATTICE_C = (0.25, 0.5, 1.0, 2.0, 5.0, 10.0)
LATTICE_LAMBDA = (0.0, 0.5, 1.0, 2.0, 5.0)
RESIDUAL_POINTS = (1.5j, 2.0 + 1.5j, -1.0 + 2.0j)


@dataclass(frozen=True)
class Check:
    name: str
    expected: float
    measured: float
    tolerance: float
    passed: bool
    detail: str = ""


def within(name, expected, measured, tolerance, detail=""):
    ok = math.isfinite(measured) and abs(measured - expected) <= tolerance
    return Check(name, float(expected), float(measured), float(tolerance), bool(ok), detail)


def at_most(name, measured, bound, detail=""):
    return Check(name, 0.0, float(measured), float(bound), bool(measured <= bound), detail)


def above(name, measured, bound, detail=""):
    """Negative controls: passes when the statistic exceeds its bound."""
    return Check(name, float(bound), float(measured), 0.0, bool(measured > bound), detail)


def special_suite(**_):
    checks = []
    worst = 0.0
    for c in LATTICE_C:
        ode = special_fn.log_abs2(c, np.array(LATTICE_LAMBDA))
        quadr = np.array([2.0 * math.log(abs(special_fn.pcf_quadrature(c, x))) for x in LATTICE_LAMBDA])
        worst = max(worst, float(np.max(np.abs(ode - quadr))))
    checks.append(at_most("quadrature vs ODE lattice", worst, 1e-7))

    grid = np.linspace(0.0, 10.0, 101)
    drift = max(special_fn.wronskian_drift(c, grid) for c in (0.5, 1.0, 2.0, 5.0))
    checks.append(at_most("Wronskian drift", drift, 1e-8))

    lam = np.linspace(-10.0, 10.0, 41)
    gap = float(np.max(np.abs(special_fn.log_abs2(0.0, lam) - 0.5 * lam**2)))
    checks.append(at_most("c=0 closed form", gap, 1e-9))

    checks.append(within("D_-1(0)", math.sqrt(0.5 * math.pi), special_fn.pcf_quadrature(1.0, 0.0).real, 1e-9))
    neg = special_fn.pcf_negative_order(-0.5, 1.0)
    ode = special_fn.log_abs2(-0.5, 1.0)
    checks.append(within("negative order recurrence vs ODE", float(ode), 2.0 * math.log(abs(neg)), 1e-8))
    return checks


def density_suite(cs=(0.0, 0.5, 1.0, 2.0, 4.0), **_):
    checks = []
    for c in cs:
        curve = density.tabulate(density.DensityModel("kerov", c=c))
        checks.append(within(f"c={c:g} normalisation", 1.0, curve.integral(), 1e-5))
        m2, m4 = density.kerov_moment(c, 2), density.kerov_moment(c, 4)
        checks.append(within(f"c={c:g} m2", m2, curve.moment(2), 1e-4 * m2))
        checks.append(within(f"c={c:g} m4", m4, curve.moment(4), 1e-3 * m4))
        checks.append(at_most(f"c={c:g} Stieltjes ODE residual", density.ode_residual(c, curve, RESIDUAL_POINTS), 5e-3))

    lam = np.linspace(-10.0, 10.0, 401)
    gap = float(np.max(np.abs(density.eval_kerov(0.0, lam) - density.eval_gaussian(1.0, lam))))
    checks.append(at_most("c=0 is the unit Gaussian", gap, 1e-8))

    c = 100.0
    u = np.linspace(-1.8 * math.sqrt(c), 1.8 * math.sqrt(c), 721)
    limit = density.eval_kerov_limit(c, u)
    sup = float(np.max(np.abs(density.eval_kerov(c, u) - limit)))
    checks.append(at_most("c=100 semicircle limit (sup / peak)", sup / float(limit.max()), 0.05))
    return checks


def tails_suite(cs=(1.0, 2.0, 3.0), **_):
    return [within(f"c={c:g} tail exponent", 2.0 * c, density.tail_exponent_check(c), 0.1) for c in cs]


def moments_suite(c=1.0, n_dim=20, n_samples=1000, seed=0, verbose=False, **_):
    """Crossover gas m2 against 1 + c (finite-N bias within 5%)."""
    cfg = SdeConfig(
        n_dim=n_dim,
        mode="crossover",
        c=c,
        dt=5e-3,
        burn_in=40.0,
        sample_stride=1.0,
        n_samples=n_samples,
        seed=seed,
    )
    samples = eigen_sde.simulate(cfg, verbose=verbose)
    m2 = spectral_stats.moment(samples, 2)
    expected = density.kerov_moment(c, 2)
    return [within("crossover m2", expected, m2.value, 0.05 * expected, f"SE {m2.stderr:.3g}")]


def _spacing_moment_exact(beta, k, sigma=1.0):
    """E[s^k] under the N=2 marginal s^beta e^{-s^2/(4 sigma^2)}."""

    def weight(s, power):
        return s**power * math.exp(-s * s / (4.0 * sigma**2))

    norm = quad(weight, 0.0, np.inf, args=(beta,))[0]
    return quad(weight, 0.0, np.inf, args=(beta + k,))[0] / norm


def small_n_suite(n_samples=4000, seed=0, verbose=False, **_):
    checks = []
    one = eigen_sde.simulate(
        SdeConfig(n_dim=1, beta=1.0, dt=1e-2, burn_in=20.0, sample_stride=1.0, n_samples=n_samples, seed=seed),
        verbose=verbose,
    )
    var = spectral_stats.moment(one, 2)
    checks.append(within("N=1 variance", 1.0, var.value, 3.0 * var.stderr, f"SE {var.stderr:.3g}"))

    two = eigen_sde.simulate(
        SdeConfig(n_dim=2, beta=1.0, dt=5e-3, burn_in=20.0, sample_stride=1.0, n_samples=n_samples, seed=seed + 1),
        verbose=verbose,
    )
    spacings = [SpectrumSample(s.t, np.diff(s.lambdas)) for s in two]
    for k in (1, 2):
        est = spectral_stats.moment(spacings, k)
        exact = _spacing_moment_exact(1.0, k)
        checks.append(within(f"N=2 E[s^{k}]", exact, est.value, 3.0 * est.stderr, f"SE {est.stderr:.3g}"))
    return checks


def equivalence_suite(n_dim=8, p=0.5, switch_rate=100, n_samples=2000, seed=0, eig_method="jacobi", verbose=False, **_):
    """Switched matrix process against the fixed-beta gas at beta = p."""
    run = matrix_process.simulate_switched(
        MatrixConfig(
            n_dim=n_dim,
            p=p,
            switch_rate=switch_rate,
            dt=1.0 / switch_rate,
            burn_in=40.0,
            sample_stride=1.0,
            n_samples=n_samples,
            seed=seed,
            eig_method=eig_method,
        ),
        verbose=verbose,
    )
    gas = eigen_sde.simulate(
        SdeConfig(n_dim=n_dim, beta=p, dt=1e-2, burn_in=40.0, sample_stride=1.0, n_samples=n_samples, seed=seed + 1),
        verbose=verbose,
    )
    checks = []
    for k in (2, 4):
        a = spectral_stats.moment(run.samples, k)
        b = spectral_stats.moment(gas, k)
        se = math.hypot(a.stderr, b.stderr)
        checks.append(within(f"m{k} matrix vs gas", b.value, a.value, 3.0 * se, f"SE {se:.3g}"))
    return checks


def haar_suite(n_dim=10, p=0.5, n_snapshots=1000, seed=0, eig_method="jacobi", verbose=False, **_):
    direction = np.zeros(n_dim)
    direction[0] = 1.0

    def overlaps(prob):
        run = matrix_process.simulate_switched(
            MatrixConfig(
                n_dim=n_dim,
                p=prob,
                dt=1e-2,
                burn_in=40.0,
                sample_stride=2.0,
                n_samples=n_snapshots,
                seed=seed,
                eig_method=eig_method,
                keep_vectors=True,
            ),
            verbose=verbose,
        )
        return matrix_process.haar_overlap_samples(run.snapshots, direction)

    report = spectral_stats.haar_test(overlaps(p), n_dim)
    frozen = spectral_stats.haar_test(overlaps(0.0), n_dim)
    return [
        within("overlap mean", 1.0 / n_dim, report.mean, 3.0 * report.stderr, f"SE {report.stderr:.3g}"),
        at_most("overlap KS vs Beta(1/2, (N-1)/2)", report.ks, 0.05),
        above("frozen basis KS (must fail)", frozen.ks, 0.05),
    ]


def fluctuation_suite(ns=(16, 32, 64), beta=0.5, n_samples=400, seed=0, verbose=False, **_):
    """Var G(2i sqrt(N)) against N on a log-log scale."""
    variances = []
    for n in ns:
        samples = eigen_sde.simulate(
            SdeConfig(n_dim=n, beta=beta, dt=1e-2, burn_in=40.0, sample_stride=2.0, n_samples=n_samples, seed=seed),
            verbose=verbose,
        )
        z = 2j * math.sqrt(n)
        g = np.array([eigen_sde.stieltjes_sample(s, z) for s in samples])
        variances.append(float(np.var(g)))
    slope, _ = np.polyfit(np.log(ns), np.log(variances), 1)
    return [within("Var G slope in N", -3.0, float(slope), 0.5)]


SUITES = {
    "special": special_suite,
    "density": density_suite,
    "tails": tails_suite,
    "moments": moments_suite,
    "small-n": small_n_suite,
    "equivalence": equivalence_suite,
    "haar": haar_suite,
    "fluctuation": fluctuation_suite,
}


def run_suite(name, **params):
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; expected one of {sorted(SUITES)}")
    return SUITES[name](**params)


def report_table(name, checks):
    table = Table(title=f"verify: {name}")
    table.add_column("check")
    table.add_column("expected", justify="right")
    table.add_column("measured", justify="right")
    table.add_column("tolerance", justify="right")
    table.add_column("", justify="center")
    table.add_column("detail")
    for ch in checks:
        mark = "[green]✅[/green]" if ch.passed else "[red]❌[/red]"
        table.add_row(ch.name, f"{ch.expected:.6g}", f"{ch.measured:.6g}", f"{ch.tolerance:.3g}", mark, ch.detail)
    return table
