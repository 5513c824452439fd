"""Closed-form spectral densities and their Stieltjes-transform checks.

gaussian    commuting-slice endpoint, rms sigma
semicircle  large-N Wigner law with edges at +-sigma*sqrt(2 beta N)
kerov       crossover family rho_c = 1 / (sqrt(2 pi) Gamma(1+c) |D_{-c}(i lambda)|^2)
corrected   finite-N correction to the semicircle, rho_c rescaled with
            alpha = 2/(2-beta), c = beta N/(2-beta)
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.special import gammaln

from errors import DomainError
from special_fn import log_abs2, pcf_log_start

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
DEFAULT_GRID_POINTS = 2001

DensityKind = Literal["gaussian", "semicircle", "kerov", "corrected"]


def _out(lam, values):
    return float(values) if np.ndim(lam) == 0 else values


def eval_gaussian(sigma, lam):
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    x = np.asarray(lam, dtype=float)
    return _out(lam, np.exp(-0.5 * (x / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi)))


def semicircle_edge(beta, n_dim, sigma):
    return sigma * math.sqrt(2.0 * beta * n_dim)


def eval_semicircle(beta, n_dim, sigma, lam):
    """Wigner semicircle (1/(pi beta sigma^2 N)) sqrt(2 beta sigma^2 N - lambda^2)."""
    a = beta * n_dim * sigma**2
    if not a > 0:
        raise DomainError(f"beta*N*sigma^2 must be positive, got {a}")
    x = np.asarray(lam, dtype=float)
    inside = np.clip(2.0 * a - x**2, 0.0, None)
    return _out(lam, np.sqrt(inside) / (math.pi * a))


def log_kerov(c, lam):
    if not c > -1:
        raise DomainError(f"kerov density needs c > -1, got {c}")
    return -log_abs2(c, lam) - float(gammaln(1.0 + c)) - LOG_SQRT_2PI


def eval_kerov(c, lam):
    """rho_c(lambda); c in (-1, 0] uses the continuation of D_{-c}."""
    return _out(lam, np.exp(log_kerov(c, lam)))


def eval_kerov_wronskian(c, lam):
    """rho_c from the inversion formula -W / (c pi |y|^2) with the constant Wronskian W."""
    if c == 0:
        raise DomainError("the Wronskian form is 0/0 at c = 0; use eval_kerov")
    # W = Im(conj(y) y') at lambda = 0 is D(0)^2 times the log-slope
    ell0, ratio = pcf_log_start(float(c))
    return _out(lam, -ratio / (c * math.pi) * np.exp(2.0 * ell0 - log_abs2(c, lam)))


def eval_kerov_limit(c, lam):
    """Large-c semicircle (1/(2 pi c)) sqrt(4c - lambda^2)."""
    if not c > 0:
        raise DomainError(f"semicircle limit needs c > 0, got {c}")
    x = np.asarray(lam, dtype=float)
    return _out(lam, np.sqrt(np.clip(4.0 * c - x**2, 0.0, None)) / (2.0 * math.pi * c))


def corrected_parameters(beta, n_dim):
    """(alpha, c) = (2/(2-beta), beta N/(2-beta))."""
    if not 0 <= beta < 2:
        raise DomainError(f"corrected density needs 0 <= beta < 2, got {beta}")
    if n_dim < 1:
        raise DomainError(f"N must be >= 1, got {n_dim}")
    return 2.0 / (2.0 - beta), beta * n_dim / (2.0 - beta)


def eval_corrected(beta, n_dim, sigma, lam):
    """Finite-N density sqrt(alpha)/sigma * rho_c(sqrt(alpha) lambda / sigma)."""
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    alpha, c = corrected_parameters(beta, n_dim)
    x = np.asarray(lam, dtype=float)
    scale = math.sqrt(alpha) / sigma
    return _out(lam, scale * np.exp(log_kerov(c, scale * x)))


@dataclass(frozen=True)
class DensityModel:
    kind: DensityKind
    beta: float | None = None
    n_dim: int | None = None
    sigma: float = 1.0
    c: float | None = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "semicircle", "kerov", "corrected"):
            raise DomainError(f"unknown density kind {self.kind!r}")
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if self.kind in ("semicircle", "corrected"):
            if self.beta is None or self.n_dim is None:
                raise DomainError(f"{self.kind} density needs beta and n_dim")
            if self.kind == "semicircle" and not 0 < self.beta <= 2:
                raise DomainError(f"semicircle needs 0 < beta <= 2, got {self.beta}")
            if self.kind == "corrected":
                corrected_parameters(self.beta, self.n_dim)
        if self.kind == "kerov" and (self.c is None or not self.c > -1):
            raise DomainError(f"kerov density needs c > -1, got {self.c}")

    @property
    def alpha(self):
        return corrected_parameters(self.beta, self.n_dim)[0]

    @property
    def crossover_c(self):
        """The order of D_{-c} behind this model (recomputed, never stored)."""
        if self.kind == "kerov":
            return self.c
        if self.kind == "corrected":
            return corrected_parameters(self.beta, self.n_dim)[1]
        return 0.0 if self.kind == "gaussian" else math.inf

    def evaluate(self, lam):
        if self.kind == "gaussian":
            return eval_gaussian(self.sigma, lam)
        if self.kind == "semicircle":
            return eval_semicircle(self.beta, self.n_dim, self.sigma, lam)
        if self.kind == "kerov":
            return eval_kerov(self.c, lam)
        return eval_corrected(self.beta, self.n_dim, self.sigma, lam)

    def half_width(self):
        """Half-width L of the default grid; covers the support to ~1e-12 mass."""
        if self.kind == "gaussian":
            return 10.0 * self.sigma
        if self.kind == "semicircle":
            return semicircle_edge(self.beta, self.n_dim, self.sigma)
        c = self.crossover_c
        width = max(10.0, 4.0 * math.sqrt(1.0 + c))
        if self.kind == "corrected":
            width *= self.sigma / math.sqrt(self.alpha)
        return width


@dataclass(frozen=True)
class DensityCurve:
    lambda_grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.lambda_grid, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != vals.shape:
            raise DomainError("grid and values must be 1-D arrays of equal length")
        if np.any(np.diff(grid) <= 0):
            raise DomainError("lambda grid must be strictly ascending")
        if np.any(vals < 0):
            raise DomainError("density values must be non-negative")
        object.__setattr__(self, "lambda_grid", grid)
        object.__setattr__(self, "values", vals)

    def integral(self):
        return float(trapezoid(self.values, self.lambda_grid))

    def moment(self, k):
        return float(trapezoid(self.values * self.lambda_grid**k, self.lambda_grid))

    def cdf(self):
        """Callable CDF from the cumulative trapezoid, normalised to end at 1."""
        cum = cumulative_trapezoid(self.values, self.lambda_grid, initial=0.0)
        cum = cum / cum[-1]
        grid = self.lambda_grid

        def f(x):
            return np.interp(x, grid, cum, left=0.0, right=1.0)

        return f

    def to_csv(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(
            path,
            np.column_stack([self.lambda_grid, self.values]),
            delimiter=",",
            header="lambda,value",
            comments="",
            fmt="%.17g",
        )

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1])


def tabulate(model, grid=None, count=DEFAULT_GRID_POINTS):
    if grid is None:
        half = model.half_width()
        grid = np.linspace(-half, half, count)
    grid = np.asarray(grid, dtype=float)
    return DensityCurve(grid, np.asarray(model.evaluate(grid), dtype=float))


def _check_off_axis(z, min_im=0.0):
    z = complex(z)
    if abs(z.imag) <= min_im:
        raise DomainError(f"z must satisfy |Im z| > {min_im}, got {z}")
    return z


def stieltjes_numeric(curve, z):
    """Trapezoid approximation of G(z) = int rho(lambda) / (lambda - z) d lambda."""
    z = _check_off_axis(z)
    return complex(trapezoid(curve.values / (curve.lambda_grid - z), curve.lambda_grid))


def _centered_derivative(curve, z):
    h = 1e-4 * abs(z)
    return (stieltjes_numeric(curve, z + h) - stieltjes_numeric(curve, z - h)) / (2.0 * h)


def ode_residual(c, curve, z_samples):
    """max |c G^2 + z G + G' + 1| over the samples; zero for the exact rho_c."""
    worst = 0.0
    for z in z_samples:
        z = complex(z)
        if abs(z.imag) < 0.5:
            raise DomainError(f"residual samples need |Im z| >= 0.5, got {z}")
        g = stieltjes_numeric(curve, z)
        dg = _centered_derivative(curve, z)
        worst = max(worst, abs(c * g * g + z * g + dg + 1.0))
    return worst


def stieltjes_semicircle(beta, n_dim, sigma, z):
    """Closed-form G for the semicircle: (sqrt(z^2 - 2a) - z)/a, a = beta sigma^2 N."""
    z = _check_off_axis(z)
    a = beta * sigma**2 * n_dim
    edge = math.sqrt(2.0 * a)
    # product of principal roots puts the cut on [-edge, edge], so G ~ -1/z
    s = np.sqrt(complex(z - edge)) * np.sqrt(complex(z + edge))
    return complex((s - z) / a)


def semicircle_residual(beta, n_dim, sigma, curve, z_samples):
    """max |beta sigma^2 N G^2 / 2 + z G + 1| with G from the tabulated curve."""
    a = beta * sigma**2 * n_dim
    worst = 0.0
    for z in z_samples:
        g = stieltjes_numeric(curve, z)
        worst = max(worst, abs(0.5 * a * g * g + complex(z) * g + 1.0))
    return worst


def kerov_moment(c, k):
    """Even moments of rho_c from the large-z expansion G = -sum m_k z^{-k-1}.

    Matching powers in c G^2 + z G + G' = -1 gives
        m_{k+2} = (k+1) m_k + c * sum_{j=0..k} m_j m_{k-j},   m_0 = 1, odd m = 0,
    of which only m_2 and m_4 are exposed.
    """
    if k == 2:
        return 1.0 + c
    if k == 4:
        return (1.0 + c) * (2.0 * c + 3.0)
    raise DomainError(f"kerov_moment supports k in {{2, 4}}, got {k}")


def tail_exponent_check(c, u_min=8.0, u_max=12.0, points=41):
    """Fitted exponent k in rho_c(u) ~ u^k e^{-u^2/2}.

    ln[rho_c e^{u^2/2}] is fitted on (1, ln u, u^-2); the u^-2 column absorbs
    the c(c+1)/u^2 correction of the asymptotic series.
    """
    u = np.linspace(u_min, u_max, points)
    y = log_kerov(c, u) + 0.5 * u**2
    design = np.column_stack([np.ones_like(u), np.log(u), u**-2])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return float(coef[1])
