"""Parabolic cylinder function D_{-c}(i*lambda) on the real lambda line.

Two independent evaluations:

* pcf_quadrature   integral representation
                   D_{-c}(z) = e^{-z^2/4}/Gamma(c) * int_0^inf e^{-zx - x^2/2} x^{c-1} dx
* pcf_weber_ode    integration of the Weber equation y'' + (c - 1/2 - z^2/4) y = 0
                   in log-amplitude form, so |y|^2 ~ e^{lambda^2/2} never overflows

and pcf_negative_order for c in (-1, 0], where the integral representation
does not hold, via the three-term recurrence.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.special import gammaln

from errors import AccuracyError, DomainError, StepSizeError

C_MAX_QUAD = 60.0
ODE_RTOL = 1e-10
ODE_ATOL = 1e-12

# e^-745 is below the smallest subnormal double
_TAIL_LOG_DROP = 745.0
_MAX_LOG_DOUBLE = 709.0
_QUAD_EPSREL = 1e-12
_QUAD_EPSABS = 1e-14


@dataclass(frozen=True)
class PcfEval:
    c: float
    lam: float
    log_abs2: float
    phase: float | None = None  # only the quadrature path knows it


@dataclass(frozen=True)
class WeberState:
    """y(lambda) = D_{-c}(i*lambda) and its derivative, split into real and imaginary parts."""

    lam: float
    y_re: float
    y_im: float
    dy_re: float
    dy_im: float

    @property
    def wronskian(self):
        # y2' y1 - y2 y1', constant along any solution
        return self.dy_im * self.y_re - self.y_im * self.dy_re


def gamma_ln(x):
    """ln Gamma(x) for x > 0."""
    if not x > 0:
        raise DomainError(f"gamma_ln needs x > 0, got {x}")
    return float(gammaln(x))


def _quad(f, lo, hi, points=None):
    res = quad(
        f,
        lo,
        hi,
        points=points,
        epsabs=_QUAD_EPSABS,
        epsrel=_QUAD_EPSREL,
        limit=400,
        full_output=1,
    )
    value, err = res[0], res[1]
    if len(res) > 3 and err > 1e-10 * abs(value) + 1e-13:
        raise AccuracyError(f"quadrature on [{lo}, {hi}] did not converge: {res[3]}")
    if not math.isfinite(value):
        raise AccuracyError(f"quadrature on [{lo}, {hi}] returned {value}")
    return value


def _log_peak(log_f, lo, hi):
    grid = np.linspace(lo, hi, 513)[1:]
    with np.errstate(divide="ignore"):
        vals = log_f(grid)
    return float(np.max(vals[np.isfinite(vals)]))


def _scaled_segment(log_mod, phase, lo, hi, points=None):
    """int_lo^hi exp(log_mod + i*phase) as (shift, value), integral = e^shift * value."""
    if hi <= lo:
        return 0.0, 0j
    shift = _log_peak(log_mod, lo, hi)

    def re(x):
        return math.exp(log_mod(x) - shift) * math.cos(phase(x))

    def im(x):
        return math.exp(log_mod(x) - shift) * math.sin(phase(x))

    pts = None
    if points:
        pts = [p for p in points if lo < p < hi] or None
    value = complex(_quad(re, lo, hi, pts), _quad(im, lo, hi, pts))
    return shift, value


def _power_segment(c, log_g, phase, b):
    """int_0^b x^{c-1} g(x) dx with g = exp(log_g + i*phase); x = u^{1/c} when c < 1."""
    if b <= 0:
        return 0.0, 0j
    if c < 1:
        inv = 1.0 / c

        def log_mod(u):
            return log_g(np.asarray(u) ** inv) - math.log(c)

        def ph(u):
            return phase(u**inv)

        return _scaled_segment(log_mod, ph, 0.0, b**c)

    def log_mod(x):
        with np.errstate(divide="ignore"):
            return (c - 1) * np.log(x) + log_g(x)

    return _scaled_segment(log_mod, phase, 0.0, b)


def _combine(parts):
    shift = max(s for s, v in parts if v != 0)
    return shift, sum(v * math.exp(s - shift) for s, v in parts if v != 0)


def _tail_end(peak):
    # beyond its peak each log-integrand is concave with curvature <= -1
    return peak + math.sqrt(2.0 * _TAIL_LOG_DROP)


def _log_integral_zero(c):
    """ln int_0^inf x^{c-1} e^{-x^2/2} dx for c > 0, max-subtracted."""

    def log_g(x):
        return -0.5 * np.asarray(x) ** 2

    def zero(x):
        return 0.0

    head = _power_segment(c, log_g, zero, 1.0)
    peak = math.sqrt(max(c - 1.0, 1.0))

    def log_mod(x):
        return (c - 1) * np.log(x) - 0.5 * np.asarray(x) ** 2

    tail = _scaled_segment(log_mod, zero, 1.0, _tail_end(peak), points=[peak])
    shift, value = _combine([head, tail])
    return shift + math.log(value.real)


def _shifted_integral(c, lam):
    """int_0^inf x^{c-1} e^{-x^2/2 - i lam x} dx for lam > 0 as (shift, value).

    The path runs 0 -> -i*lam -> -i*lam + inf: on the vertical leg the phase is
    the constant e^{-i pi c/2}, on the horizontal leg the Gaussian factor is
    e^{-t^2/2 - lam^2/2}. Neither leg oscillates, so nothing cancels.
    """
    # vertical leg, x = -i s
    def log_v(s):
        s = np.asarray(s)
        return 0.5 * s**2 - lam * s

    def zero(s):
        return 0.0

    b = min(1.0, lam)
    legs = [_power_segment(c, log_v, zero, b)]
    if lam > b:

        def log_mod_v(s):
            with np.errstate(divide="ignore"):
                return (c - 1) * np.log(s) + log_v(s)

        s_peak = (c - 1) / lam if c > 1 else b
        legs.append(_scaled_segment(log_mod_v, zero, b, lam, points=[s_peak]))
    v_shift, v_val = _combine(legs)
    v_val *= complex(math.cos(-0.5 * math.pi * c), math.sin(-0.5 * math.pi * c))

    # horizontal leg, x = t - i lam
    def log_h(t):
        t = np.asarray(t)
        return 0.5 * (c - 1) * np.log(t**2 + lam**2) - 0.5 * t**2 - 0.5 * lam**2

    def phase_h(t):
        return (c - 1) * math.atan2(-lam, t)

    t_peak = math.sqrt(c - 1 - lam**2) if c - 1 > lam**2 else 0.0
    end = _tail_end(max(t_peak, lam, 1.0))
    points = sorted({t_peak, min(lam, 1.0), lam})
    h = _scaled_segment(log_h, phase_h, 0.0, end, points=points)
    return _combine([(v_shift, v_val), h])


def pcf_quadrature(c, lam):
    """D_{-c}(i*lam) from the integral representation, 0 < c <= C_MAX_QUAD."""
    if not c > 0:
        raise DomainError(f"integral representation needs c > 0, got {c}")
    if c > C_MAX_QUAD:
        raise DomainError(f"c = {c} exceeds C_MAX_QUAD = {C_MAX_QUAD}; use pcf_weber_ode")
    if not math.isfinite(lam):
        raise DomainError(f"lambda must be finite, got {lam}")
    if lam < 0:
        # D is real on the real axis, so D(conj z) = conj D(z)
        return pcf_quadrature(c, -lam).conjugate()
    if lam == 0:
        return complex(math.exp(_log_integral_zero(c) - gamma_ln(c)), 0.0)
    shift, value = _shifted_integral(c, lam)
    log_scale = 0.25 * lam**2 - gamma_ln(c) + shift
    out = value * math.exp(log_scale)
    if not (math.isfinite(out.real) and math.isfinite(out.imag)):
        raise AccuracyError(f"D_-{c}(i*{lam}) overflowed; use pcf_weber_ode")
    return out


def pcf_quadrature_eval(c, lam):
    """pcf_quadrature packaged as a PcfEval with its phase."""
    d = pcf_quadrature(c, lam)
    return PcfEval(c=c, lam=lam, log_abs2=2.0 * math.log(abs(d)), phase=math.atan2(d.imag, d.real))


def pcf_negative_order(c, lam):
    """D_{-c}(i*lam) for c in (-1, 0] from D_{-c}(z) = z D_{-c-1}(z) + (c+1) D_{-c-2}(z)."""
    if not -1 < c <= 0:
        raise DomainError(f"pcf_negative_order needs c in (-1, 0], got {c}")
    z = complex(0.0, lam)
    return z * pcf_quadrature(c + 1, lam) + (c + 1) * pcf_quadrature(c + 2, lam)


def _value_and_slope_at_zero(a):
    """D_{-a}(0) and D'_{-a}(0) for small a > 0.

    The slope is the one-sided integral of the differentiated representation,
    D'_{-a}(0) = -int_0^inf x^a e^{-x^2/2} dx / Gamma(a).
    """
    lg = gamma_ln(a)
    value = math.exp(_log_integral_zero(a) - lg)
    slope = -math.exp(_log_integral_zero(a + 1) - lg)
    return value, slope


@lru_cache(maxsize=256)
def pcf_log_start(c):
    """(ln D_{-c}(0), D'_{-c}(0) / D_{-c}(0)) for c > -1.

    Stays in log form, so orders where D_{-c}(0) underflows (c ~ 300 and up)
    still give a finite start for the Weber integration.
    """
    if not c > -1:
        raise DomainError(f"order needs c > -1, got {c}")
    if c > 0:
        log_value = _log_integral_zero(c)
        return log_value - gamma_ln(c), -math.exp(_log_integral_zero(c + 1) - log_value)
    # differentiate the recurrence at z = 0
    v1, _ = _value_and_slope_at_zero(c + 1)
    v2, s2 = _value_and_slope_at_zero(c + 2)
    value = (c + 1) * v2
    if c == 0:
        # D_0(z) = e^{-z^2/4} is even; the two slope terms cancel exactly
        return math.log(value), 0.0
    return math.log(value), (v1 + (c + 1) * s2) / value


def pcf_derivative_at_zero(c):
    """(D_{-c}(0), D'_{-c}(0)) for c > -1; both underflow to 0 past c ~ 300."""
    log_value, ratio = pcf_log_start(c)
    value = math.exp(log_value)
    return value, ratio * value


def _weber_rhs(c, sign):
    # r = y'/y = a + i b obeys r' = q - r^2; b = sign * e^w never changes sign
    if sign == 0.0:

        def real_rhs(lam, s):
            a = s[0]
            return [0.25 * lam * lam + 0.5 - c - a * a, a]

        return real_rhs

    def rhs(lam, s):
        a, w = s[0], s[1]
        b = sign * math.exp(w)
        return [0.25 * lam * lam + 0.5 - c - a * a + b * b, -2.0 * a, a, b]

    return rhs


def _weber_trajectory(c, grid):
    """Integrate along an ascending grid starting at 0.

    Returns (ell, theta, a, b) arrays: y = e^{ell + i theta}, y'/y = a + i b.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0 or grid[0] != 0.0:
        raise DomainError("lambda grid must be one-dimensional and start at 0")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("lambda grid must be strictly ascending")
    if not c > -1:
        raise DomainError(f"order needs c > -1, got {c}")

    # y(0) = D(0), y'(0) = i D'(0)
    ell0, b0 = pcf_log_start(float(c))
    sign = math.copysign(1.0, b0) if b0 != 0.0 else 0.0
    rhs = _weber_rhs(float(c), sign)
    y0 = [0.0, ell0] if sign == 0.0 else [0.0, math.log(abs(b0)), ell0, 0.0]

    if grid[-1] == 0.0:
        sol_y = np.asarray(y0, dtype=float)[:, None]
    else:
        sol = solve_ivp(
            rhs,
            (0.0, float(grid[-1])),
            y0,
            method="RK45",
            t_eval=grid,
            rtol=ODE_RTOL,
            atol=ODE_ATOL,
        )
        if sol.status != 0:
            raise StepSizeError(f"Weber integration failed for c={c}: {sol.message}")
        sol_y = sol.y

    a = sol_y[0]
    if b0 == 0.0:
        ell = sol_y[1]
        theta = np.zeros_like(ell)
        b = np.zeros_like(ell)
    else:
        ell = sol_y[2]
        theta = sol_y[3]
        b = sign * np.exp(sol_y[1])
    return ell, theta, a, b


def pcf_weber_ode(c, lambda_grid):
    """log|D_{-c}(i*lambda)|^2 at every point of an ascending grid starting at 0."""
    grid = np.asarray(lambda_grid, dtype=float)
    ell, _, _, _ = _weber_trajectory(c, grid)
    return [PcfEval(c=c, lam=float(x), log_abs2=float(2.0 * e)) for x, e in zip(grid, ell)]


def pcf_weber_states(c, lambda_grid):
    """Raw (y, y') along the grid; overflows past lambda ~ 37, so keep grids short."""
    grid = np.asarray(lambda_grid, dtype=float)
    ell, theta, a, b = _weber_trajectory(c, grid)
    states = []
    for x, e, th, ar, br in zip(grid, ell, theta, a, b):
        if e + math.log1p(math.hypot(ar, br)) > _MAX_LOG_DOUBLE:
            raise AccuracyError(f"|y| overflows at lambda={x}; use pcf_weber_ode")
        y = complex(math.cos(th), math.sin(th)) * math.exp(e)
        dy = complex(ar, br) * y
        states.append(WeberState(lam=float(x), y_re=y.real, y_im=y.imag, dy_re=dy.real, dy_im=dy.imag))
    return states


def log_abs2(c, lambdas):
    """Vectorised log|D_{-c}(i*lambda)|^2 for any real lambdas.

    |D_{-c}(i*lambda)| is even in lambda, so only |lambda| is integrated.
    """
    lam = np.abs(np.asarray(lambdas, dtype=float))
    if not np.all(np.isfinite(lam)):
        raise DomainError("lambdas must be finite")
    nodes, inverse = np.unique(np.concatenate(([0.0], lam.ravel())), return_inverse=True)
    ell, _, _, _ = _weber_trajectory(c, nodes)
    out = 2.0 * ell[inverse[1:]]
    return out.reshape(lam.shape)


def wronskian_drift(c, lambda_grid):
    """max |W(lambda) - W(0)| / |W(0)| along the grid (0 when W vanishes, i.e. c = 0)."""
    states = pcf_weber_states(c, lambda_grid)
    w0 = states[0].wronskian
    if w0 == 0.0:
        return 0.0
    return max(abs(s.wronskian - w0) for s in states) / abs(w0)
