"""Closed-form single-mode theory: threshold roots, inverse growth bounds,
and per-mode regime boundaries for decaying (real or spiraling) modes."""
import math
from dataclasses import dataclass

import numpy as np


def change_thresholds(c):
    """Roots (lower, upper) of x(1 - x) = c, the split of a decaying mode into
    near-final and near-initial values once its logarithmic-scale change is
    at most c. Defined for 0 <= c <= 1/4; the pair sums to 1 and multiplies
    to c at machine precision.
    """
    if not 0.0 <= c <= 0.25:
        raise ValueError("threshold split exists only for 0 <= c <= 1/4, got %r" % c)
    s = math.sqrt(1.0 - 4.0 * c)
    return (1.0 - s) / 2.0, (1.0 + s) / 2.0


def linear_growth_inverse(value, slope):
    """Invert f(x) = slope*x - e^x + 1 on its increasing branch [0, ln(slope)].

    Bisection to 1e-13 in x. The domain endpoint is
    f(ln(slope)) = slope*ln(slope) - slope + 1.
    """
    if slope <= 1.0:
        raise ValueError("slope must exceed 1")
    x_hi = math.log(slope)
    v_max = slope * x_hi - slope + 1.0
    if value < 0.0 or value > v_max + 1e-15:
        raise ValueError("value %r outside the invertible range [0, %r]" % (value, v_max))
    if value >= v_max:
        return x_hi
    lo, hi = 0.0, x_hi
    f = lambda x: slope * x - math.exp(x) + 1.0
    for _ in range(200):
        mid = (lo + hi) / 2.0
        if f(mid) < value:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13:
            break
    return (lo + hi) / 2.0


def inverse_bound(which, value):
    """Inverse bound functions for the initial-regime growth inequalities.

    'E1' inverts 2x - e^x + 1 (domain value <= 2 ln 2 - 1), 'E2' inverts
    (3/2)x - e^x + 1 (domain value <= (3 ln(3/2) - 1)/2).
    """
    slopes = {"E1": 2.0, "E2": 1.5}
    if which not in slopes:
        raise ValueError("which must be 'E1' or 'E2'")
    return linear_growth_inverse(value, slopes[which])


E1_DOMAIN_MAX = 2.0 * math.log(2.0) - 1.0
E2_DOMAIN_MAX = (3.0 * math.log(1.5) - 1.0) / 2.0


@dataclass(frozen=True)
class ModeRegimes:
    """Regime boundaries of a single decaying mode at accuracy c."""

    lam: complex
    c: float
    t_initial: float
    t_final: float
    imag_bound: float | None


def first_crossing(f, target, t_max, step, t_min=0.0, value_tol=1e-12, refine=60):
    """First t in (t_min, t_max] with f(t) = target, by scan then bisection.

    The scan step must resolve oscillations of f; returns None when no sign
    change of f - target is found up to t_max.
    """
    t_lo = t_min
    f_lo = f(t_lo) - target
    steps = int(np.ceil((t_max - t_min) / step))
    crossing = None
    for k in range(1, steps + 1):
        t_hi = min(t_min + k * step, t_max)
        f_hi = f(t_hi) - target
        if f_lo * f_hi <= 0.0 and (f_hi >= 0.0 or f_lo >= 0.0):
            crossing = (t_lo, t_hi, f_lo, f_hi)
            break
        t_lo, f_lo = t_hi, f_hi
    if crossing is None:
        return None
    a, b, fa, fb = crossing
    for _ in range(refine):
        m = (a + b) / 2.0
        fm = f(m) - target
        if abs(fm) <= value_tol and (b - a) <= 1e-12 * max(1.0, abs(m)):
            return m
        if fa * fm <= 0.0:
            b, fb = m, fm
        else:
            a, fa = m, fm
    return (a + b) / 2.0


def mode_regimes(lam, c):
    """Initial/final regime boundaries of the mode e^{t lam}.

    The final regime starts at -ln(c)/(-Re lam). For a real mode the initial
    regime ends at -ln(1-c)/(-Re lam); for a complex mode it ends at the first
    time |e^{t lam} - 1| = c, which is found numerically and obeys the
    arcsin(c/(1-c)) bound on t |Im lam| for c <= 1/2.
    """
    lam = complex(lam)
    if lam.real >= 0.0:
        raise ValueError("not a decaying mode: Re lam must be negative")
    if not 0.0 < c < 1.0:
        raise ValueError("accuracy c must lie in (0, 1)")
    rate = -lam.real
    t_final = -math.log(c) / rate
    if abs(lam.imag) <= 1e-300:
        t_initial = -math.log1p(-c) / rate
        imag_bound = None
    else:
        step = min(0.01 / abs(lam), 0.1 / abs(lam.imag))
        f = lambda t: abs(np.exp(t * lam) - 1.0)
        t_initial = first_crossing(f, c, t_max=10.0 * t_final, step=step)
        if t_initial is None:
            t_initial = -math.log1p(-c) / rate
        imag_bound = (math.asin(c / (1.0 - c)) / abs(lam.imag)) if c <= 0.5 else None
    return ModeRegimes(lam=lam, c=c, t_initial=float(t_initial),
                       t_final=float(t_final), imag_bound=imag_bound)
