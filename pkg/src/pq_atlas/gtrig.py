"""Generalized trigonometric functions and beta/gamma identities.

The generalized sine of exponent r > 1 is the inverse of

    F(x) = integral_0^x (1 - s^r)^(-1/r) ds,   x in [0, 1],

extended from [0, pi_r/2] to all of R by the reflection
sin_r(pi_r - t) = sin_r(t), oddness, and 2*pi_r periodicity, where
pi_r = 2*pi / (r*sin(pi/r)) is the half-period constant.

F is evaluated by Gauss-Legendre panels; near the integrable endpoint
singularity at s = 1 the substitution w = (1 - s^r)^((r-1)/r) is applied
first, which makes the integrand bounded. The inverse is computed by a
bisection-safeguarded Newton iteration, vectorized over the argument.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .quadrature import fixed_gl, partial_gl

_N_S_PANELS = 10
_N_W_PANELS = 48
_PANEL_ORDER = 32
_INV_TOL = 1e-13


def _check_exponent(r: float, name: str = "r") -> float:
    r = float(r)
    if not (r > 1.0) or not math.isfinite(r):
        raise ValueError(f"exponent {name} must satisfy {name} > 1, got {r}")
    return r


def pi_r(r: float) -> float:
    """Half-period constant 2*pi / (r*sin(pi/r)) of the generalized sine.

    Strictly decreasing in r; pi_2 = pi.
    """
    r = _check_exponent(r)
    return 2.0 * math.pi / (r * math.sin(math.pi / r))


@dataclass(frozen=True)
class GTrigValue:
    """One evaluation of the generalized sine and its derivative."""

    t: float
    s: float
    ds: float


class _SineTable:
    """Per-exponent panel tables for F and its inverse on [0, pi_r/2]."""

    def __init__(self, r: float):
        self.r = r
        self.pi_r = pi_r(r)
        self.quarter = 0.5 * self.pi_r
        self.m = r / (r - 1.0)
        # smooth region [0, s_c] with 1 - s^r >= 1/2
        self.s_c = 0.5 ** (1.0 / r)
        self.w_c = 0.5 ** ((r - 1.0) / r)

        self._s_edges = np.linspace(0.0, self.s_c, _N_S_PANELS + 1)
        cum = [0.0]
        for k in range(_N_S_PANELS):
            cum.append(cum[-1] + fixed_gl(self._g_s, self._s_edges[k],
                                          self._s_edges[k + 1], _PANEL_ORDER))
        self._s_cum = np.array(cum)

        # descending geometric edges w_c * 2^0, 2^-1, ..., then 0
        ks = np.arange(_N_W_PANELS + 1)
        self._w_edges = self.w_c * np.power(2.0, -ks.astype(float))
        tail_cum = np.zeros(_N_W_PANELS + 1)
        bottom = fixed_gl(self._g_w, 0.0, self._w_edges[-1], _PANEL_ORDER)
        tail_cum[_N_W_PANELS] = bottom
        for k in range(_N_W_PANELS - 1, -1, -1):
            tail_cum[k] = tail_cum[k + 1] + fixed_gl(
                self._g_w, self._w_edges[k + 1], self._w_edges[k], _PANEL_ORDER)
        self._w_cum = tail_cum
        self.t_split = self.quarter - tail_cum[0]  # = F(s_c)

        # inverse-interpolation table: good Newton starting points
        xs = np.linspace(0.0, self.s_c, 400)
        self._inv_t = self.F(xs)
        self._inv_x = xs

    def _g_s(self, s):
        return np.power(1.0 - np.power(s, self.r), -1.0 / self.r)

    def _g_w(self, w):
        return (1.0 / (self.r - 1.0)) * np.power(
            1.0 - np.power(w, self.m), (1.0 - self.r) / self.r)

    def _w_of_x(self, x):
        # 1 - x^r without cancellation for x near 1
        one_minus = -np.expm1(self.r * np.log(np.maximum(x, 1e-300)))
        return np.power(np.maximum(one_minus, 0.0), (self.r - 1.0) / self.r)

    def _tail(self, w):
        """integral_0^w of the substituted integrand, vectorized."""
        w = np.asarray(w, dtype=float)
        out = np.zeros_like(w)
        pos = w > 0.0
        if not np.any(pos):
            return out
        wp = w[pos]
        ratio = np.clip(self.w_c / wp, 1.0, None)
        k = np.floor(np.log2(ratio)).astype(int)
        k = np.clip(k, 0, _N_W_PANELS)
        lower = np.where(k >= _N_W_PANELS, 0.0, self._w_edges[np.minimum(k + 1, _N_W_PANELS)])
        base = np.where(k >= _N_W_PANELS, 0.0, self._w_cum[np.minimum(k + 1, _N_W_PANELS)])
        out[pos] = base + partial_gl(self._g_w, lower, wp, _PANEL_ORDER)
        return out

    def F(self, x):
        """The defining incomplete integral, vectorized over x in [0, 1]."""
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        low = x <= self.s_c
        if np.any(low):
            xl = x[low]
            width = self.s_c / _N_S_PANELS
            k = np.clip((xl / width).astype(int), 0, _N_S_PANELS - 1)
            out[low] = self._s_cum[k] + partial_gl(self._g_s, self._s_edges[k],
                                                   xl, _PANEL_ORDER)
        high = ~low
        if np.any(high):
            out[high] = self.quarter - self._tail(self._w_of_x(x[high]))
        return out

    @staticmethod
    def _newton_bracket(fwd, slope, target, y0, hi_cap, tol):
        """Safeguarded Newton for the monotone equation fwd(y) = target.

        Converged entries are frozen and dropped from the working set;
        a Newton trial leaving the current bracket falls back to bisection.
        """
        y = y0.copy()
        lo = np.zeros_like(y)
        hi = np.full_like(y, hi_cap)
        active = np.arange(y.size)
        for _ in range(90):
            ya = y[active]
            res = fwd(ya) - target[active]
            conv = np.abs(res) <= tol
            if np.all(conv):
                break
            keep = ~conv
            active = active[keep]
            res = res[keep]
            ya = ya[keep]
            below = res <= 0
            lo[active] = np.where(below, ya, lo[active])
            hi[active] = np.where(below, hi[active], ya)
            yn = ya - res / slope(ya)
            bad = (yn <= lo[active]) | (yn >= hi[active])
            y[active] = np.where(bad, 0.5 * (lo[active] + hi[active]), yn)
        return y

    def _invert_low(self, t):
        """Solve F(x) = t for t <= t_split by safeguarded Newton."""
        x0 = np.clip(np.interp(t, self._inv_t, self._inv_x), 0.0, self.s_c)
        return self._newton_bracket(
            self.F,
            lambda xa: np.power(1.0 - np.power(xa, self.r), -1.0 / self.r),
            t, x0, self.s_c, _INV_TOL * self.quarter)

    def _invert_high(self, t):
        """Solve F(x) = t for t > t_split via the substituted variable."""
        delta = self.quarter - t
        w0 = np.clip((self.r - 1.0) * delta, 0.0, self.w_c)
        w = self._newton_bracket(
            self._tail, lambda wa: self._g_w(np.maximum(wa, 1e-300)),
            delta, w0, self.w_c, _INV_TOL * self.quarter)
        x = np.exp(np.log1p(-np.power(w, self.m)) / self.r)
        ds_core = np.power(w, 1.0 / (self.r - 1.0))
        return x, ds_core

    def core(self, t):
        """sin_r and its derivative on the principal quarter period."""
        t = np.asarray(t, dtype=float)
        s = np.empty_like(t)
        ds = np.empty_like(t)
        low = t <= self.t_split
        if np.any(low):
            x = self._invert_low(t[low])
            s[low] = x
            ds[low] = np.power(1.0 - np.power(x, self.r), 1.0 / self.r)
        high = ~low
        if np.any(high):
            x, dsc = self._invert_high(t[high])
            s[high] = x
            ds[high] = dsc
        return s, ds

    def value_and_deriv(self, t):
        """sin_r(t) and sin_r'(t) for arbitrary real t, vectorized."""
        t = np.asarray(t, dtype=float)
        period = 2.0 * self.pi_r
        tau = t - period * np.floor(t / period)
        q = self.quarter
        quad = np.clip((tau / q).astype(int), 0, 3)
        core_arg = np.choose(quad, [tau, 2 * q - tau, tau - 2 * q, 4 * q - tau])
        # guard rounding spill at quadrant boundaries
        core_arg = np.clip(core_arg, 0.0, q)
        s, ds = self.core(core_arg)
        sign_s = np.where(quad >= 2, -1.0, 1.0)
        sign_d = np.where((quad == 1) | (quad == 2), -1.0, 1.0)
        return sign_s * s, sign_d * ds


@lru_cache(maxsize=128)
def sine_table(r: float) -> _SineTable:
    """Cached per-exponent tables backing sin_r evaluations."""
    return _SineTable(_check_exponent(r))


def sin_r(r: float, t: float) -> GTrigValue:
    """Evaluate the generalized sine of exponent r at t.

    Returns the triple (t, sin_r(t), sin_r'(t)); the values satisfy
    |s|^r + |ds|^r = 1 up to evaluation tolerance.
    """
    table = sine_table(_check_exponent(r))
    s, ds = table.value_and_deriv(np.asarray([t], dtype=float))
    return GTrigValue(t=float(t), s=float(s[0]), ds=float(ds[0]))


def sin_r_values(r: float, t) -> np.ndarray:
    """Vectorized sin_r over an array of arguments."""
    return sine_table(_check_exponent(r)).value_and_deriv(np.asarray(t, dtype=float))[0]


def sin_r_derivs(r: float, t) -> np.ndarray:
    """Vectorized sin_r' over an array of arguments."""
    return sine_table(_check_exponent(r)).value_and_deriv(np.asarray(t, dtype=float))[1]


def beta_fn(x: float, y: float) -> float:
    """Euler beta function B(x, y) = Gamma(x)Gamma(y)/Gamma(x+y), x, y > 0."""
    x = float(x)
    y = float(y)
    if x <= 0.0 or y <= 0.0:
        raise ValueError(f"beta_fn requires positive arguments, got ({x}, {y})")
    return math.exp(math.lgamma(x) + math.lgamma(y) - math.lgamma(x + y))


def sinp_moment(p: float, q: float) -> tuple[float, float]:
    """Quarter-period moments (integral sin_p^q, integral cos_p^q) on [0, pi_p/2].

    Closed forms: (1/p) B((q+1)/p, (p-1)/p) and (1/p) B(1/p, 1 + (q-1)/p).
    """
    p = _check_exponent(p, "p")
    q = _check_exponent(q, "q")
    sin_mom = beta_fn((q + 1.0) / p, (p - 1.0) / p) / p
    cos_mom = beta_fn(1.0 / p, 1.0 + (q - 1.0) / p) / p
    return sin_mom, cos_mom
