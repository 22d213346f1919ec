"""Exact 1D Dirichlet spectrum of the r-Laplacian on (0, T).

The spectrum is the sequence lambda_k(r) = (r-1) (k pi_r / T)^r with
eigenfunctions sin_r(k pi_r t / T), each having k nodal domains of equal
length. On top of the closed forms this module provides the mixed
Rayleigh-quotient ratio of the first p-eigenfunction measured in the
q-norm, the upper critical value attached to the p-spectrum, and a
verifier for the two-exponent eigenvalue inequalities.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .gtrig import _check_exponent, pi_r, sine_table, sinp_moment
from .quadrature import graded_quad

SPECTRAL_MATCH_RTOL = 1e-9


class CrossCheckError(RuntimeError):
    """Closed-form and quadrature routes disagree beyond tolerance."""


def eigenvalue(k: int, r: float, T: float) -> float:
    """k-th Dirichlet eigenvalue of the 1D r-Laplacian on (0, T)."""
    k = int(k)
    if k < 1:
        raise ValueError(f"mode index k must be >= 1, got {k}")
    r = _check_exponent(r)
    if not T > 0:
        raise ValueError(f"interval length T must be positive, got {T}")
    return (r - 1.0) * (k * pi_r(r) / T) ** r


@dataclass(frozen=True)
class EigenPair:
    """Eigenvalue with a vectorized evaluator of its eigenfunction."""

    k: int
    r: float
    T: float
    lam: float
    phi: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    dphi: Callable[[np.ndarray], np.ndarray] = field(repr=False)


def eigenfunction(k: int, r: float, T: float) -> EigenPair:
    """k-th eigenfunction t -> sin_r(k pi_r t / T) with its derivative."""
    lam = eigenvalue(k, r, T)  # validates arguments
    table = sine_table(float(r))
    freq = k * table.pi_r / T

    def phi(t):
        return table.value_and_deriv(np.asarray(t, dtype=float) * freq)[0]

    def dphi(t):
        return freq * table.value_and_deriv(np.asarray(t, dtype=float) * freq)[1]

    return EigenPair(k=int(k), r=float(r), T=float(T), lam=lam, phi=phi, dphi=dphi)


@dataclass(frozen=True)
class RayleighRatio:
    """||phi_p'||_q^q / ||phi_p||_q^q with both evaluation routes recorded."""

    p: float
    q: float
    T: float
    value: float
    closed_form: float
    quadrature: float


def rayleigh_ratio(p: float, q: float, T: float,
                   cross_rtol: float = 1e-6) -> RayleighRatio:
    """Mixed ratio of the first p-eigenfunction in the q-norm.

    Computed two ways: (a) via the quarter-period moment closed forms,
    (b) by quadrature of the eigenfunction evaluator. The value is only
    returned when both agree to cross_rtol; disagreement signals a bug in
    either the special functions or the quadrature and raises.
    """
    p = _check_exponent(p, "p")
    q = _check_exponent(q, "q")
    if not T > 0:
        raise ValueError(f"interval length T must be positive, got {T}")
    sin_mom, cos_mom = sinp_moment(p, q)
    closed = (pi_r(p) / T) ** q * cos_mom / sin_mom

    pair = eigenfunction(1, p, T)
    # |phi| and |phi'| are symmetric about T/2
    num, _ = graded_quad(lambda t: np.abs(pair.dphi(t)) ** q, 0.0, T / 2.0)
    den, _ = graded_quad(lambda t: np.abs(pair.phi(t)) ** q, 0.0, T / 2.0)
    quad = num / den

    if abs(quad - closed) > cross_rtol * abs(closed):
        raise CrossCheckError(
            f"rayleigh_ratio cross-check failed for (p={p}, q={q}, T={T}): "
            f"closed={closed!r}, quadrature={quad!r}")
    return RayleighRatio(p=p, q=q, T=T, value=closed, closed_form=closed,
                         quadrature=quad)


def spectral_index(alpha: float, p: float, T: float) -> int | None:
    """Index k with alpha = lambda_k(p) up to the matching tolerance, else None."""
    lam1 = eigenvalue(1, p, T)
    if alpha <= 0:
        return None
    k = max(1, round((alpha / lam1) ** (1.0 / p)))
    for cand in (k - 1, k, k + 1):
        if cand >= 1:
            lam = eigenvalue(cand, p, T)
            if abs(alpha - lam) <= SPECTRAL_MATCH_RTOL * lam:
                return cand
    return None


def beta_upper_star(alpha: float, p: float, q: float, T: float) -> float:
    """Upper critical value at alpha: k^q * ratio if alpha = lambda_k(p), else -inf.

    The eigenspace at each 1D eigenvalue is one-dimensional and the k-th
    eigenfunction has k equal nodal domains, so its mixed q-ratio is
    k^q times the ratio of the first eigenfunction.
    """
    if not (p > q > 1.0):
        raise ValueError(f"need p > q > 1, got p={p}, q={q}")
    k = spectral_index(alpha, p, T)
    if k is None:
        return float("-inf")
    return k ** q * rayleigh_ratio(p, q, T).value


def k_alpha(alpha: float, p: float, T: float) -> int:
    """Smallest k with alpha < lambda_{k+1}(p); the inequality is strict."""
    _check_exponent(p, "p")
    if not T > 0:
        raise ValueError(f"interval length T must be positive, got {T}")
    k = 1
    while not alpha < eigenvalue(k + 1, p, T):
        k += 1
    return k


@dataclass(frozen=True)
class PairMargins:
    """Margins of the eigenvalue inequalities for one exponent pair q < p."""

    p: float
    q: float
    ratio: float
    lower_margin: float       # (R - lambda_1(q)) / lambda_1(q)
    upper_margin: float       # (lambda_2(q) - R) / lambda_2(q)
    sufficient_lhs: float     # (1/p) B(1/p, 1/p)
    sufficient_rhs: float     # 2^(q-1) ((q-1)/q) pi_q^q / pi_p^(q-1)
    ok: bool


@dataclass(frozen=True)
class AppendixReport:
    T: float
    pairs: list[PairMargins]

    @property
    def all_ok(self) -> bool:
        return all(row.ok for row in self.pairs)

    def violations(self) -> list[PairMargins]:
        return [row for row in self.pairs if not row.ok]


def verify_lemma_margins(p_grid, q_grid, T: float = 1.0,
                         margin_rtol: float = 1e-10) -> AppendixReport:
    """Check lambda_1(q) < ratio(p,q) < lambda_2(q) over a grid of q < p pairs.

    Also evaluates the sufficient inequality
    (1/p) B(1/p, 1/p) <= 2^(q-1) ((q-1)/q) pi_q^q / pi_p^(q-1).
    Violations are reported, not raised.
    """
    from .gtrig import beta_fn

    rows = []
    for p in np.asarray(p_grid, dtype=float):
        for q in np.asarray(q_grid, dtype=float):
            if not q < p:
                continue
            ratio = rayleigh_ratio(p, q, T).value
            lam1 = eigenvalue(1, q, T)
            lam2 = eigenvalue(2, q, T)
            lower = (ratio - lam1) / lam1
            upper = (lam2 - ratio) / lam2
            lhs = beta_fn(1.0 / p, 1.0 / p) / p
            rhs = 2.0 ** (q - 1.0) * ((q - 1.0) / q) * pi_r(q) ** q / pi_r(p) ** (q - 1.0)
            ok = lower > margin_rtol and upper > margin_rtol and lhs <= rhs
            rows.append(PairMargins(p=float(p), q=float(q), ratio=ratio,
                                    lower_margin=lower, upper_margin=upper,
                                    sufficient_lhs=lhs, sufficient_rhs=rhs,
                                    ok=ok))
    return AppendixReport(T=float(T), pairs=rows)
