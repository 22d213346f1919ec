"""Vectorized Gauss-Legendre quadrature with adaptive interval halving.

All integrands are expected to accept numpy arrays. Panels are refined by
comparing a whole-panel rule against the sum over its two halves, which
serves as the local error estimate.
"""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def gl_rule(npts: int):
    """Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(npts)
    return x, w


def fixed_gl(f, a: float, b: float, npts: int = 40) -> float:
    """Integrate f over [a, b] with a single n-point Gauss-Legendre panel."""
    x, w = gl_rule(npts)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    return half * float(np.dot(w, f(mid + half * x)))


def partial_gl(f, a, b, npts: int = 32) -> np.ndarray:
    """Panel integrals of f over pairs (a_i, b_i), vectorized over i."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x, w = gl_rule(npts)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    # shape (len(a), npts)
    pts = mid[..., None] + half[..., None] * x
    vals = f(pts)
    return half * (vals @ w)


def graded_edges(a: float, b: float, n_uniform: int,
                 grade_left: bool, grade_right: bool,
                 levels: int = 36) -> np.ndarray:
    """Panel edges on [a, b]: uniform interior, geometric toward flagged ends.

    Geometric grading resolves endpoint derivative blow-ups (integrable
    kinks such as |x - a|^gamma with fractional gamma) to near machine
    precision with O(levels) extra panels.
    """
    edges = list(np.linspace(a, b, n_uniform + 1))
    if grade_left:
        first = edges[1]
        left = [a + (first - a) * 2.0 ** (-k) for k in range(levels, 0, -1)]
        edges = [a] + left + edges[1:]
    if grade_right:
        last = edges[-2]
        right = [b - (b - last) * 2.0 ** (-k) for k in range(1, levels + 1)]
        edges = edges[:-1] + right + [b]
    return np.asarray(edges)


def composite_gl(f, edges: np.ndarray, order: int = 16) -> float:
    """Composite Gauss-Legendre over given panel edges, one batched f call."""
    x, w = gl_rule(order)
    a = edges[:-1]
    b = edges[1:]
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    pts = (mid[:, None] + half[:, None] * x).ravel()
    vals = f(pts).reshape(len(a), order)
    return float(np.dot(vals @ w, half))


def graded_quad(f, a: float, b: float, *, n_uniform: int = 24, order: int = 16,
                grade_left: bool = True, grade_right: bool = True,
                tol_rel: float = 1e-11) -> tuple[float, float]:
    """Integrate f over [a, b] with endpoint-graded composite panels.

    Refines by doubling the uniform panel count until two successive
    levels agree to tol_rel; returns (value, error_estimate).
    """
    prev = composite_gl(f, graded_edges(a, b, n_uniform, grade_left, grade_right), order)
    for _ in range(5):
        n_uniform *= 2
        cur = composite_gl(f, graded_edges(a, b, n_uniform, grade_left, grade_right), order)
        err = abs(cur - prev)
        if err <= tol_rel * max(abs(cur), 1e-300):
            return cur, err
        prev = cur
    return cur, abs(cur - prev)


def adaptive_quad(f, a: float, b: float, tol_abs: float = 1e-12,
                  tol_rel: float = 1e-11, npts: int = 15,
                  max_panels: int = 4000) -> float:
    """Adaptively integrate f over [a, b].

    A panel is accepted when the difference between its single-panel value
    and the two-half refinement is below the locally apportioned tolerance.

    Raises
    ------
    RuntimeError
        If the panel budget is exhausted before reaching the tolerance.
    """
    if a == b:
        return 0.0
    length = b - a
    # stack entries: (lo, hi, coarse_value)
    stack = [(a, b, fixed_gl(f, a, b, npts))]
    total = 0.0
    rough = abs(stack[0][2]) + tol_abs
    panels = 0
    while stack:
        lo, hi, coarse = stack.pop()
        panels += 1
        if panels > max_panels:
            raise RuntimeError("adaptive_quad: panel budget exhausted")
        mid = 0.5 * (lo + hi)
        left = fixed_gl(f, lo, mid, npts)
        right = fixed_gl(f, mid, hi, npts)
        fine = left + right
        err = abs(fine - coarse)
        local_tol = tol_abs * (hi - lo) / length + tol_rel * max(abs(fine), rough * (hi - lo) / length)
        if err <= local_tol or (hi - lo) < 1e-14 * length:
            total += fine
        else:
            stack.append((lo, mid, left))
            stack.append((mid, hi, right))
    return total
