"""Newton and Barzilai-Borwein kernels shared by the variational solvers.

All systems here are one-dimensional finite-difference problems, so the
Hessians are tridiagonal and factorized with scipy's banded solver.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded


@dataclass
class SolveResult:
    x: np.ndarray
    grad_norm: float
    iterations: int
    converged: bool


def _banded_solve(band: np.ndarray, rhs: np.ndarray) -> np.ndarray | None:
    try:
        sol = solve_banded((1, 1), band, rhs)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(sol)):
        return None
    return sol


def newton_root(x0, grad_fn, hess_fn, *, tol: float, max_iter: int = 200,
                max_step: float | None = None) -> SolveResult:
    """Damped Newton for grad_fn(x) = 0 with a residual-decrease line search.

    Works for indefinite Hessians (critical points of saddle type); the
    step is accepted once the Euclidean residual decreases, with up to 30
    halvings before bailing out to a small gradient step.
    """
    x = np.asarray(x0, dtype=float).copy()
    g = grad_fn(x)
    gn = float(np.linalg.norm(g))
    it = 0
    while gn > tol and it < max_iter:
        it += 1
        step = _banded_solve(hess_fn(x), g)
        if step is None:
            step = g * (1.0 / max(gn, 1e-30))
        if max_step is not None:
            sn = float(np.linalg.norm(step, ord=np.inf))
            if sn > max_step:
                step = step * (max_step / sn)
        lam = 1.0
        improved = False
        for _ in range(30):
            xn = x - lam * step
            gnew = grad_fn(xn)
            gnn = float(np.linalg.norm(gnew))
            if np.isfinite(gnn) and gnn < gn:
                x, g, gn = xn, gnew, gnn
                improved = True
                break
            lam *= 0.5
        if not improved:
            # fall back to a conservative gradient step
            xn = x - (0.1 / max(gn, 1e-30)) * g * min(1.0, gn)
            gnew = grad_fn(xn)
            gnn = float(np.linalg.norm(gnew))
            if not np.isfinite(gnn) or gnn >= gn:
                break
            x, g, gn = xn, gnew, gnn
    return SolveResult(x=x, grad_norm=gn, iterations=it, converged=gn <= tol)


def newton_minimize(x0, value_fn, grad_fn, hess_fn, *, tol: float,
                    max_iter: int = 500) -> SolveResult:
    """Damped Newton for a convex objective with Armijo backtracking.

    Falls back to steepest descent whenever the Newton direction fails to
    be a descent direction (possible under Hessian regularization).
    """
    x = np.asarray(x0, dtype=float).copy()
    f = value_fn(x)
    g = grad_fn(x)
    gn = float(np.linalg.norm(g))
    it = 0
    while gn > tol and it < max_iter:
        it += 1
        step = _banded_solve(hess_fn(x), g)
        if step is None or float(np.dot(step, g)) <= 0.0:
            step = g.copy()
        # near the optimum the objective decrease drowns in rounding;
        # a residual-reducing full step is accepted outright
        xn = x - step
        gnew = grad_fn(xn)
        gnn = float(np.linalg.norm(gnew))
        if np.isfinite(gnn) and gnn <= 0.9 * gn:
            x, g, gn = xn, gnew, gnn
            f = value_fn(x)
            continue
        slope = float(np.dot(step, g))
        lam = 1.0
        accepted = False
        for _ in range(40):
            xn = x - lam * step
            fn_ = value_fn(xn)
            if np.isfinite(fn_) and fn_ <= f - 1e-4 * lam * slope:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            break
        x, f = xn, fn_
        g = grad_fn(x)
        gn = float(np.linalg.norm(g))
    return SolveResult(x=x, grad_norm=gn, iterations=it, converged=gn <= tol)


def bb_descent(x0, value_fn, grad_fn, *, max_iter: int = 300,
               tol: float = 0.0, step0: float = 1e-2,
               callback=None) -> np.ndarray:
    """Barzilai-Borwein gradient descent with a nonmonotone safeguard.

    Used for the rough constrained-optimization stages where only a
    decent feasible point is needed, not high accuracy.
    """
    x = np.asarray(x0, dtype=float).copy()
    g = grad_fn(x)
    step = step0
    f_best = value_fn(x)
    x_best = x.copy()
    for _ in range(max_iter):
        gn = float(np.linalg.norm(g))
        if gn <= tol:
            break
        xn = x - step * g
        gnew = grad_fn(xn)
        sy = float(np.dot(xn - x, gnew - g))
        ss = float(np.dot(xn - x, xn - x))
        x, g = xn, gnew
        step = ss / sy if sy > 1e-30 else min(step * 2.0, 1.0)
        step = float(np.clip(step, 1e-12, 1e3))
        f = value_fn(x)
        if np.isfinite(f) and f < f_best:
            f_best = f
            x_best = x.copy()
        if callback is not None:
            callback(x)
    return x_best
