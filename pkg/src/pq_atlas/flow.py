"""Descending-flow solver for negative-energy nodal solutions.

The flow relaxes eta' = -eta + B(eta), where B inverts the strictly
monotone operator u -> -Delta_p u - Delta_q u + lambda psi(u) applied to
the shifted right-hand side h(x, u) + lambda psi(u). For lambda above
the (A1) constant the map preserves the positive and negative cones, so
trajectories from one-signed seeds converge to one-signed critical
points, and the basin boundary between the two cones carries the
sign-changing critical point located here by bisection plus a Newton
polish of near-stall iterates.
"""

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import discrete as D
from .discrete import (DiscreteFunction, FunctionalContext, Mesh, count_nodal,
                       gradient_values, hessian_banded, residual_norm)
from .solvers import newton_minimize, newton_root
from .spectral1d import eigenfunction

CONE_RTOL = 1e-9


class SuperSolutionError(RuntimeError):
    """Truncation anchor fails the weak super-solution test."""


class NoPositiveSolutionError(RuntimeError):
    """The positive-cone flow collapsed to zero or blew up."""


class BisectionExhaustedError(RuntimeError):
    """Cone-boundary bisection never produced a sign-changing limit."""


class FlowNotConvergedError(RuntimeError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class Nonlinearity:
    """Carathéodory right-hand side with its antiderivative and s-derivative.

    All callables are vectorized over (x, s) arrays; lambda0 is the
    cone-shift constant of (A1), growth_C a bound in |f| <= C(1+|s|^(p-1)).
    The derivative is used only inside Newton Hessians and may be
    regularized.
    """

    h: Callable[[np.ndarray, np.ndarray], np.ndarray]
    antiderivative: Callable[[np.ndarray, np.ndarray], np.ndarray]
    hprime: Callable[[np.ndarray, np.ndarray], np.ndarray]
    lambda0: float
    growth_C: float


def untruncated(ctx: FunctionalContext) -> Nonlinearity:
    """Right-hand side of the two-parameter problem itself; J equals E."""
    a, b, p, q = ctx.alpha, ctx.beta, ctx.p, ctx.q

    def h(x, s):
        return a * D._phi(s, p) + b * D._phi(s, q)

    def F(x, s):
        return a * np.abs(s) ** p / p + b * np.abs(s) ** q / q

    def hp(x, s):
        sc = max(float(np.max(np.abs(s))), 1e-30)
        return a * D._dphi(s, p, sc) + b * D._dphi(s, q, sc)

    return Nonlinearity(h=h, antiderivative=F, hprime=hp,
                        lambda0=max(abs(a), abs(b)), growth_C=abs(a) + abs(b))


def operator_values(values: np.ndarray, mesh: Mesh, p: float, q: float) -> np.ndarray:
    """Discrete weak form of -Delta_p - Delta_q tested with the nodal hats."""
    h = mesh.h
    out = np.zeros_like(values)
    for r in (p, q):
        fd = D._phi(np.diff(values, prepend=0.0, append=0.0), r)
        out += h ** (1.0 - r) * (fd[:-1] - fd[1:])
    return out


def truncate(v: DiscreteFunction, ctx: FunctionalContext,
             defect_rtol: float = 1e-8) -> Nonlinearity:
    """Clamp the right-hand side at the positive super-solution v.

    The clamped f(x, s) agrees with the original for |s| <= v(x) and is
    constant outside, so it is bounded and satisfies (A1) with
    lambda0 = max(|alpha|, |beta|). Raises SuperSolutionError when v is
    not interior-positive or its weak defect against the nonnegative hat
    directions dips below -defect_rtol * scale.
    """
    amp = v.norm_inf()
    if amp == 0.0:
        raise SuperSolutionError("anchor is identically zero")
    if np.min(v.values) < -CONE_RTOL * amp:
        bad = np.flatnonzero(v.values < -CONE_RTOL * amp)[:8]
        raise SuperSolutionError(f"anchor not interior-positive at nodes {bad.tolist()}")
    # noise-level entries are floored so the clip band stays positive
    vals = np.maximum(v.values, CONE_RTOL * amp)
    a, b, p, q = ctx.alpha, ctx.beta, ctx.p, ctx.q
    mesh = v.mesh
    lhs = operator_values(vals, mesh, p, q)
    rhs = mesh.h * (a * D._phi(vals, p) + b * D._phi(vals, q))
    defect = lhs - rhs
    scale = float(np.max(np.abs(lhs)) + np.max(np.abs(rhs)))
    if np.min(defect) < -defect_rtol * scale:
        bad = np.flatnonzero(defect < -defect_rtol * scale)[:8]
        raise SuperSolutionError(
            f"super-solution defect {np.min(defect):.3e} below -{defect_rtol:.0e}*scale "
            f"at nodes {bad.tolist()}")
    nodes = mesh.nodes

    def v_at(x):
        return np.interp(x, nodes, vals)

    def h_fn(x, s):
        c = np.clip(s, -v_at(x), v_at(x))
        return a * D._phi(c, p) + b * D._phi(c, q)

    def F_fn(x, s):
        vx = v_at(x)
        c = np.minimum(np.abs(s), vx)
        base = a * c ** p / p + b * c ** q / q
        slope = a * vx ** (p - 1.0) + b * vx ** (q - 1.0)
        return base + slope * np.maximum(0.0, np.abs(s) - vx)

    def hp_fn(x, s):
        sc = max(float(np.max(np.abs(s))), 1e-30)
        inner = np.abs(s) <= v_at(x)
        return np.where(inner, a * D._dphi(s, p, sc) + b * D._dphi(s, q, sc), 0.0)

    bound = abs(a) * v.norm_inf() ** (p - 1.0) + abs(b) * v.norm_inf() ** (q - 1.0)
    return Nonlinearity(h=h_fn, antiderivative=F_fn, hprime=hp_fn,
                        lambda0=max(abs(a), abs(b)), growth_C=bound)


# ---------------------------------------------------------------------------
# the inverse operator and the fixed-point map

def _psi(s: np.ndarray, p: float, q: float) -> np.ndarray:
    return D._phi(s, p) + D._phi(s, q)


def solve_T_lambda(f: DiscreteFunction, lam: float, ctx: FunctionalContext,
                   x0: np.ndarray | None = None,
                   tol_rel: float = 1e-10) -> DiscreteFunction:
    """Invert the shifted operator: minimize the strictly convex functional

        Phi(u) = (1/p)||u'||_p^p + (1/q)||u'||_q^q
                 + lambda ((1/p)||u||_p^p + (1/q)||u||_q^q) - h <f, u>.

    The gradient at the returned point is below tol_rel times the data
    scale. Raises FlowNotConvergedError if Newton stalls.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    vals = _solve_T_values(f.values, lam, ctx, f.mesh, x0, tol_rel)
    return DiscreteFunction(f.mesh, vals)


def _solve_T_values(fv: np.ndarray, lam: float, ctx: FunctionalContext,
                    mesh: Mesh, x0: np.ndarray | None, tol_rel: float) -> np.ndarray:
    h = mesh.h
    p, q = ctx.p, ctx.q
    if not np.any(fv):
        return np.zeros_like(fv)
    scale = max(float(np.linalg.norm(h * fv)), 1e-300)

    def value(u):
        grad_part = sum(float(np.sum(np.abs(np.diff(u, prepend=0.0, append=0.0)) ** r))
                        * h ** (1.0 - r) / r for r in (p, q))
        mass = lam * sum(float(np.sum(np.abs(u) ** r)) * h / r for r in (p, q))
        return grad_part + mass - h * float(np.dot(fv, u))

    def grad(u):
        return (operator_values(u, mesh, p, q)
                + lam * h * _psi(u, p, q) - h * fv)

    amp = float(np.max(np.abs(fv))) ** (1.0 / (p - 1.0)) if np.any(fv) else 1.0

    def hess(u):
        sc = max(float(np.max(np.abs(u))), amp, 1e-30)
        diag = np.zeros(mesh.n)
        off = np.zeros(mesh.n - 1)
        for r in (p, q):
            w = h ** (1.0 - r) * D._dphi(np.diff(u, prepend=0.0, append=0.0), r, sc)
            diag += w[:-1] + w[1:] + lam * h * D._dphi(u, r, sc)
            off -= w[1:-1]
        band = np.zeros((3, mesh.n))
        band[0, 1:] = off
        band[1, :] = diag
        band[2, :-1] = off
        return band

    x0 = np.zeros_like(fv) if x0 is None else np.asarray(x0, dtype=float).copy()
    res = newton_minimize(x0, value, grad, hess, tol=tol_rel * scale, max_iter=500)
    if not res.converged:
        raise FlowNotConvergedError(
            f"T_lambda inversion stalled at |grad| = {res.grad_norm:.3e}")
    return res.x


def B_lambda(u: DiscreteFunction, nl: Nonlinearity, lam: float,
             ctx: FunctionalContext, x0: np.ndarray | None = None) -> DiscreteFunction:
    """Fixed-point map: invert T_lambda on h(x, u) + lambda psi(u)."""
    if not lam > nl.lambda0:
        raise ValueError(f"need lambda > lambda0 = {nl.lambda0}, got {lam}")
    mesh = u.mesh
    rhs = nl.h(mesh.nodes, u.values) + lam * _psi(u.values, ctx.p, ctx.q)
    warm = u.values if x0 is None else x0
    vals = _solve_T_values(rhs, lam, ctx, mesh, warm, 1e-10)
    return DiscreteFunction(mesh, vals)


# ---------------------------------------------------------------------------
# the flow itself

def J_value(values: np.ndarray, mesh: Mesh, nl: Nonlinearity,
            p: float, q: float) -> float:
    h = mesh.h
    grad_part = sum(float(np.sum(np.abs(np.diff(values, prepend=0.0, append=0.0)) ** r))
                    * h ** (1.0 - r) / r for r in (p, q))
    return grad_part - h * float(np.sum(nl.antiderivative(mesh.nodes, values)))


def J_gradient(values: np.ndarray, mesh: Mesh, nl: Nonlinearity,
               p: float, q: float) -> np.ndarray:
    return operator_values(values, mesh, p, q) - mesh.h * nl.h(mesh.nodes, values)


def cone_of(values: np.ndarray, rtol: float = CONE_RTOL) -> str:
    amp = float(np.max(np.abs(values))) if values.size else 0.0
    if amp == 0.0:
        return "POS"
    if np.min(values) >= -rtol * amp:
        return "POS"
    if np.max(values) <= rtol * amp:
        return "NEG"
    return "MIXED"


@dataclass(frozen=True)
class FlowState:
    eta: DiscreteFunction
    J_value: float
    step_count: int
    cone: str


@dataclass(frozen=True)
class TrajectoryRow:
    step: int
    J: float
    fixed_point_gap: float
    cone: str


@dataclass
class FlowOptions:
    tol: float = 1e-8
    dt0: float = 0.5
    dt_cap: float = 1.0
    max_steps: int = 2000
    blowup_factor: float = 1e6
    log_every: int = 1


@dataclass
class FlowResult:
    state: FlowState
    trajectory: list[TrajectoryRow] = field(default_factory=list)
    converged: bool = False
    min_gap_mixed: DiscreteFunction | None = None  # best sign-changing stall


def descend(u0: DiscreteFunction, nl: Nonlinearity, lam: float,
            ctx: FunctionalContext, opts: FlowOptions | None = None) -> FlowResult:
    """Explicit Euler relaxation toward the fixed points of B_lambda.

    J is nonincreasing across accepted steps by construction (the step is
    halved whenever it would increase); terminates when the fixed-point
    gap falls below opts.tol or the step budget runs out.
    """
    if opts is None:
        opts = FlowOptions()
    mesh = u0.mesh
    p, q = ctx.p, ctx.q
    eta = u0.values.copy()
    J = J_value(eta, mesh, nl, p, q)
    dt = opts.dt0
    accepts = 0
    streak = 0
    rows: list[TrajectoryRow] = []
    amp0 = max(float(np.max(np.abs(eta))), 1.0)
    best_mixed = None
    best_mixed_gap = math.inf
    warm = eta
    converged = False

    for step in range(opts.max_steps):
        B = _solve_T_values(nl.h(mesh.nodes, eta) + lam * _psi(eta, p, q),
                            lam, ctx, mesh, warm, 1e-10)
        warm = B
        direction = B - eta
        gap = float(np.linalg.norm(direction)) * math.sqrt(mesh.h)
        cone = cone_of(eta)
        if step % opts.log_every == 0:
            rows.append(TrajectoryRow(step=accepts, J=J, fixed_point_gap=gap, cone=cone))
        if cone == "MIXED" and gap < best_mixed_gap:
            best_mixed_gap = gap
            best_mixed = eta.copy()
        if gap <= opts.tol:
            converged = True
            break
        moved = False
        while dt >= 1e-12:
            trial = eta + dt * direction
            Jt = J_value(trial, mesh, nl, p, q)
            if Jt <= J:
                eta, J = trial, Jt
                accepts += 1
                streak += 1
                if streak >= 5:
                    dt = min(dt * 2.0, opts.dt_cap)
                    streak = 0
                moved = True
                break
            dt *= 0.5
            streak = 0
        if not moved:
            break
        if float(np.max(np.abs(eta))) > opts.blowup_factor * amp0:
            break

    final = DiscreteFunction(mesh, eta)
    state = FlowState(eta=final, J_value=J, step_count=accepts, cone=cone_of(eta))
    mixed = DiscreteFunction(mesh, best_mixed) if best_mixed is not None else None
    return FlowResult(state=state, trajectory=rows, converged=converged,
                      min_gap_mixed=mixed)


def trajectory_csv(rows: list[TrajectoryRow]) -> str:
    out = ["step,J,fixed_point_gap,cone"]
    for r in rows:
        out.append(f"{r.step},{r.J:.17g},{r.fixed_point_gap:.17g},{r.cone}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# the three-solution pipeline

@dataclass
class NodalFlowOptions:
    tol: float = 1e-6
    flow: FlowOptions = field(default_factory=FlowOptions)
    path_points: int = 41
    path_t0: float = 0.1
    max_bisection: int = 60
    pos_seed_scale: float = 1e-2
    newton_tol_resid: float = 1e-10


@dataclass
class NodalFlowReport:
    energy: float
    residual: float
    nodal_domains: int
    sandwich_violation: float
    J: float
    bisection_steps: int
    w1: DiscreteFunction
    w1_residual: float


def _polish_critical(values: np.ndarray, mesh: Mesh, nl: Nonlinearity,
                     ctx: FunctionalContext, tol_resid: float):
    """Newton toward a critical point of the flow functional."""
    p, q = ctx.p, ctx.q
    nodes = mesh.nodes
    h = mesh.h

    def grad(u):
        return J_gradient(u, mesh, nl, p, q)

    def hess(u):
        sc = max(float(np.max(np.abs(u))), 1e-30)
        diag = np.zeros(mesh.n)
        off = np.zeros(mesh.n - 1)
        for r in (p, q):
            w = h ** (1.0 - r) * D._dphi(np.diff(u, prepend=0.0, append=0.0), r, sc)
            diag += w[:-1] + w[1:]
            off -= w[1:-1]
        diag -= h * nl.hprime(nodes, u)
        band = np.zeros((3, mesh.n))
        band[0, 1:] = off
        band[1, :] = diag
        band[2, :-1] = off
        return band

    target = tol_resid / math.sqrt(h)
    res = newton_root(values, grad, hess, tol=target, max_iter=100,
                      max_step=2.0 * max(float(np.max(np.abs(values))), 1.0))
    return res.x, res.converged


def find_nodal_negative(ctx: FunctionalContext, mesh: Mesh,
                        opts: NodalFlowOptions | None = None):
    """Negative-energy sign-changing solution by the truncated flow.

    Pipeline: positive solution from the untruncated flow, truncation at
    it, a low-energy path between the cones, bisection of the cone
    boundary with Newton polish of near-stall sign-changing iterates,
    then verification: sandwich bound, sign change, negative energy and
    weak residual of the original problem (inside the sandwich the
    truncated and original right-hand sides coincide).
    """
    if opts is None:
        opts = NodalFlowOptions()
    p, q = ctx.p, ctx.q
    lam = max(abs(ctx.alpha), abs(ctx.beta)) + 1.0

    # (1) positive solution
    phi_q = eigenfunction(1, q, mesh.T).phi(mesh.nodes)
    phi_q = phi_q / D.lump_norm_pow(DiscreteFunction(mesh, phi_q), q) ** (1.0 / q)
    seed = DiscreteFunction(mesh, opts.pos_seed_scale * phi_q)
    nl0 = untruncated(ctx)
    res_pos = descend(seed, nl0, lam, ctx, opts.flow)
    w1_vals = res_pos.state.eta.values
    if float(np.max(np.abs(w1_vals))) < 1e-10 * opts.pos_seed_scale:
        raise NoPositiveSolutionError("positive flow collapsed to zero")
    if res_pos.state.cone != "POS":
        raise NoPositiveSolutionError(f"positive flow left the cone: {res_pos.state.cone}")
    w1_vals, ok = _polish_critical(w1_vals, mesh, nl0, ctx, opts.newton_tol_resid)
    w1_resid = residual_norm(w1_vals, mesh, ctx)
    if not ok or np.min(w1_vals) <= 0.0 or w1_resid > opts.tol:
        raise NoPositiveSolutionError(
            f"positive solution rejected: min={np.min(w1_vals):.3e}, "
            f"residual={w1_resid:.3e}")
    w1 = DiscreteFunction(mesh, w1_vals)

    # (2) truncation at w1
    nl = truncate(w1, ctx, defect_rtol=1e-8)

    # (3) a path between the cones with negative truncated energy
    phi_2q = eigenfunction(2, q, mesh.T).phi(mesh.nodes)
    phi_2q = phi_2q / D.lump_norm_pow(DiscreteFunction(mesh, phi_2q), q) ** (1.0 / q)
    s_grid = np.linspace(0.0, 1.0, opts.path_points)
    t_amp = opts.path_t0
    for _ in range(40):
        worst = max(J_value(t_amp * (math.cos(math.pi * s) * phi_q
                                     + math.sin(math.pi * s) * phi_2q),
                            mesh, nl, p, q) for s in s_grid)
        if worst < 0.0:
            break
        t_amp *= 0.5
    else:
        raise BisectionExhaustedError(
            "no path amplitude with negative energy: beta too close to lambda_2(q)")

    def path_point(s: float) -> DiscreteFunction:
        return DiscreteFunction(mesh, t_amp * (math.cos(math.pi * s) * phi_q
                                               + math.sin(math.pi * s) * phi_2q))

    # (4) cone-boundary bisection
    def accept(values: np.ndarray):
        u = DiscreteFunction(mesh, values)
        if cone_of(values) != "MIXED" or count_nodal(u) < 2:
            return None
        resid = residual_norm(values, mesh, ctx)
        if resid > opts.tol:
            return None
        E = D.energy(u, ctx)
        if E >= 0.0:
            return None
        viol = float(max(np.max(values - w1_vals), np.max(-w1_vals - values), 0.0))
        report = NodalFlowReport(
            energy=E, residual=resid, nodal_domains=count_nodal(u),
            sandwich_violation=viol, J=J_value(values, mesh, nl, p, q),
            bisection_steps=steps_done, w1=w1, w1_residual=w1_resid)
        return u, report

    lo, hi = 0.0, 1.0
    steps_done = 0
    stash: list[np.ndarray] = []
    for steps_done in range(1, opts.max_bisection + 1):
        mid = 0.5 * (lo + hi)
        res = descend(path_point(mid), nl, lam, ctx, opts.flow)
        final = res.state.eta.values
        if res.min_gap_mixed is not None:
            stash.append(res.min_gap_mixed.values)
        cone = res.state.cone
        if cone == "MIXED":
            polished, ok = _polish_critical(final, mesh, nl, ctx, opts.newton_tol_resid)
            if ok:
                got = accept(polished)
                if got is not None:
                    return got
            if res.converged:
                got = accept(final)
                if got is not None:
                    return got
        # polish the best stalled sign-changing iterates every few levels
        if steps_done % 4 == 0 and stash:
            stash.sort(key=lambda v: float(np.linalg.norm(
                v - _solve_T_values(nl.h(mesh.nodes, v) + lam * _psi(v, p, q),
                                    lam, ctx, mesh, v, 1e-10))))
            for cand in stash[:2]:
                polished, ok = _polish_critical(cand, mesh, nl, ctx,
                                                opts.newton_tol_resid)
                if ok:
                    got = accept(polished)
                    if got is not None:
                        return got
            stash = stash[:4]
        if cone == "POS":
            lo = mid
        elif cone == "NEG":
            hi = mid
        else:
            # unresolved mixed limit: bias by the signed mass
            if float(np.sum(final)) >= 0.0:
                lo = mid
            else:
                hi = mid
    for cand in stash[:4]:
        polished, ok = _polish_critical(cand, mesh, nl, ctx, opts.newton_tol_resid)
        if ok:
            got = accept(polished)
            if got is not None:
                return got
    raise BisectionExhaustedError(
        f"no sign-changing limit within {opts.max_bisection} bisection steps")
