"""Classification of the (alpha, beta)-plane into nodal-solution regions.

Rules are applied in a fixed order: the 1D nonexistence block, the
positive-energy region below the lower critical curve (certified by the
Nehari minimizer), the negative-energy region above the relevant
spectral thresholds (certified by the descending flow), and UNKNOWN
otherwise. Existence verdicts always carry a certified solution;
nonexistence is only ever issued by the theorem rule, never inferred
from solver failure.
"""

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import flow as FL
from . import nehari as NE
from .discrete import DiscreteFunction, FunctionalContext, Mesh, evaluate, to_csv_text
from .nehari import CurveSample, CurveStatus
from .spectral1d import beta_upper_star, eigenvalue, k_alpha, rayleigh_ratio


class Verdict(str, Enum):
    NONEXISTENT = "NONEXISTENT"
    EXISTS_POS_ENERGY = "EXISTS_POS_ENERGY"
    EXISTS_NEG_ENERGY = "EXISTS_NEG_ENERGY"
    UNKNOWN = "UNKNOWN"


@dataclass(frozen=True)
class ProblemSetup:
    """Fixed data of one classification run."""

    p: float
    q: float
    T: float
    n: int

    def mesh(self) -> Mesh:
        return Mesh(T=self.T, n=self.n)

    def ctx(self, alpha: float, beta: float) -> FunctionalContext:
        return FunctionalContext(p=self.p, q=self.q, alpha=alpha, beta=beta)


@dataclass
class AtlasOptions:
    tol: float = 1e-6
    seed: int = 0
    nehari_seed_count: int = 4
    flow_max_steps: int = 600
    flow_max_bisection: int = 24
    numerical_probe: bool = False


@dataclass
class RegionVerdict:
    alpha: float
    beta: float
    verdict: Verdict
    rule: str
    certificate_path: str = ""
    energy: float = math.nan
    residual: float = math.nan
    nodal_domains: int = 0
    diagnostics: str = ""
    solution: DiscreteFunction | None = field(default=None, repr=False, compare=False)


def conservative_beta_L(alpha: float, curve: list[CurveSample]) -> float:
    """Piecewise-linear lower envelope of the curve samples at alpha.

    Uses the smaller neighboring sample so that the membership claim
    beta < beta_L(alpha) is never granted by interpolation optimism;
    outside the sampled range the nearest sample applies (the curve is
    nonincreasing, so the right end stays conservative).
    """
    alphas = [s.alpha for s in curve]
    values = [s.value for s in curve]
    if not alphas:
        return -math.inf
    if alpha < alphas[0]:
        return -math.inf if math.isfinite(values[0]) else math.inf
    for i in range(len(alphas) - 1):
        if alphas[i] <= alpha <= alphas[i + 1]:
            return min(values[i], values[i + 1])
    return values[-1]


def _try_nehari(ctx: FunctionalContext, mesh: Mesh, rng, opts: AtlasOptions):
    seeds = NE.default_sign_changing_seeds(ctx.p, ctx.q, mesh, rng,
                                           count=opts.nehari_seed_count)
    mopts = NE.MinimizeOptions(tol_resid=opts.tol)
    u, rep = NE.minimize_M1(ctx, seeds, mopts)
    if rep.energy <= 0.0 or rep.nodal_domains != 2 or rep.residual > opts.tol:
        raise NE.NotConvergedError(
            f"certificate rejected: E={rep.energy:.3e}, "
            f"nodal={rep.nodal_domains}, resid={rep.residual:.3e}")
    return u, rep


def _try_flow(ctx: FunctionalContext, mesh: Mesh, opts: AtlasOptions):
    fopts = FL.NodalFlowOptions(
        tol=opts.tol,
        flow=FL.FlowOptions(max_steps=opts.flow_max_steps),
        max_bisection=opts.flow_max_bisection)
    return FL.find_nodal_negative(ctx, mesh, fopts)


def classify(alpha: float, beta: float, setup: ProblemSetup,
             curve: list[CurveSample], opts: AtlasOptions | None = None,
             rng=None) -> RegionVerdict:
    """Region verdict for one parameter pair, certificates attached.

    Solver failures in the existence regions degrade to UNKNOWN with a
    diagnostic message; they never produce NONEXISTENT.
    """
    if opts is None:
        opts = AtlasOptions()
    if rng is None:
        rng = np.random.default_rng([opts.seed, 0, 0])
    p, q, T = setup.p, setup.q, setup.T
    lam2p = eigenvalue(2, p, T)
    lam2q = eigenvalue(2, q, T)

    # rule 1: one-dimensional nonexistence block
    if alpha <= lam2p and beta <= lam2q:
        return RegionVerdict(alpha, beta, Verdict.NONEXISTENT, "nonexist-1d")

    mesh = setup.mesh()

    # rule 2: positive-energy nodal region below the lower critical curve
    if alpha > lam2p and beta < conservative_beta_L(alpha, curve):
        ctx = setup.ctx(alpha, beta)
        try:
            u, rep = _try_nehari(ctx, mesh, rng, opts)
            return RegionVerdict(alpha, beta, Verdict.EXISTS_POS_ENERGY,
                                 "nehari-positive-energy",
                                 energy=rep.energy, residual=rep.residual,
                                 nodal_domains=rep.nodal_domains, solution=u)
        except (NE.NoFeasibleSeedError, NE.NotConvergedError) as exc:
            return RegionVerdict(alpha, beta, Verdict.UNKNOWN, "nehari-failed",
                                 diagnostics=str(exc))

    # rule 3: negative-energy region; the spectral-closure hypothesis is
    # automatic in 1D, so only the beta condition is checked
    if beta > lam2q:
        bu = beta_upper_star(alpha, p, q, T)
        threshold = max(bu, eigenvalue(k_alpha(alpha, p, T) + 1, q, T))
        if alpha < lam2p or beta > threshold:
            ctx = setup.ctx(alpha, beta)
            try:
                u, rep = _try_flow(ctx, mesh, opts)
                return RegionVerdict(alpha, beta, Verdict.EXISTS_NEG_ENERGY,
                                     "flow-negative-energy",
                                     energy=rep.energy, residual=rep.residual,
                                     nodal_domains=rep.nodal_domains, solution=u)
            except (FL.NoPositiveSolutionError, FL.BisectionExhaustedError,
                    FL.FlowNotConvergedError) as exc:
                return RegionVerdict(alpha, beta, Verdict.UNKNOWN, "flow-failed",
                                     diagnostics=str(exc))

    # rule 4: no applicable theorem; optional numerical-only probe
    if opts.numerical_probe:
        ctx = setup.ctx(alpha, beta)
        try:
            u, rep = _try_nehari(ctx, mesh, rng, opts)
            return RegionVerdict(alpha, beta, Verdict.EXISTS_POS_ENERGY,
                                 "numerical-only",
                                 energy=rep.energy, residual=rep.residual,
                                 nodal_domains=rep.nodal_domains, solution=u)
        except (NE.NoFeasibleSeedError, NE.NotConvergedError):
            pass
        try:
            u, rep = _try_flow(ctx, mesh, opts)
            return RegionVerdict(alpha, beta, Verdict.EXISTS_NEG_ENERGY,
                                 "numerical-only",
                                 energy=rep.energy, residual=rep.residual,
                                 nodal_domains=rep.nodal_domains, solution=u)
        except (FL.NoPositiveSolutionError, FL.BisectionExhaustedError,
                FL.FlowNotConvergedError):
            pass
    return RegionVerdict(alpha, beta, Verdict.UNKNOWN, "no-theorem")


# ---------------------------------------------------------------------------
# grid sweep

@dataclass
class SweepResult:
    setup: ProblemSetup
    alphas: np.ndarray
    betas: np.ndarray
    verdicts: list[RegionVerdict]
    curve_beta_L: list[CurveSample]
    summary: dict


_WORKER_STATE: dict = {}


def _init_worker(setup, curve, opts):
    _WORKER_STATE["setup"] = setup
    _WORKER_STATE["curve"] = curve
    _WORKER_STATE["opts"] = opts


def _classify_cell(payload):
    i, j, alpha, beta = payload
    setup = _WORKER_STATE["setup"]
    curve = _WORKER_STATE["curve"]
    opts = _WORKER_STATE["opts"]
    rng = np.random.default_rng([opts.seed, i, j])
    v = classify(alpha, beta, setup, curve, opts, rng=rng)
    sol = v.solution.values if v.solution is not None else None
    return (i, j, v.verdict.value, v.rule, v.energy, v.residual,
            v.nodal_domains, v.diagnostics, sol)


def worker_count() -> int:
    env = os.environ.get("PQ_ATLAS_THREADS", "0")
    try:
        cap = int(env)
    except ValueError:
        cap = 0
    if cap <= 0:
        cap = os.cpu_count() or 1
    return cap


def sweep(alpha_range, beta_range, resolution, setup: ProblemSetup,
          opts: AtlasOptions | None = None,
          curve: list[CurveSample] | None = None,
          workers: int | None = None) -> SweepResult:
    """Classify a full parameter grid; cells are independent workers.

    Results are assembled by cell index, so the output is deterministic
    regardless of scheduling. The lower critical curve is computed once
    on the sweep's own alpha grid (no interpolation at the cells).
    """
    if opts is None:
        opts = AtlasOptions()
    na, nb = (resolution, resolution) if np.isscalar(resolution) else resolution
    alphas = np.linspace(alpha_range[0], alpha_range[1], na)
    betas = np.linspace(beta_range[0], beta_range[1], nb)
    mesh = setup.mesh()
    if curve is None:
        rng = np.random.default_rng([opts.seed, 7])
        curve = NE.curve_beta_L(alphas, setup.p, setup.q, mesh,
                                cross_check=False, rng=rng)
    payloads = [(i, j, float(a), float(b))
                for i, a in enumerate(alphas) for j, b in enumerate(betas)]
    nworkers = workers if workers is not None else worker_count()
    results = {}
    if nworkers <= 1:
        _init_worker(setup, curve, opts)
        for pl in payloads:
            out = _classify_cell(pl)
            results[(out[0], out[1])] = out
    else:
        with ProcessPoolExecutor(max_workers=nworkers, initializer=_init_worker,
                                 initargs=(setup, curve, opts)) as pool:
            for out in pool.map(_classify_cell, payloads, chunksize=8):
                results[(out[0], out[1])] = out

    verdicts = []
    counts = {v.value: 0 for v in Verdict}
    for i, a in enumerate(alphas):
        for j, b in enumerate(betas):
            _, _, verd, rule, energy, resid, nodal, diag, sol = results[(i, j)]
            rv = RegionVerdict(float(a), float(b), Verdict(verd), rule,
                               energy=energy, residual=resid,
                               nodal_domains=nodal, diagnostics=diag,
                               solution=DiscreteFunction(mesh, sol) if sol is not None else None)
            counts[verd] += 1
            verdicts.append(rv)
    summary = {
        "p": setup.p, "q": setup.q, "T": setup.T, "n": setup.n,
        "alpha_range": [float(alphas[0]), float(alphas[-1])],
        "beta_range": [float(betas[0]), float(betas[-1])],
        "grid": [int(na), int(nb)],
        "counts": counts,
        "workers": nworkers,
        "seed": opts.seed,
    }
    return SweepResult(setup=setup, alphas=alphas, betas=betas,
                       verdicts=verdicts, curve_beta_L=curve, summary=summary)


def spectrum_overlays(setup: ProblemSetup, alpha_max: float, beta_max: float) -> dict:
    """Eigenvalue gridlines and upper-critical markers for the region map."""
    p, q, T = setup.p, setup.q, setup.T
    lam_p = []
    k = 1
    while eigenvalue(k, p, T) <= alpha_max:
        lam_p.append(eigenvalue(k, p, T))
        k += 1
    lam_q = []
    k = 1
    while eigenvalue(k, q, T) <= beta_max:
        lam_q.append(eigenvalue(k, q, T))
        k += 1
    ratio = rayleigh_ratio(p, q, T).value
    markers = [(lam, (k + 1) ** q * ratio) for k, lam in enumerate(lam_p)
               if (k + 1) ** q * ratio <= beta_max]
    return {"lambda_p": lam_p, "lambda_q": lam_q, "beta_upper_markers": markers}


def write_sweep_outputs(result: SweepResult, outdir) -> dict:
    """Write the verdict CSV, JSON summary, curve CSV and certificates."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cert_dir = outdir / "certificates"
    lines = ["alpha,beta,verdict,rule,certificate_path,energy,residual,nodal_domains"]
    for idx, v in enumerate(result.verdicts):
        cert = ""
        if v.solution is not None:
            cert_dir.mkdir(exist_ok=True)
            cert = f"certificates/cell_{idx:05d}.csv"
            (outdir / cert).write_text(to_csv_text(v.solution))
            v.certificate_path = cert
        energy = f"{v.energy:.17g}" if math.isfinite(v.energy) else ""
        resid = f"{v.residual:.17g}" if math.isfinite(v.residual) else ""
        lines.append(f"{v.alpha:.17g},{v.beta:.17g},{v.verdict.value},{v.rule},"
                     f"{cert},{energy},{resid},{v.nodal_domains}")
    (outdir / "atlas.csv").write_text("\n".join(lines) + "\n")

    curve_lines = ["alpha,value,status"]
    for s in result.curve_beta_L:
        val = "inf" if s.value == math.inf else ("-inf" if s.value == -math.inf
                                                 else f"{s.value:.17g}")
        curve_lines.append(f"{s.alpha:.17g},{val},{s.status.value}")
    (outdir / "curve_beta_L.csv").write_text("\n".join(curve_lines) + "\n")

    (outdir / "summary.json").write_text(
        json.dumps(result.summary, indent=2, sort_keys=True) + "\n")
    return {"atlas": str(outdir / "atlas.csv"),
            "summary": str(outdir / "summary.json"),
            "curve": str(outdir / "curve_beta_L.csv")}
