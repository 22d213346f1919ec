"""Command-line interface.

Commands mirror the library surface: `eig` and `ratio` for the exact
spectrum, `verify` for the two-exponent inequality sweep, `solve` for
one nodal solve (Nehari minimization or descending flow), `curve` for
the critical curves and `atlas` for the full region sweep. Artifacts are
CSV/JSON plus a rendered PNG per report; identical config and seed give
byte-identical CSV/JSON.

Exit codes: 0 success, 1 solver did not converge (artifacts still
written), 2 usage or configuration errors. Errors print a single
machine-parsable line `ERROR <code>: <detail>` on stderr.
"""

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import atlas as AT
from . import flow as FL
from . import nehari as NE
from . import spectral1d as S
from .discrete import DiscreteFunction, Mesh, evaluate, to_csv_text
from .gtrig import sine_table

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_USAGE = 2


def _fail(code: str, detail: str, status: int) -> int:
    sys.stderr.write(f"ERROR {code}: {detail}\n")
    return status


@dataclass
class RunConfig:
    p: float
    q: float
    T: float
    n: int
    tolerances: dict
    seed: int
    output_dir: Path

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        raw = json.loads(Path(path).read_text())
        cfg = cls(
            p=float(raw["p"]), q=float(raw["q"]), T=float(raw.get("T", 1.0)),
            n=int(raw.get("n", 400)),
            tolerances={k: float(v) for k, v in raw.get("tolerances", {}).items()},
            seed=int(raw.get("seed", 0)),
            output_dir=Path(raw.get("output_dir", "pq_atlas_out")))
        if not (1.0 < cfg.q < cfg.p):
            raise ValueError(f"config requires 1 < q < p, got q={cfg.q}, p={cfg.p}")
        if cfg.n < 3:
            raise ValueError(f"config requires n >= 3, got n={cfg.n}")
        if any(v <= 0 for v in cfg.tolerances.values()):
            raise ValueError("all tolerances must be positive")
        return cfg

    def tol(self, name: str, default: float) -> float:
        return self.tolerances.get(name, default)

    def mesh(self) -> Mesh:
        return Mesh(T=self.T, n=self.n)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# commands

def cmd_eig(args) -> int:
    if not args.r > 1.0:
        return _fail("USAGE", f"exponent r must satisfy r > 1, got {args.r}", EXIT_USAGE)
    if not args.T > 0 or args.k < 1:
        return _fail("USAGE", "need T > 0 and k >= 1", EXIT_USAGE)
    lam = S.eigenvalue(args.k, args.r, args.T)
    sys.stdout.write(f"{lam:.17g}\n")
    if args.samples:
        pair = S.eigenfunction(args.k, args.r, args.T)
        ts = np.linspace(0.0, args.T, args.samples)
        vals = pair.phi(ts)
        sys.stdout.write("t,u\n")
        for t, v in zip(ts, vals):
            sys.stdout.write(f"{t:.17g},{v:.17g}\n")
    return EXIT_OK


def cmd_ratio(cfg: RunConfig, args) -> int:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    rr = S.rayleigh_ratio(cfg.p, cfg.q, cfg.T)
    payload = {
        "p": cfg.p, "q": cfg.q, "T": cfg.T,
        "value": rr.value, "closed_form": rr.closed_form,
        "quadrature": rr.quadrature,
        "lambda_1_q": S.eigenvalue(1, cfg.q, cfg.T),
        "lambda_2_q": S.eigenvalue(2, cfg.q, cfg.T),
    }
    if args.alpha is not None:
        payload["alpha"] = args.alpha
        payload["beta_upper_star"] = S.beta_upper_star(args.alpha, cfg.p, cfg.q, cfg.T)
    _write_json(cfg.output_dir / "ratio.json", payload)
    sys.stdout.write(f"{rr.value:.17g}\n")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args) -> int:
    from .plotting import save_margins
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    grid = np.linspace(args.exp_min, args.exp_max, args.grid_points)
    report = S.verify_lemma_margins(grid, grid, cfg.T,
                                    margin_rtol=cfg.tol("margin", 1e-10))
    lines = ["p,q,ratio,lower_margin,upper_margin,sufficient_lhs,sufficient_rhs,ok"]
    for row in report.pairs:
        lines.append(f"{row.p:.17g},{row.q:.17g},{row.ratio:.17g},"
                     f"{row.lower_margin:.17g},{row.upper_margin:.17g},"
                     f"{row.sufficient_lhs:.17g},{row.sufficient_rhs:.17g},"
                     f"{int(row.ok)}")
    (cfg.output_dir / "margins.csv").write_text("\n".join(lines) + "\n")
    save_margins(report, cfg.output_dir / "margins.png")
    _write_json(cfg.output_dir / "verify.json", {
        "pairs": len(report.pairs),
        "all_ok": report.all_ok,
        "violations": len(report.violations()),
    })
    if not report.all_ok:
        return _fail("VERIFY", f"{len(report.violations())} pairs violate the margins",
                     EXIT_NOT_CONVERGED)
    return EXIT_OK


def cmd_solve(cfg: RunConfig, args) -> int:
    from .plotting import save_solution
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    mesh = cfg.mesh()
    ctx = AT.ProblemSetup(cfg.p, cfg.q, cfg.T, cfg.n).ctx(args.alpha, args.beta)
    tol = cfg.tol("resid", 1e-6)
    status = EXIT_OK
    solution = None
    report: dict = {"mode": args.mode, "alpha": args.alpha, "beta": args.beta,
                    "p": cfg.p, "q": cfg.q, "T": cfg.T, "n": cfg.n, "seed": cfg.seed}
    rng = np.random.default_rng(cfg.seed)
    try:
        if args.mode == "nehari":
            seeds = NE.default_sign_changing_seeds(cfg.p, cfg.q, mesh, rng)
            u, rep = NE.minimize_M1(ctx, seeds, NE.MinimizeOptions(tol_resid=tol))
            solution = u
            report.update(energy=rep.energy, residual=rep.residual,
                          nodal_domains=rep.nodal_domains,
                          subset=rep.classification.subset.value,
                          energy_identity_gap=rep.energy_identity_gap)
        else:
            u, rep = FL.find_nodal_negative(ctx, mesh, FL.NodalFlowOptions(tol=tol))
            solution = u
            report.update(energy=rep.energy, residual=rep.residual,
                          nodal_domains=rep.nodal_domains,
                          sandwich_violation=rep.sandwich_violation,
                          bisection_steps=rep.bisection_steps)
            (cfg.output_dir / "positive_solution.csv").write_text(to_csv_text(rep.w1))
    except NE.NotConvergedError as exc:
        status = EXIT_NOT_CONVERGED
        report["error"] = str(exc)
        solution = exc.best
        sys.stderr.write(f"ERROR NOT_CONVERGED: {exc}\n")
    except (NE.NoFeasibleSeedError, FL.NoPositiveSolutionError,
            FL.BisectionExhaustedError, FL.FlowNotConvergedError) as exc:
        status = EXIT_NOT_CONVERGED
        report["error"] = str(exc)
        sys.stderr.write(f"ERROR NOT_CONVERGED: {exc}\n")

    if solution is not None:
        (cfg.output_dir / "solution.csv").write_text(to_csv_text(solution))
        save_solution(solution, cfg.output_dir / "solution.png",
                      title=f"{args.mode} solution, alpha={args.alpha:g}, beta={args.beta:g}")
        rep_eval = evaluate(solution, ctx)
        report.setdefault("energy", rep_eval.E)
        report.setdefault("residual", rep_eval.residual)
        report.setdefault("nodal_domains", rep_eval.nodal_domains)
    _write_json(cfg.output_dir / "report.json", report)
    return status


def cmd_curve(cfg: RunConfig, args) -> int:
    from .plotting import save_curve
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    mesh = cfg.mesh()
    rng = np.random.default_rng(cfg.seed)
    grid = np.linspace(args.alpha_min, args.alpha_max, args.steps)
    if args.which == "beta_L":
        samples = NE.curve_beta_L(grid, cfg.p, cfg.q, mesh, rng=rng,
                                  cross_check=not args.no_cross_check,
                                  cross_rtol=cfg.tol("curve_cross", 1e-3))
    elif args.which == "beta_1":
        samples = NE.curve_beta_1(grid, cfg.p, cfg.q, mesh, rng=rng)
    else:
        samples = NE.curve_beta_2(grid, cfg.p, cfg.q, mesh, rng=rng)
    lines = ["alpha,value,status"]
    for s in samples:
        val = "inf" if s.value == math.inf else (
            "-inf" if s.value == -math.inf else f"{s.value:.17g}")
        lines.append(f"{s.alpha:.17g},{val},{s.status.value}")
    name = f"curve_{args.which}.csv"
    (cfg.output_dir / name).write_text("\n".join(lines) + "\n")
    save_curve(samples, args.which, cfg.output_dir / f"curve_{args.which}.png")
    if any(s.status == NE.CurveStatus.FAILED for s in samples):
        return _fail("NOT_CONVERGED", "some curve samples failed", EXIT_NOT_CONVERGED)
    return EXIT_OK


def cmd_atlas(cfg: RunConfig, args) -> int:
    from .plotting import save_region_map
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    setup = AT.ProblemSetup(cfg.p, cfg.q, cfg.T, cfg.n)
    alpha_max = args.alpha_max if args.alpha_max is not None else \
        2.0 * S.eigenvalue(3, cfg.p, cfg.T)
    beta_max = args.beta_max if args.beta_max is not None else \
        2.0 * S.eigenvalue(3, cfg.q, cfg.T)
    opts = AT.AtlasOptions(tol=cfg.tol("resid", 1e-6), seed=cfg.seed,
                           numerical_probe=args.numerical_probe)
    result = AT.sweep((args.alpha_min, alpha_max), (args.beta_min, beta_max),
                      (args.steps, args.steps), setup, opts,
                      workers=args.workers)
    AT.write_sweep_outputs(result, cfg.output_dir)
    save_region_map(result, cfg.output_dir / "region_map.png")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pq-atlas",
        description="1D spectral theory and nodal-solution atlas for the "
                    "two-parameter (p,q)-Laplace problem")
    sub = ap.add_subparsers(dest="command", required=True)

    eig = sub.add_parser("eig", help="exact eigenvalue / eigenfunction samples")
    eig.add_argument("--r", type=float, required=True)
    eig.add_argument("--T", type=float, required=True)
    eig.add_argument("--k", type=int, required=True)
    eig.add_argument("--samples", type=int, default=0)

    def with_config(p):
        p.add_argument("--config", required=True, help="path to a JSON RunConfig")
        return p

    ratio = with_config(sub.add_parser("ratio", help="mixed Rayleigh ratio report"))
    ratio.add_argument("--alpha", type=float, default=None,
                       help="also evaluate the upper critical value at alpha")

    verify = with_config(sub.add_parser(
        "verify", aliases=["verify-lemmas"],
        help="two-exponent eigenvalue inequality sweep"))
    verify.add_argument("--grid-points", type=int, default=8)
    verify.add_argument("--exp-min", type=float, default=1.25)
    verify.add_argument("--exp-max", type=float, default=6.0)

    solve = with_config(sub.add_parser("solve", help="one nodal solve"))
    solve.add_argument("--mode", choices=["nehari", "flow"], required=True)
    solve.add_argument("--alpha", type=float, required=True)
    solve.add_argument("--beta", type=float, required=True)

    curve = with_config(sub.add_parser("curve", help="critical curve samples"))
    curve.add_argument("--which", choices=["beta_L", "beta_1", "beta_2"],
                       required=True)
    curve.add_argument("--alpha-min", type=float, required=True)
    curve.add_argument("--alpha-max", type=float, required=True)
    curve.add_argument("--steps", type=int, default=30)
    curve.add_argument("--no-cross-check", action="store_true")

    atlas = with_config(sub.add_parser("atlas", help="region sweep"))
    atlas.add_argument("--alpha-min", type=float, default=0.0)
    atlas.add_argument("--alpha-max", type=float, default=None)
    atlas.add_argument("--beta-min", type=float, default=0.0)
    atlas.add_argument("--beta-max", type=float, default=None)
    atlas.add_argument("--steps", type=int, default=40)
    atlas.add_argument("--workers", type=int, default=None,
                       help="overrides PQ_ATLAS_THREADS")
    atlas.add_argument("--numerical-probe", action="store_true",
                       help="attempt solvers outside theorem regions "
                            "(verdicts tagged numerical-only)")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    if args.command == "eig":
        return cmd_eig(args)
    try:
        cfg = RunConfig.load(args.config)
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        return _fail("CONFIG", str(exc), EXIT_USAGE)
    handlers = {"ratio": cmd_ratio, "verify": cmd_verify,
                "verify-lemmas": cmd_verify, "solve": cmd_solve,
                "curve": cmd_curve, "atlas": cmd_atlas}
    return handlers[args.command](cfg, args)


if __name__ == "__main__":
    sys.exit(main())
