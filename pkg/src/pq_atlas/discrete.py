"""Uniform finite-difference discretization of the Dirichlet problem on (0, T).

Functions are stored by their interior nodal values; boundary values are
implicitly zero. Gradient seminorms use difference quotients over the
n+1 gaps, zeroth-order norms use lumped (rectangle) quadrature. Lumping
makes the plus/minus splitting identities exact for the zeroth-order
terms; the gradient terms pick up an O(h) defect at sign-change gaps,
which is a discretization artifact tested by its decay rate rather than
hidden.
"""

import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_NODAL_EPS = 1e-6
HESS_REG = 1e-10


@dataclass(frozen=True)
class Mesh:
    """Uniform interior mesh of (0, T) with n nodes and spacing T/(n+1)."""

    T: float
    n: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"interval length T must be positive, got {self.T}")
        if self.n < 3:
            raise ValueError(f"need at least 3 interior nodes, got {self.n}")

    @property
    def h(self) -> float:
        return self.T / (self.n + 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.h * np.arange(1, self.n + 1)


class DiscreteFunction:
    """Interior nodal values of a function in the discrete Dirichlet space."""

    __slots__ = ("mesh", "values")

    def __init__(self, mesh: Mesh, values):
        values = np.asarray(values, dtype=float).copy()
        if values.shape != (mesh.n,):
            raise ValueError(f"expected {mesh.n} interior values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite nodal values")
        values.setflags(write=False)
        self.mesh = mesh
        self.values = values

    @classmethod
    def from_callable(cls, mesh: Mesh, f) -> "DiscreteFunction":
        return cls(mesh, f(mesh.nodes))

    def plus(self) -> "DiscreteFunction":
        return DiscreteFunction(self.mesh, np.maximum(self.values, 0.0))

    def minus(self) -> "DiscreteFunction":
        return DiscreteFunction(self.mesh, np.maximum(-self.values, 0.0))

    def norm_inf(self) -> float:
        return float(np.max(np.abs(self.values))) if self.mesh.n else 0.0

    def __neg__(self) -> "DiscreteFunction":
        return DiscreteFunction(self.mesh, -self.values)

    def scaled(self, t: float) -> "DiscreteFunction":
        return DiscreteFunction(self.mesh, t * self.values)

    def to_csv(self, path) -> None:
        Path(path).write_text(to_csv_text(self))

    @classmethod
    def from_csv(cls, path, T: float | None = None) -> "DiscreteFunction":
        return from_csv_text(Path(path).read_text(), T=T)


def to_csv_text(u: DiscreteFunction) -> str:
    buf = io.StringIO()
    buf.write("t,u\n")
    for t, v in zip(u.mesh.nodes, u.values):
        buf.write(f"{t:.17g},{v:.17g}\n")
    return buf.getvalue()


def from_csv_text(text: str, T: float | None = None) -> DiscreteFunction:
    rows = [line for line in text.strip().splitlines()[1:] if line]
    ts = np.array([float(r.split(",")[0]) for r in rows])
    vs = np.array([float(r.split(",")[1]) for r in rows])
    h = ts[0]
    if T is None:
        T = h * (len(ts) + 1)
    return DiscreteFunction(Mesh(T=float(T), n=len(ts)), vs)


@dataclass(frozen=True)
class FunctionalContext:
    """Exponent pair with the two spectral parameters of the energy."""

    p: float
    q: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not (1.0 < self.q < self.p):
            raise ValueError(f"need 1 < q < p, got q={self.q}, p={self.p}")


@dataclass(frozen=True)
class FunctionalReport:
    H: float
    G: float
    E: float
    residual: float
    nodal_domains: int


def _diffs(values: np.ndarray) -> np.ndarray:
    """Gap differences including the two boundary gaps (zero boundary)."""
    return np.diff(values, prepend=0.0, append=0.0)


def grad_norm_pow(u: DiscreteFunction, r: float) -> float:
    """Discrete ||u'||_r^r: sum over gaps of |difference quotient|^r * h."""
    if not r > 1:
        raise ValueError(f"exponent must exceed 1, got {r}")
    h = u.mesh.h
    return float(np.sum(np.abs(_diffs(u.values)) ** r)) * h ** (1.0 - r)


def lump_norm_pow(u: DiscreteFunction, r: float) -> float:
    """Discrete ||u||_r^r by the lumped rectangle rule."""
    if not r > 1:
        raise ValueError(f"exponent must exceed 1, got {r}")
    return float(np.sum(np.abs(u.values) ** r)) * u.mesh.h


def _raw_H(values: np.ndarray, h: float, r: float, coef: float) -> float:
    grad = float(np.sum(np.abs(_diffs(values)) ** r)) * h ** (1.0 - r)
    mass = float(np.sum(np.abs(values) ** r)) * h
    return grad - coef * mass


def functional_H(u: DiscreteFunction, ctx: FunctionalContext) -> float:
    return _raw_H(u.values, u.mesh.h, ctx.p, ctx.alpha)


def functional_G(u: DiscreteFunction, ctx: FunctionalContext) -> float:
    return _raw_H(u.values, u.mesh.h, ctx.q, ctx.beta)


def energy(u: DiscreteFunction, ctx: FunctionalContext) -> float:
    return functional_H(u, ctx) / ctx.p + functional_G(u, ctx) / ctx.q


def _phi(x: np.ndarray, r: float) -> np.ndarray:
    """|x|^(r-2) x, continuous at 0 for r > 1."""
    return np.sign(x) * np.abs(x) ** (r - 1.0)


def _dphi(x: np.ndarray, r: float, scale: float) -> np.ndarray:
    """(r-1)|x|^(r-2), regularized near 0 for r < 2 (used only in Hessians)."""
    if r >= 2.0:
        return (r - 1.0) * np.abs(x) ** (r - 2.0)
    eps = HESS_REG * max(scale, 1e-30)
    return (r - 1.0) * (x * x + eps * eps) ** (0.5 * (r - 2.0))


def gradient_values(values: np.ndarray, mesh: Mesh, ctx: FunctionalContext) -> np.ndarray:
    """Componentwise partial derivatives of the discrete energy."""
    h = mesh.h
    out = np.zeros_like(values)
    for r, coef in ((ctx.p, ctx.alpha), (ctx.q, ctx.beta)):
        d = _diffs(values)
        fd = _phi(d, r)
        out += h ** (1.0 - r) * (fd[:-1] - fd[1:]) - coef * h * _phi(values, r)
    return out


def gradient(u: DiscreteFunction, ctx: FunctionalContext) -> DiscreteFunction:
    """Discrete gradient of the energy at u, as a nodal function."""
    return DiscreteFunction(u.mesh, gradient_values(u.values, u.mesh, ctx))


def hessian_banded(values: np.ndarray, mesh: Mesh, ctx: FunctionalContext) -> np.ndarray:
    """Tridiagonal Hessian of the discrete energy in solve_banded layout."""
    h = mesh.h
    n = mesh.n
    scale = float(np.max(np.abs(values))) if n else 1.0
    diag = np.zeros(n)
    off = np.zeros(n - 1)
    for r, coef in ((ctx.p, ctx.alpha), (ctx.q, ctx.beta)):
        w = h ** (1.0 - r) * _dphi(_diffs(values), r, scale)
        diag += w[:-1] + w[1:] - coef * h * _dphi(values, r, scale)
        off -= w[1:-1]
    band = np.zeros((3, n))
    band[0, 1:] = off
    band[1, :] = diag
    band[2, :-1] = off
    return band


def residual_norm(values: np.ndarray, mesh: Mesh, ctx: FunctionalContext) -> float:
    """Euclidean norm of the energy gradient scaled by h^(1/2).

    The scaling makes the number roughly mesh-independent, approximating
    a dual norm of the weak-form defect.
    """
    return float(np.linalg.norm(gradient_values(values, mesh, ctx))) * math.sqrt(mesh.h)


def count_nodal(u: DiscreteFunction, eps_rel: float = DEFAULT_NODAL_EPS) -> int:
    """Number of maximal same-sign runs of nodes, small values snapped to zero."""
    if not 0.0 < eps_rel < 0.5:
        raise ValueError(f"eps_rel must lie in (0, 0.5), got {eps_rel}")
    amp = u.norm_inf()
    if amp == 0.0:
        return 0
    signs = np.sign(np.where(np.abs(u.values) < eps_rel * amp, 0.0, u.values))
    count = 0
    prev = 0.0
    for s in signs:
        if s != 0.0 and s != prev:
            count += 1
        prev = s
    return count


def rayleigh(u: DiscreteFunction, r: float) -> float:
    """Discrete Rayleigh quotient ||u'||_r^r / ||u||_r^r."""
    denom = lump_norm_pow(u, r)
    if denom == 0.0:
        raise ZeroDivisionError("Rayleigh quotient of the zero function")
    return grad_norm_pow(u, r) / denom


def evaluate(u: DiscreteFunction, ctx: FunctionalContext,
             eps_rel: float = DEFAULT_NODAL_EPS) -> FunctionalReport:
    """Evaluate H, G, E, the weak-form residual and the nodal count at u."""
    H = functional_H(u, ctx)
    G = functional_G(u, ctx)
    return FunctionalReport(
        H=H, G=G, E=H / ctx.p + G / ctx.q,
        residual=residual_norm(u.values, u.mesh, ctx),
        nodal_domains=count_nodal(u, eps_rel))
