"""Constants and right-hand sides of the local and global gradient estimates.

The estimated quantity is

    beta |grad f|^2 / f^2 + rho / k - theta / (k f^2),

which equals ``L / k^2`` for ``L = beta |grad u|^2 + k rho - k theta e^{-2u/k}``
and ``u = k log f``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import EmptyAdmissibleSet, MissingM, NonPositiveInput, ParamOutOfRange
from .geometry import (
    ScalarProfile,
    bakry_emery_lower_bound,
    drift_laplacian,
    origin_for,
    radial_derivative,
)
from .warpfield import SolitonInstance, instance_residual

INF = math.inf
SOLUTION_TOL = 1e-6


def beta_window(k: int) -> tuple[float, float]:
    """Open interval of admissible ``beta`` for fiber dimension ``k``."""
    return max(0.0, 1.0 - 2.0 / k), 1.0


@dataclass(frozen=True)
class EstimateParams:
    """Inputs to the estimate constants.

    ``K``, ``gamma`` and ``M`` may be left as ``None`` and are then certified
    from the instance data by :func:`local_estimate` / :func:`global_estimate`.
    ``R = math.inf`` selects the global form, in which ``c1`` and ``c2`` are
    ignored.
    """

    n: int
    m: float
    k: int
    beta: float
    eps: float
    theta: float = 0.0
    K: float | None = 0.0
    gamma: float | None = 0.0
    c1: float = 1.0
    c2: float = 1.0
    R: float = 1.0
    M: float | None = None

    def __post_init__(self):
        lo, hi = beta_window(self.k)
        if not (lo < self.beta < hi):
            raise ParamOutOfRange(
                f"beta = {self.beta} outside the admissible window ({lo:g}, 1) for k = {self.k}"
            )
        if not (0.0 < self.eps < 1.0):
            raise ParamOutOfRange(f"eps = {self.eps} must lie in (0, 1)")
        if self.n < 1 or self.k < 1 or not self.m > 0:
            raise ParamOutOfRange("need n >= 1, k >= 1 and m > 0")
        for name in ("K", "gamma", "M"):
            value = getattr(self, name)
            if value is not None and not value >= 0:
                raise ParamOutOfRange(f"{name} = {value} must be >= 0")
        if not self.R > 0:
            raise ParamOutOfRange(f"R = {self.R} must be > 0")
        if math.isfinite(self.R) and not (self.c1 > 0 and self.c2 > 0):
            raise ParamOutOfRange("cutoff constants c1, c2 must be > 0")

    @property
    def is_global(self) -> bool:
        return math.isinf(self.R)

    def with_(self, **changes) -> "EstimateParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class ConstantsBundle:
    H: float
    P: float
    Q: float
    S: float
    M: float | None

    def as_dict(self) -> dict:
        return {"H": self.H, "P": self.P, "Q": self.Q, "S": self.S, "M": self.M}


def _require_resolved(params: EstimateParams) -> None:
    if params.K is None or params.gamma is None:
        raise ParamOutOfRange("K and gamma must be resolved before computing constants")


def compute_constants(params: EstimateParams) -> ConstantsBundle:
    _require_resolved(params)
    n, m, k = params.n, params.m, params.k
    beta, eps, K, gamma, theta = params.beta, params.eps, params.K, params.gamma, params.theta
    nm = n + m
    if params.is_global:
        H = P = 0.0
    else:
        R, c1, c2 = params.R, params.c1, params.c2
        H = ((n - 1 + R * math.sqrt(n * K)) * c1 + c2 + 2 * c1**2) / R**2
        P = nm * c1**2 / (4 * R**2 * beta * (1 - beta)) + H
    gradient_part = nm / 4 * (k * gamma) ** 4 * (1 - beta) ** 2 / beta**4 / eps
    Q = 1.5 * beta * gradient_part ** (1.0 / 3.0) + nm / 2 * beta / (1 - eps) / (1 - beta) ** 2 * K**2
    M = params.M
    if theta == 0:
        S = 0.0
    elif M is None:
        if theta > 0:
            raise MissingM("theta > 0 needs M = sup f^-2")
        S = 0.0
    else:
        tilt = M * theta * (beta - 1 + 2 / k) / beta
        S = beta * nm / (2 * (1 - eps) * (1 - beta) ** 2) * (tilt**2 + 2 * K * tilt)
    return ConstantsBundle(H=H, P=P, Q=Q, S=S, M=M)


def rhs_value(params: EstimateParams, constants: ConstantsBundle | None = None) -> float:
    """Right-hand side for the branch selected by ``theta`` and ``R``."""
    c = constants or compute_constants(params)
    nm, k, beta, theta = params.n + params.m, params.k, params.beta, params.theta
    root = math.sqrt(nm / (2 * beta * k**4))
    if theta < 0:
        return nm * c.P / (k**2 * beta) + root * math.sqrt(c.Q)
    M = c.M or 0.0
    return nm * (c.P + 2 * theta * M) / (k**2 * beta) + root * math.sqrt(c.Q + c.S)


def pre_substitution_rhs(params: EstimateParams, constants: ConstantsBundle | None = None) -> float:
    """The bound on ``L`` itself, before dividing by ``k^2``."""
    c = constants or compute_constants(params)
    nm, beta, theta = params.n + params.m, params.beta, params.theta
    if theta < 0:
        return nm / beta * c.P + math.sqrt(nm / (2 * beta)) * math.sqrt(c.Q)
    M = c.M or 0.0
    return nm / beta * (c.P + 2 * theta * M) + math.sqrt(nm / (2 * beta)) * math.sqrt(c.Q + c.S)


def sup_inverse_f_sq(f: ScalarProfile, region=None) -> float:
    r_a, r_b = region if region is not None else (-INF, INF)
    mask = f.grid.mask(r_a, r_b)
    values = f.values[mask]
    if values.size == 0:
        raise NonPositiveInput("region contains no grid nodes")
    if np.any(values <= 0):
        raise NonPositiveInput("f must be positive on the region")
    return float(np.max(1.0 / values**2))


def lhs_quantity(instance: SolitonInstance, beta: float, drop_theta: bool = False) -> ScalarProfile:
    base, f, k = instance.base, instance.f, instance.k
    df = radial_derivative(base, f, 1, origin_for(base))
    fv = f.values
    out = beta * df**2 / fv**2 + instance.rho_B.values / k
    if not drop_theta:
        out = out - instance.theta / (k * fv**2)
    return ScalarProfile(base.grid, out, "lhs")


@dataclass(frozen=True)
class Hypotheses:
    """Hypotheses of the estimates, measured from the data on a region."""

    region: tuple[float, float]
    K: float
    gamma: float
    min_lap_rho: float
    lap_rho_ok: bool
    covers_region: bool

    def as_dict(self) -> dict:
        return {
            "region": list(self.region),
            "K": self.K,
            "gamma": self.gamma,
            "min_lap_rho": self.min_lap_rho,
            "lap_rho_ok": self.lap_rho_ok,
            "covers_region": self.covers_region,
        }


def certify_hypotheses(instance: SolitonInstance, radius: float = INF, tol: float = 1e-6) -> Hypotheses:
    """Curvature bound, |grad rho| bound and the sign of lap_h rho on B(p, radius)."""
    base = instance.base
    grid = base.grid
    r_b = min(radius, grid.r_max)
    mask = grid.mask(grid.r_min, r_b)
    origin = origin_for(base)
    K = bakry_emery_lower_bound(base, (grid.r_min, r_b), origin)
    drho = radial_derivative(base, instance.rho_B, 1, origin)
    gamma = float(np.max(np.abs(drho[mask])))
    lap_rho = drift_laplacian(base, instance.rho_B, origin).values[mask]
    min_lap = float(np.min(lap_rho))
    scale = max(1.0, float(np.max(np.abs(instance.rho_B.values[mask]))))
    return Hypotheses(
        region=(grid.r_min, r_b),
        K=K,
        gamma=gamma,
        min_lap_rho=min_lap,
        lap_rho_ok=min_lap >= -tol * scale,
        covers_region=radius <= grid.r_max + 1e-12,
    )


@dataclass(frozen=True, eq=False)
class BoundReport:
    r: np.ndarray
    lhs: np.ndarray
    rhs: float
    margin_min: float
    passed: bool
    witness: float
    branch: str
    tolerance: float
    constants: ConstantsBundle
    params: EstimateParams
    hypotheses: Hypotheses | None = None
    residual_max: float = 0.0
    is_solution: bool = True
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def theorem_applicable(self) -> bool:
        h = self.hypotheses
        if h is None:
            return self.is_solution
        tol = 1e-6
        return (
            self.is_solution
            and h.lap_rho_ok
            and self.params.K >= h.K - tol
            and self.params.gamma >= h.gamma - tol
        )

    def summary(self) -> dict:
        return {
            "branch": self.branch,
            "rhs": self.rhs,
            "lhs_max": float(np.max(self.lhs)),
            "margin_min": self.margin_min,
            "pass": self.passed,
            "witness_r": self.witness,
            "tolerance": self.tolerance,
            "is_solution": self.is_solution,
            "residual_max": self.residual_max,
            "theorem_applicable": self.theorem_applicable,
            "constants": self.constants.as_dict(),
            "hypotheses": None if self.hypotheses is None else self.hypotheses.as_dict(),
            "notes": list(self.notes),
        }


def pass_tolerance(rhs: float) -> float:
    return 1e-6 * max(1.0, abs(rhs))


def _make_report(instance, params, constants, rhs, lhs, mask, branch, hyp, notes):
    r = instance.base.grid.nodes[mask]
    lhs_vals = lhs.values[mask]
    margins = rhs - lhs_vals
    worst = int(np.argmin(margins))
    tol = pass_tolerance(rhs)
    res = instance_residual(instance, origin=origin_for(instance.base)).values[1:-1]
    residual_max = float(np.max(np.abs(res)))
    is_solution = residual_max < SOLUTION_TOL
    if not is_solution:
        notes = notes + ("not-a-solution",)
    return BoundReport(
        r=r,
        lhs=lhs_vals,
        rhs=float(rhs),
        margin_min=float(margins[worst]),
        passed=bool(margins[worst] >= -tol),
        witness=float(r[worst]),
        branch=branch,
        tolerance=tol,
        constants=constants,
        params=params,
        hypotheses=hyp,
        residual_max=residual_max,
        is_solution=is_solution,
        notes=notes,
    )


def _resolve(params, hyp):
    changes = {}
    if params.K is None:
        changes["K"] = hyp.K
    if params.gamma is None:
        changes["gamma"] = hyp.gamma
    return params.with_(**changes) if changes else params


def local_estimate(instance: SolitonInstance, params: EstimateParams) -> BoundReport:
    """Check the local estimate on B(p, R).

    ``M`` (needed only for ``theta > 0``) defaults to the sup of ``f^-2``
    over B(p, 2R), which must then be covered by the grid.
    """
    if params.is_global:
        raise ParamOutOfRange("local_estimate needs a finite R; use global_estimate")
    _check_consistent(instance, params)
    grid = instance.base.grid
    hyp = certify_hypotheses(instance, 2 * params.R)
    params = _resolve(params, hyp)
    notes: tuple[str, ...] = ()
    if not hyp.covers_region:
        notes += ("grid-does-not-cover-B(p,2R)",)
    if params.theta > 0 and params.M is None:
        if not hyp.covers_region:
            raise MissingM("theta > 0 needs M, and the grid does not cover B(p, 2R)")
        params = params.with_(M=sup_inverse_f_sq(instance.f, (grid.r_min, 2 * params.R)))
    constants = compute_constants(params)
    rhs = rhs_value(params, constants)
    branch = "theta<0" if params.theta < 0 else "theta>=0"
    lhs = lhs_quantity(instance, params.beta)
    mask = grid.mask(grid.r_min, params.R)
    return _make_report(instance, params, constants, rhs, lhs, mask, branch, hyp, notes)


def global_estimate(instance: SolitonInstance, params: EstimateParams) -> BoundReport:
    """Check the global estimate (R = infinity) over the whole grid."""
    if not params.is_global:
        params = params.with_(R=INF)
    _check_consistent(instance, params)
    hyp = certify_hypotheses(instance, INF)
    params = _resolve(params, hyp)
    if params.theta > 0 and params.M is None:
        params = params.with_(M=sup_inverse_f_sq(instance.f))
        if not math.isfinite(params.M):
            raise MissingM("theta > 0 needs f bounded away from zero")
    constants = compute_constants(params)
    if params.theta < 0:
        branch = "theta<0"
    elif params.theta == 0:
        branch = "theta=0"
    else:
        branch = "theta>0"
    rhs = rhs_value(params, constants)
    lhs = lhs_quantity(instance, params.beta, drop_theta=params.theta == 0)
    mask = np.ones(instance.base.grid.count, dtype=bool)
    return _make_report(instance, params, constants, rhs, lhs, mask, branch, hyp, ())


def _check_consistent(instance, params):
    if params.k != instance.k or params.theta != instance.theta or params.n != instance.base.n:
        raise ParamOutOfRange("estimate parameters (n, k, theta) do not match the instance")


@dataclass(frozen=True)
class SweepResult:
    beta: float
    eps: float
    rhs: float
    table: tuple[tuple[float, float, float], ...]


def optimize_rhs(instance: SolitonInstance, params: EstimateParams,
                 beta_grid: Sequence[float], eps_grid: Sequence[float]) -> SweepResult:
    """Exhaustive grid minimisation of the applicable right-hand side.

    Inadmissible grid points are skipped.  Ties go to the lexicographically
    smallest ``(beta, eps)``.
    """
    grid = instance.base.grid
    radius = params.R if params.is_global else 2 * params.R
    hyp = certify_hypotheses(instance, radius)
    params = _resolve(params, hyp)
    if params.theta > 0 and params.M is None:
        region = None if params.is_global else (grid.r_min, 2 * params.R)
        params = params.with_(M=sup_inverse_f_sq(instance.f, region))
    lo, hi = beta_window(params.k)
    table = []
    best = None
    for beta in sorted(beta_grid):
        if not lo < beta < hi:
            continue
        for eps in sorted(eps_grid):
            if not 0 < eps < 1:
                continue
            trial = params.with_(beta=float(beta), eps=float(eps))
            value = rhs_value(trial)
            table.append((float(beta), float(eps), value))
            if best is None or value < best[2]:
                best = (float(beta), float(eps), value)
    if best is None:
        raise EmptyAdmissibleSet(
            f"no (beta, eps) grid point lies in ({lo:g}, 1) x (0, 1)"
        )
    return SweepResult(best[0], best[1], best[2], tuple(table))
