"""Numerical certificates for the inequalities behind the gradient estimates.

Each check evaluates both sides of one inequality on grid data and returns
the margin ``lhs - rhs`` (or ``rhs - lhs`` for upper bounds) so that a
non-negative margin means the inequality holds at that node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import GridMismatch, NotASolution, ParamOutOfRange, UnsupportedFamily
from .geometry import (
    ModelBase,
    ScalarProfile,
    bakry_emery_lower_bound,
    drift_laplacian,
    origin_for,
    radial_derivative,
)
from .warpfield import SolitonInstance, instance_residual

FAMILIES = ("quartic-poly", "cos4", "smooth-bump")
CERTIFICATION_SAMPLES = 10_000
INFLATION = 1.01


def _bump(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _bump_d(t, order):
    t = np.asarray(t, dtype=float)
    g = _bump(t)
    safe = np.where(t > 0, t, 1.0)
    if order == 1:
        return np.where(t > 0, g / safe**2, 0.0)
    return np.where(t > 0, g * (1.0 / safe**4 - 2.0 / safe**3), 0.0)


def _transition(family, s):
    """(xi, xi', xi'') on the transition zone, as functions of s = r/R - 1."""
    if family == "quartic-poly":
        return (1 - s * s) ** 2, -4 * s * (1 - s * s), -4 + 12 * s * s
    if family == "cos4":
        c, sn = np.cos(np.pi * s / 2), np.sin(np.pi * s / 2)
        return c**4, -2 * np.pi * c**3 * sn, -np.pi**2 * (c**4 - 3 * c**2 * sn**2)
    a, b = _bump(1 - s), _bump(s)
    da, db = -_bump_d(1 - s, 1), _bump_d(s, 1)
    d2a, d2b = _bump_d(1 - s, 2), _bump_d(s, 2)
    total = a + b
    num = da * b - a * db
    dnum = d2a * b - a * d2b
    xi = a / total
    dxi = num / total**2
    d2xi = (dnum * total - 2 * num * (da + db)) / total**3
    return xi, dxi, d2xi


def cutoff_values(family: str, t):
    """(xi, xi', xi'') at ``t >= 0``: 1 on [0, 1], the transition on [1, 2], 0 beyond."""
    if family not in FAMILIES:
        raise UnsupportedFamily(f"cutoff family {family!r} not in {FAMILIES}")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    xi, dxi, d2xi = np.ones_like(t), np.zeros_like(t), np.zeros_like(t)
    zone = (t > 1) & (t < 2)
    if np.any(zone):
        x, d1, d2 = _transition(family, t[zone] - 1.0)
        xi[zone], dxi[zone], d2xi[zone] = x, d1, d2
    xi[t >= 2] = 0.0
    return xi, dxi, d2xi


@dataclass(frozen=True)
class CutoffSpec:
    family: str
    c1_certified: float
    c2_certified: float
    samples: np.ndarray
    R: float = 1.0
    # Both polynomial-type families are only C^1 at t = 1 (and quartic at t = 2);
    # second-derivative checks skip those joints.
    joints: tuple[float, float] = (1.0, 2.0)

    def psi(self, r):
        return cutoff_values(self.family, np.asarray(r) / self.R)


def build_cutoff(family: str, R: float = 1.0, samples: int = CERTIFICATION_SAMPLES) -> CutoffSpec:
    """Certify ``(c1, c2)`` for ``family`` by sampling its transition zone.

    ``c1 = max |xi'/sqrt(xi)|`` (terminal node excluded, where the ratio is a
    one-sided limit) and ``c2 = max(0, -min xi'')`` (joint nodes excluded),
    both inflated by 1%.
    """
    if family not in FAMILIES:
        raise UnsupportedFamily(f"cutoff family {family!r} not in {FAMILIES}")
    if not R > 0:
        raise ParamOutOfRange("R must be > 0")
    s = np.linspace(0.0, 1.0, samples + 1)
    xi, dxi, d2xi = _transition(family, s)
    inner = slice(1, -1)
    body = xi[:-1] > 0
    # smooth-bump underflows to 0 just before s = 1; the ratio tends to 0 there
    ratio = np.abs(dxi[:-1][body] / np.sqrt(xi[:-1][body]))
    c1 = INFLATION * float(np.max(ratio))
    c2 = INFLATION * max(0.0, -float(np.min(d2xi[inner])))
    return CutoffSpec(family, c1, c2, 1.0 + s, float(R))


def cutoff_condition_margins(spec: CutoffSpec, t) -> dict:
    """Margins of the three cutoff conditions at points ``t`` of the transition zone."""
    t = np.asarray(t, dtype=float)
    xi, dxi, d2xi = cutoff_values(spec.family, t)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(xi > 0, dxi / np.sqrt(xi), 0.0)
    return {
        "range": np.minimum(xi, 1.0 - xi),
        "ratio_upper": -ratio,
        "ratio_lower": ratio + spec.c1_certified,
        "second": d2xi + spec.c2_certified,
    }


@dataclass(frozen=True, eq=False)
class CutoffCheck:
    r: np.ndarray
    psi: np.ndarray
    a2_margin: np.ndarray
    a3_margin: np.ndarray
    excluded: np.ndarray
    K: float

    @property
    def min_a2(self) -> float:
        return float(np.nanmin(self.a2_margin[~self.excluded]))

    @property
    def min_a3(self) -> float:
        return float(np.nanmin(self.a3_margin[~self.excluded]))


def _straddles(r, joints, spacing):
    near = np.zeros(r.shape, dtype=bool)
    for j in joints:
        near |= np.abs(r - j) < 2 * spacing * (1 - 1e-9)
    return near


def cutoff_gradient_check(spec: CutoffSpec, base: ModelBase, R: float | None = None,
                          K: float | None = None, derivatives: str = "fd") -> CutoffCheck:
    """Pointwise margins of ``|grad psi|^2/psi <= c1^2/R^2`` and the lower bound on ``lap_h psi``.

    With ``derivatives="fd"`` the sampled ``psi = xi(r/R)`` is differentiated
    by finite differences and nodes whose stencil straddles a joint of the
    cutoff (where ``xi''`` jumps) are marked excluded.  ``"chain"`` uses the
    closed-form ``xi', xi''`` with ``lap_h r = (n-1) phi'/phi - h'``; it is
    the only usable route for ``smooth-bump``, whose tail underflows faster
    than any stencil can resolve.  ``K`` defaults to the certified curvature
    bound on B(p, 2R).
    """
    if derivatives not in ("fd", "chain"):
        raise ValueError(f"derivatives must be 'fd' or 'chain', got {derivatives!r}")
    R = spec.R if R is None else R
    grid = base.grid
    r = grid.nodes
    origin = origin_for(base)
    if K is None:
        K = bakry_emery_lower_bound(base, (grid.r_min, min(2 * R, grid.r_max)), origin)
    psi_vals, dxi, d2xi = cutoff_values(spec.family, r / R)
    if derivatives == "fd":
        psi = ScalarProfile(grid, psi_vals, "psi")
        dpsi = radial_derivative(base, psi, 1, origin)
        lap = drift_laplacian(base, psi, origin).values
        excluded = _straddles(r, tuple(R * j for j in spec.joints), grid.spacing)
    else:
        dh = radial_derivative(base, base.h, 1, origin)
        lap_r = -dh
        if base.has_angular_term:
            # psi is constant near the pole, so the nan there is multiplied by xi' = 0
            lap_r = lap_r + (base.n - 1) * np.nan_to_num(base.log_phi_slope())
        dpsi = dxi / R
        lap = d2xi / R**2 + dpsi * lap_r
        excluded = np.zeros(r.shape, dtype=bool)
    c1, c2, n = spec.c1_certified, spec.c2_certified, base.n
    a2 = np.full(r.shape, np.nan)
    positive = psi_vals > 0
    a2[positive] = c1**2 / R**2 - dpsi[positive] ** 2 / psi_vals[positive]
    a3 = lap + ((n - 1 + R * math.sqrt(n * K)) * c1 + c2) / R**2
    return CutoffCheck(r, psi_vals, a2, a3, excluded, float(K))


@dataclass(frozen=True, eq=False)
class MarginProfile:
    r: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def margin(self) -> np.ndarray:
        return self.lhs - self.rhs

    @property
    def min_margin(self) -> float:
        return float(np.min(self.margin))


def _sample_indices(grid, samples):
    if samples is None:
        return np.arange(grid.count)
    return np.array([grid.index_of(s) for s in samples], dtype=int)


def bochner_check(base: ModelBase, u: ScalarProfile, K: float,
                  samples: Sequence[float] | None = None, m: float | None = None) -> MarginProfile:
    """Margins of the weighted Bochner inequality

        1/2 lap_h |grad u|^2 >= (lap_h u)^2/(n+m) + <grad u, grad lap_h u> - K |grad u|^2.
    """
    if u.grid != base.grid:
        raise GridMismatch("u is not on the base grid")
    m = base.m if m is None else m
    origin = origin_for(base)
    grid = base.grid
    du = radial_derivative(base, u, 1, origin)
    grad_sq = ScalarProfile(grid, du * du, "|grad u|^2")
    lap_u = drift_laplacian(base, u, origin)
    d_lap_u = radial_derivative(base, lap_u, 1, origin)
    lhs = 0.5 * drift_laplacian(base, grad_sq, origin).values
    rhs = lap_u.values**2 / (base.n + m) + du * d_lap_u - K * du * du
    idx = _sample_indices(grid, samples)
    return MarginProfile(grid.nodes[idx], lhs[idx], rhs[idx])


def delta_L_check(instance: SolitonInstance, beta: float, K: float,
                  samples: Sequence[float] | None = None, solution_tol: float = 1e-6) -> MarginProfile:
    """Margins of the lower bound on ``lap_h L`` along a solution.

    ``L = beta |grad u|^2 + k rho - k theta e^{-2u/k}`` with ``u = k log f``.
    The inequality only holds along solutions, so a scaled residual above
    ``solution_tol`` raises :class:`NotASolution`.
    """
    base, k, theta = instance.base, instance.k, instance.theta
    origin = origin_for(base)
    residual = np.max(np.abs(instance_residual(instance, origin=origin).values[1:-1]))
    if residual > solution_tol:
        raise NotASolution(f"scaled residual {residual:.3e} exceeds {solution_tol:.1e}")
    grid = base.grid
    n, m = base.n, base.m
    u = ScalarProfile(grid, k * np.log(instance.f.values), "u")
    rho = instance.rho_B
    du = radial_derivative(base, u, 1, origin)
    drho = radial_derivative(base, rho, 1, origin)
    decay = np.exp(-2.0 * u.values / k)
    L = ScalarProfile(grid, beta * du * du + k * rho.values - k * theta * decay, "L")
    dL = radial_derivative(base, L, 1, origin)
    lap_L = drift_laplacian(base, L, origin).values
    lap_u = drift_laplacian(base, u, origin).values
    lap_rho = drift_laplacian(base, rho, origin).values
    rhs = (
        2 * beta * lap_u**2 / (n + m)
        + 2 * (1 - beta) * k * du * drho
        - 2 * du * dL
        - 2 * beta * K * du * du
        + k * lap_rho
        - 2 * theta * decay * ((beta - 1 + 2.0 / k) * du * du + L.values)
    )
    idx = _sample_indices(grid, samples)
    return MarginProfile(grid.nodes[idx], lap_L[idx], rhs[idx])


def quadratic_root_bound(a: float, b: float, c: float) -> float:
    """Upper bound ``2b/a + sqrt(c/a)`` on ``z`` whenever ``a z^2 - b z <= c``."""
    if not a > 0:
        raise ParamOutOfRange(f"a = {a} must be > 0")
    if b < 0 or c < 0:
        raise ParamOutOfRange("b and c must be >= 0")
    return 2 * b / a + math.sqrt(c / a)


def quadratic_positive_root(a: float, b: float, c: float) -> float:
    """Positive root of ``a z^2 - b z - c``; hypot keeps tiny ``a c`` from underflowing."""
    return (b + math.hypot(b, 2 * math.sqrt(a) * math.sqrt(c))) / (2 * a)


@dataclass(frozen=True)
class MaxPointTrace:
    r: float
    index: int
    G_max: float
    grad_norm: float
    nontrivial: bool

    def as_dict(self) -> dict:
        return {
            "r": self.r,
            "G_max": self.G_max,
            "grad_norm": self.grad_norm,
            "branch": "nontrivial" if self.nontrivial else "trivial",
        }


def max_point_of(base: ModelBase, L: ScalarProfile, psi: ScalarProfile, radius: float | None = None) -> MaxPointTrace:
    """Grid argmax of ``G = psi L`` over B(p, radius); first node wins ties."""
    for p in (L, psi):
        if p.grid != base.grid:
            raise GridMismatch(f"profile {p.label!r} is not on the base grid")
    grid = base.grid
    G = ScalarProfile(grid, psi.values * L.values, "G")
    mask = grid.mask(grid.r_min, radius if radius is not None else grid.r_max)
    idx = np.flatnonzero(mask)
    best = int(idx[np.argmax(G.values[idx])])
    grad = radial_derivative(base, G, 1, origin_for(base))
    g_max = float(G.values[best])
    return MaxPointTrace(float(grid.nodes[best]), best, g_max, float(abs(grad[best])), g_max > 0)


def L_profile(instance: SolitonInstance, beta: float) -> ScalarProfile:
    base, k = instance.base, instance.k
    u = k * np.log(instance.f.values)
    du = radial_derivative(base, ScalarProfile(base.grid, u, "u"), 1, origin_for(base))
    values = beta * du * du + k * instance.rho_B.values - k * instance.theta * np.exp(-2 * u / k)
    return ScalarProfile(base.grid, values, "L")


def max_point_trace(instance: SolitonInstance, beta: float, cutoff: CutoffSpec,
                    R: float | None = None) -> MaxPointTrace:
    R = cutoff.R if R is None else R
    base = instance.base
    psi = ScalarProfile(base.grid, cutoff_values(cutoff.family, base.grid.nodes / R)[0], "psi")
    return max_point_of(base, L_profile(instance, beta), psi, 2 * R)
