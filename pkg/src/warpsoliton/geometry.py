"""Rotationally symmetric model bases and weighted differential operators.

A base is ``dr^2 + phi(r)^2 g_{S^{n-1}}`` on ``[r_min, r_max]`` carrying a
radial weight ``h``.  Everything here acts on radial profiles sampled on a
uniform grid, using fourth-order finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import _fd
from .errors import DomainInvalid, GridMismatch, GridTooCoarse, SingularOrigin

KINDS = ("line-segment", "euclidean-cone", "hyperbolic", "spherical")

# Sectional curvature of each model; phi'' = -kappa * phi and
# (phi'^2 - 1) / phi^2 = -kappa hold identically for these warpings.
_CURVATURE = {"line-segment": 0.0, "euclidean-cone": 0.0, "hyperbolic": -1.0, "spherical": 1.0}

_UNIFORM_RTOL = 1e-12


@dataclass(frozen=True)
class RadialGrid:
    r_min: float
    r_max: float
    count: int

    def __post_init__(self):
        if not (self.r_max > self.r_min):
            raise DomainInvalid(f"need r_max > r_min, got [{self.r_min}, {self.r_max}]")
        if self.count < 9 or self.count % 2 == 0:
            raise GridTooCoarse(f"count must be odd and >= 9, got {self.count}")

    @property
    def spacing(self) -> float:
        return (self.r_max - self.r_min) / (self.count - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.r_min, self.r_max, self.count)

    def index_of(self, r: float) -> int:
        """Nearest node to ``r``; raises if ``r`` lies outside the grid."""
        half = 0.5 * self.spacing
        if r < self.r_min - half or r > self.r_max + half:
            raise DomainInvalid(f"radius {r} outside grid [{self.r_min}, {self.r_max}]")
        return int(np.clip(round((r - self.r_min) / self.spacing), 0, self.count - 1))

    def mask(self, r_a: float = -math.inf, r_b: float = math.inf) -> np.ndarray:
        tol = 1e-9 * self.spacing
        nodes = self.nodes
        return (nodes >= r_a - tol) & (nodes <= r_b + tol)


@dataclass(frozen=True, eq=False)
class ScalarProfile:
    grid: RadialGrid
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.count,):
            raise GridMismatch(
                f"profile {self.label!r} has shape {values.shape}, grid has {self.grid.count} nodes"
            )
        if not np.all(np.isfinite(values)):
            raise DomainInvalid(f"profile {self.label!r} has non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    @classmethod
    def from_function(cls, grid: RadialGrid, func, label: str = "") -> "ScalarProfile":
        return cls(grid, np.broadcast_to(func(grid.nodes), (grid.count,)), label)

    @classmethod
    def constant(cls, grid: RadialGrid, value: float, label: str = "") -> "ScalarProfile":
        return cls(grid, np.full(grid.count, float(value)), label)

    def relabel(self, label: str) -> "ScalarProfile":
        return ScalarProfile(self.grid, self.values, label)


@dataclass(frozen=True, eq=False)
class ModelBase:
    n: int
    kind: str
    phi: ScalarProfile
    h: ScalarProfile
    m: float
    dphi: ScalarProfile = field(repr=False, default=None)

    @property
    def grid(self) -> RadialGrid:
        return self.phi.grid

    @property
    def curvature(self) -> float:
        return _CURVATURE[self.kind]

    @property
    def has_angular_term(self) -> bool:
        return self.n >= 2

    def log_phi_slope(self) -> np.ndarray:
        """phi'/phi per node; ``nan`` where phi vanishes (the pole)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.dphi.values / self.phi.values
        out[self.phi.values == 0.0] = np.nan
        return out

    def touches_origin(self) -> bool:
        return self.has_angular_term and self.grid.r_min == 0.0


def _warping(kind, r):
    if kind == "line-segment":
        return np.ones_like(r), np.zeros_like(r)
    if kind == "euclidean-cone":
        return r.copy(), np.ones_like(r)
    if kind == "hyperbolic":
        return np.sinh(r), np.cosh(r)
    return np.sin(r), np.cos(r)


def build_radial_base(kind, n, r_min, r_max, count, h_values=None, m=1.0) -> ModelBase:
    """Construct a model base of the given ``kind``.

    ``h_values`` defaults to the zero weight.  Raises :class:`GridTooCoarse`
    for grids that are too small or even-sized, :class:`DomainInvalid` for
    negative radii, a spherical grid reaching the antipode, ``m <= 0``, or a
    line segment with ``n != 1``.
    """
    if kind not in KINDS:
        raise DomainInvalid(f"unknown base kind {kind!r}; expected one of {KINDS}")
    if int(n) != n or n < 1:
        raise DomainInvalid(f"dimension n must be a positive integer, got {n}")
    n = int(n)
    if kind == "line-segment" and n != 1:
        raise DomainInvalid("line-segment bases are one-dimensional (n = 1)")
    if not (m > 0 and math.isfinite(m)):
        raise DomainInvalid(f"Bakry-Emery parameter m must be finite and > 0, got {m}")
    if r_min < 0:
        raise DomainInvalid(f"r_min must be >= 0 for a radial base, got {r_min}")
    if kind == "spherical" and r_max >= math.pi:
        raise DomainInvalid(f"spherical base needs r_max < pi, got {r_max}")
    grid = RadialGrid(float(r_min), float(r_max), int(count))
    r = grid.nodes
    spacing = grid.spacing
    if np.max(np.abs(np.diff(r) - spacing)) > _UNIFORM_RTOL * max(1.0, abs(r_max)):
        raise DomainInvalid("grid is not uniform to 1e-12")
    phi, dphi = _warping(kind, r)
    if n >= 2 and np.any(phi[r > 0] <= 0):
        raise DomainInvalid("warping phi must be positive away from the pole")
    h = np.zeros(grid.count) if h_values is None else np.asarray(h_values, dtype=float)
    if h.shape != (grid.count,):
        raise GridMismatch(f"h_values has {h.size} entries, grid has {grid.count}")
    return ModelBase(
        n=n,
        kind=kind,
        phi=ScalarProfile(grid, phi, "phi"),
        h=ScalarProfile(grid, h, "h_B"),
        m=float(m),
        dphi=ScalarProfile(grid, dphi, "phi'"),
    )


def _check_grid(base: ModelBase, *profiles: ScalarProfile) -> None:
    for p in profiles:
        if p.grid != base.grid:
            raise GridMismatch(f"profile {p.label!r} is not on the base grid")


def _use_even(base: ModelBase, origin: str) -> bool:
    if origin not in ("exclude", "even"):
        raise ValueError(f"origin must be 'exclude' or 'even', got {origin!r}")
    return origin == "even" and base.grid.r_min == 0.0


def radial_derivative(base: ModelBase, u: ScalarProfile, order: int = 1, origin: str = "exclude"):
    """Nodal d^order u / dr^order as an array."""
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    _check_grid(base, u)
    if _use_even(base, origin):
        return _fd.even_derivative(u.values, base.grid.spacing, order)
    return _fd.derivative(u.values, base.grid.spacing, order)


def gradient_norm_sq(base: ModelBase, u: ScalarProfile, origin: str = "exclude") -> ScalarProfile:
    du = radial_derivative(base, u, 1, origin)
    return ScalarProfile(base.grid, du * du, f"|grad {u.label}|^2")


def _laplacian_values(base, u, origin, drift):
    even = _use_even(base, origin)
    if base.touches_origin() and not even:
        raise SingularOrigin(
            "grid contains r = 0 with n >= 2; start at r_min > 0 or pass origin='even'"
        )
    du = radial_derivative(base, u, 1, origin)
    d2u = radial_derivative(base, u, 2, origin)
    out = d2u.copy()
    if base.has_angular_term:
        slope = base.log_phi_slope()
        interior = np.isfinite(slope)
        out[interior] += (base.n - 1) * slope[interior] * du[interior]
        # even extension at the pole: u'(0) = 0 and u'/r -> u''(0)
        out[~interior] = base.n * d2u[~interior]
    if drift:
        dh = radial_derivative(base, base.h, 1, origin)
        out -= dh * du
    return out


def laplacian(base: ModelBase, u: ScalarProfile, origin: str = "exclude") -> ScalarProfile:
    """Unweighted Laplace-Beltrami operator of a radial profile."""
    _check_grid(base, u)
    return ScalarProfile(base.grid, _laplacian_values(base, u, origin, False), f"lap {u.label}")


def drift_laplacian(base: ModelBase, u: ScalarProfile, origin: str = "exclude") -> ScalarProfile:
    """Weighted Laplacian ``u'' + (n-1)(phi'/phi) u' - h' u'``.

    With ``origin='even'`` a grid starting at ``r = 0`` is treated by even
    reflection, giving ``n u''(0)`` at the pole.
    """
    _check_grid(base, u)
    return ScalarProfile(base.grid, _laplacian_values(base, u, origin, True), f"lap_h {u.label}")


def ricci_m_eigenvalues(base: ModelBase, origin: str = "exclude"):
    """Radial and tangential eigenvalues of Ric + Hess h - dh (x) dh / m.

    The tangential profile is ``None`` when ``n = 1``.
    """
    kappa = base.curvature
    dh = radial_derivative(base, base.h, 1, origin)
    d2h = radial_derivative(base, base.h, 2, origin)
    radial = (base.n - 1) * kappa + d2h - dh * dh / base.m
    tangential = None
    if base.has_angular_term:
        slope = base.log_phi_slope()
        hess_t = np.where(np.isfinite(slope), np.nan_to_num(slope) * dh, d2h)
        tangential = ScalarProfile(base.grid, (base.n - 1) * kappa + hess_t, "Ric_m tangential")
    return ScalarProfile(base.grid, radial, "Ric_m radial"), tangential


def bakry_emery_lower_bound(base: ModelBase, region=None, origin: str = "exclude") -> float:
    """Smallest ``K >= 0`` with ``Ric_m >= -K`` at the grid nodes of ``region``."""
    r_a, r_b = region if region is not None else (base.grid.r_min, base.grid.r_max)
    if r_a < base.grid.r_min - 1e-12 or r_b > base.grid.r_max + 1e-12 or r_a > r_b:
        raise GridMismatch(f"region [{r_a}, {r_b}] not inside the grid")
    mask = base.grid.mask(r_a, r_b)
    radial, tangential = ricci_m_eigenvalues(base, origin)
    lowest = np.min(radial.values[mask])
    if tangential is not None:
        lowest = min(lowest, np.min(tangential.values[mask]))
    return float(max(0.0, -lowest))


class QianSample(NamedTuple):
    r: float
    lhs: float
    rhs: float
    margin: float
    lhs_r: float
    rhs_r: float
    margin_r: float


def qian_rhs(n: int, K: float, r):
    return n * (1.0 + np.sqrt(1.0 + 4.0 * K * np.asarray(r) ** 2 / n))


def qian_comparison_check(base: ModelBase, K: float, samples: Sequence[float] | None = None,
                          origin: str = "exclude") -> list[QianSample]:
    """Compare the weighted Laplacian of ``r^2`` and ``r`` with their comparison bounds.

    Sample radii are snapped to the nearest grid node.  The first-order form
    ``lap_h r <= (n-1)/r + sqrt(nK)`` is undefined at ``r = 0`` and is
    reported as ``nan`` there.
    """
    grid = base.grid
    r = grid.nodes
    if samples is None:
        idx = np.arange(grid.count)
    else:
        idx = np.array([grid.index_of(s) for s in samples], dtype=int)
    lap_r2 = drift_laplacian(base, ScalarProfile(grid, r * r, "r^2"), origin).values
    lap_r = np.full(grid.count, np.nan)
    if not base.touches_origin():
        lap_r = drift_laplacian(base, ScalarProfile(grid, r, "r"), origin).values
    elif grid.count > 5:
        # r is not smooth at the pole; evaluate away from it via the closed-form slope
        dh = radial_derivative(base, base.h, 1, origin)
        with np.errstate(divide="ignore", invalid="ignore"):
            lap_r = (base.n - 1) * base.log_phi_slope() - dh
    out = []
    sqrt_nk = math.sqrt(base.n * K)
    for i in idx:
        ri = float(r[i])
        rhs = float(qian_rhs(base.n, K, ri))
        lhs = float(lap_r2[i])
        if ri > 0:
            rhs_r = (base.n - 1) / ri + sqrt_nk
        else:
            rhs_r = sqrt_nk if base.n == 1 else math.nan
        lhs_r = float(lap_r[i])
        out.append(QianSample(ri, lhs, rhs, rhs - lhs, lhs_r, rhs_r, rhs_r - lhs_r))
    return out


def origin_for(base: ModelBase) -> str:
    """Origin treatment that makes operators defined on every node of ``base``."""
    return "even" if base.touches_origin() else "exclude"
