"""Warping-function transforms, the fiber constant, and the reduced ODE.

With ``v = f**k`` the base equation for the warping function becomes

    lap_h v + rho * k * v - theta * k * v**(1 - 2/k) = 0,

and ``u = log v`` turns it into the quasi-Einstein form used by the gradient
estimates.  The solver here integrates the radial version of that equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from . import _fd
from .errors import (
    DomainInvalid,
    GridMismatch,
    NoConvergence,
    NonPositiveInput,
    ParamOutOfRange,
    PositivityLost,
)
from .geometry import (
    ModelBase,
    ScalarProfile,
    build_radial_base,
    drift_laplacian,
    laplacian,
    radial_derivative,
)


def power_exponent(k: int) -> float:
    """Exponent on ``v`` in the fiber-constant term of the reduced equation.

    ``v**(1 - 2/k) = f**(k - 2)``, which is what substituting ``f = v**(1/k)``
    into the fiber-constant identity produces (times ``k f**(k-2)``).
    """
    return 1.0 - 2.0 / k


@dataclass(frozen=True, eq=False)
class SolitonInstance:
    base: ModelBase
    f: ScalarProfile
    rho_B: ScalarProfile
    k: int
    theta: float

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ParamOutOfRange(f"fiber dimension k must be an integer >= 1, got {self.k}")
        if not math.isfinite(self.theta):
            raise ParamOutOfRange("theta must be finite")
        for p in (self.f, self.rho_B):
            if p.grid != self.base.grid:
                raise GridMismatch(f"profile {p.label!r} is not on the base grid")
        if np.any(self.f.values <= 0):
            raise NonPositiveInput("warping function f must be positive at every node")

    @property
    def v(self) -> ScalarProfile:
        return f_to_v(self.f, self.k)

    @property
    def u(self) -> ScalarProfile:
        return v_to_u(self.v)


@dataclass(frozen=True)
class SolveConfig:
    """Solver settings.

    ``slope0`` is the initial slope ``v'(r_min)`` or ``"auto-zero"``.  When
    ``target`` is ``None`` the problem is an initial value problem; otherwise
    ``slope0`` is only the first guess and the far end is constrained by
    ``v'(r_max) = target`` (``boundary="free"``) or ``v(r_max) = target``
    (``boundary="dirichlet"``).
    """

    v0: float = 1.0
    slope0: float | str = "auto-zero"
    method: str = "shooting"
    tol: float = 1e-8
    max_iter: int = 50
    boundary: str = "free"
    target: float | None = None

    def __post_init__(self):
        if not self.v0 > 0:
            raise ParamOutOfRange(f"v0 must be > 0, got {self.v0}")
        if not self.tol > 0:
            raise ParamOutOfRange(f"tol must be > 0, got {self.tol}")
        if self.method not in ("shooting", "collocation"):
            raise ParamOutOfRange(f"method must be shooting or collocation, got {self.method!r}")
        if self.boundary not in ("free", "dirichlet"):
            raise ParamOutOfRange(f"boundary must be free or dirichlet, got {self.boundary!r}")
        if self.max_iter < 1:
            raise ParamOutOfRange("max_iter must be >= 1")
        if isinstance(self.slope0, str) and self.slope0 != "auto-zero":
            raise ParamOutOfRange(f"slope0 must be a number or 'auto-zero', got {self.slope0!r}")

    @property
    def initial_slope(self) -> float:
        return 0.0 if self.slope0 == "auto-zero" else float(self.slope0)


def _require_positive(p: ScalarProfile, what: str) -> None:
    if np.any(p.values <= 0):
        raise NonPositiveInput(f"{what} must be positive at every node")


def f_to_v(f: ScalarProfile, k: int) -> ScalarProfile:
    _require_positive(f, "f")
    return ScalarProfile(f.grid, f.values**k, "v")


def v_to_f(v: ScalarProfile, k: int) -> ScalarProfile:
    _require_positive(v, "v")
    return ScalarProfile(v.grid, v.values ** (1.0 / k), "f")


def v_to_u(v: ScalarProfile) -> ScalarProfile:
    _require_positive(v, "v")
    return ScalarProfile(v.grid, np.log(v.values), "u")


def u_to_v(u: ScalarProfile) -> ScalarProfile:
    return ScalarProfile(u.grid, np.exp(u.values), "v")


def _pow(values, exponent):
    return np.exp(exponent * np.log(values))


def theta_profile(instance: SolitonInstance, origin: str = "exclude") -> ScalarProfile:
    """Pointwise fiber constant ``rho f^2 + f lap f + (k-1)|grad f|^2 - f <grad h, grad f>``.

    The Laplacian here is the unweighted one; constancy of the result is the
    solution test.
    """
    base, f, k = instance.base, instance.f, instance.k
    df = radial_derivative(base, f, 1, origin)
    dh = radial_derivative(base, base.h, 1, origin)
    lap = laplacian(base, f, origin).values
    fv = f.values
    theta = instance.rho_B.values * fv**2 + fv * lap + (k - 1) * df**2 - fv * dh * df
    return ScalarProfile(base.grid, theta, "theta")


def _warp_terms(base, v, rho_B, theta, k, origin):
    for p in (v, rho_B):
        if p.grid != base.grid:
            raise GridMismatch(f"profile {p.label!r} is not on the base grid")
    _require_positive(v, "v")
    lap = drift_laplacian(base, v, origin).values
    linear = rho_B.values * k * v.values
    power = theta * k * _pow(v.values, power_exponent(k))
    return lap, linear, power


def warp_residual(base: ModelBase, v: ScalarProfile, rho_B: ScalarProfile, theta: float, k: int,
                 origin: str = "exclude") -> ScalarProfile:
    """Pointwise residual ``lap_h v + rho k v - theta k v^(1-2/k)``."""
    lap, linear, power = _warp_terms(base, v, rho_B, theta, k, origin)
    return ScalarProfile(base.grid, lap + linear - power, "residual")


def scaled_warp_residual(base, v, rho_B, theta, k, origin="exclude") -> ScalarProfile:
    """Residual divided by ``1 + |lap_h v| + |rho k v| + |theta k v^p|`` node by node."""
    lap, linear, power = _warp_terms(base, v, rho_B, theta, k, origin)
    scale = 1.0 + np.abs(lap) + np.abs(linear) + np.abs(power)
    return ScalarProfile(base.grid, (lap + linear - power) / scale, "scaled residual")


def instance_residual(instance: SolitonInstance, scaled: bool = True, origin: str = "exclude"):
    fn = scaled_warp_residual if scaled else warp_residual
    return fn(instance.base, instance.v, instance.rho_B, instance.theta, instance.k, origin)


def proposition_residual(instance: SolitonInstance, origin: str = "exclude"):
    """Radial and tangential residuals of Ric + Hess h = rho g + (k/f) Hess f.

    Returns ``(radial, tangential)``; ``tangential`` is ``None`` for ``n = 1``.
    """
    base, f, k = instance.base, instance.f, instance.k
    kappa = base.curvature
    df = radial_derivative(base, f, 1, origin)
    d2f = radial_derivative(base, f, 2, origin)
    dh = radial_derivative(base, base.h, 1, origin)
    d2h = radial_derivative(base, base.h, 2, origin)
    rho = instance.rho_B.values
    fv = f.values
    radial = (base.n - 1) * kappa + d2h - rho - k * d2f / fv
    tangential = None
    if base.has_angular_term:
        slope = base.log_phi_slope()
        pole = ~np.isfinite(slope)
        hess_h = np.where(pole, d2h, np.nan_to_num(slope) * dh)
        hess_f = np.where(pole, d2f, np.nan_to_num(slope) * df)
        tangential = (base.n - 1) * kappa + hess_h - rho - k * hess_f / fv
        tangential = ScalarProfile(base.grid, tangential, "tangential residual")
    return ScalarProfile(base.grid, radial, "radial residual"), tangential


class IVPTrace(NamedTuple):
    r: np.ndarray
    v: np.ndarray
    dv: np.ndarray
    crossing_radius: float | None
    status: str


def _coefficient_splines(base, rho_B):
    r = base.grid.nodes
    dh = radial_derivative(base, base.h, 1)
    return CubicSpline(r, rho_B.values), CubicSpline(r, dh)


def integrate_ivp(base: ModelBase, rho_B: ScalarProfile, theta: float, k: int,
                  v0: float, slope0: float, r_end: float | None = None,
                  rtol: float = 1e-12, atol: float = 1e-14, t_eval=None) -> IVPTrace:
    """Integrate the radial ODE outward from ``r_min`` with an adaptive RK45 scheme.

    Coefficients between nodes come from cubic splines of the nodal data.
    Integration stops at the first zero of ``v`` (``status="positivity-lost"``).
    """
    rho_s, dh_s = _coefficient_splines(base, rho_B)
    n = base.n
    exponent = power_exponent(k)
    kind = base.kind
    r0 = base.grid.r_min
    r_end = base.grid.r_max if r_end is None else r_end

    def warp_slope(r):
        if kind == "euclidean-cone":
            return 1.0 / r
        if kind == "hyperbolic":
            return 1.0 / math.tanh(r)
        if kind == "spherical":
            return 1.0 / math.tan(r)
        return 0.0

    def rhs(r, y):
        v, dv = y
        if v <= 0:
            return [dv, 0.0]
        source = theta * k * math.exp(exponent * math.log(v)) - rho_s(r) * k * v
        if n >= 2 and r == 0.0:
            return [dv, source / n]
        drift = (n - 1) * warp_slope(r) * dv if n >= 2 else 0.0
        return [dv, source - drift + dh_s(r) * dv]

    def hits_zero(r, y):
        return y[0]

    hits_zero.terminal = True
    hits_zero.direction = -1

    if n >= 2 and r0 == 0.0 and slope0 != 0.0:
        raise DomainInvalid("a smooth radial solution through the pole needs v'(0) = 0")
    sol = solve_ivp(rhs, (r0, r_end), [v0, slope0], method="RK45", rtol=rtol, atol=atol,
                    events=hits_zero, t_eval=t_eval)
    if sol.status == -1:
        raise NoConvergence(f"IVP integration failed: {sol.message}")
    crossing = None
    status = "ok"
    if sol.t_events[0].size:
        crossing = float(sol.t_events[0][0])
        status = "positivity-lost"
    return IVPTrace(sol.t, sol.y[0], sol.y[1], crossing, status)


def _solve_on_grid(base, rho_B, theta, k, config, guess, slope0):
    """Damped Newton on the discretised boundary value problem.

    The equation is imposed at nodes 1..N-2; the two remaining rows carry
    ``v(r_min) = v0`` plus either the initial slope or the far-end condition.
    """
    grid = base.grid
    count, spacing = grid.count, grid.spacing
    even = base.touches_origin()
    d1 = _fd.derivative_matrix(count, spacing, 1, even)
    d2 = _fd.derivative_matrix(count, spacing, 2, even)
    dh = radial_derivative(base, base.h, 1, "even" if even else "exclude")
    coeff = -dh
    if base.has_angular_term:
        slope = base.log_phi_slope()
        pole = ~np.isfinite(slope)
        coeff = coeff + (base.n - 1) * np.nan_to_num(slope)
    else:
        pole = np.zeros(count, dtype=bool)
    operator = (d2 + sp.diags(coeff) @ d1).tolil()
    for i in np.flatnonzero(pole):
        operator[i, :] = base.n * d2[i, :]
    operator = operator.tocsr()
    rho = rho_B.values
    exponent = power_exponent(k)

    interior = slice(1, count - 1)
    if even and config.target is not None:
        raise DomainInvalid("grids through the pole fix v'(0) = 0; a far-end target over-determines the problem")
    if even:
        # symmetry already pins the slope, so the pole row carries the equation itself
        bc_row = None
        bc_value = 0.0
    elif config.target is None:
        bc_row = d1[0, :]
        bc_value = slope0
    elif config.boundary == "free":
        bc_row = d1[count - 1, :]
        bc_value = config.target
    else:
        bc_row = sp.csr_matrix(([1.0], ([0], [count - 1])), shape=(1, count))
        bc_value = config.target
    first = sp.csr_matrix(([1.0], ([0], [0])), shape=(1, count))

    def equations(v):
        ode = operator @ v + rho * k * v - theta * k * _pow(v, exponent)
        second = ode[0] if even else (bc_row @ v)[0] - bc_value
        return np.concatenate([[v[0] - config.v0, second], ode[interior]])

    def jacobian(v):
        local = sp.diags(rho * k - theta * k * exponent * _pow(v, exponent - 1.0))
        full = (operator + local).tocsr()
        second = full[0, :] if even else bc_row
        return sp.vstack([first, second, full[interior, :]]).tocsc()

    v = np.array(guess, dtype=float)
    v[0] = config.v0
    if np.any(v <= 0):
        raise PositivityLost("initial iterate is not positive", radius=float(grid.nodes[np.argmax(v <= 0)]))
    # equation rows carry rounding of order eps * |terms|; ask for well below tol
    goal = 0.01 * config.tol
    res = equations(v)
    for iteration in range(config.max_iter):
        norm = np.max(np.abs(res))
        if norm < goal:
            return v, iteration
        step = spla.spsolve(jacobian(v), -res)
        lam = 1.0
        sign_ok = False
        while lam > 1e-10:
            trial = v + lam * step
            if np.all(trial > 0):
                sign_ok = True
                trial_res = equations(trial)
                if np.max(np.abs(trial_res)) < (1.0 - 0.25 * lam) * norm:
                    break
            lam *= 0.5
        else:
            if not sign_ok:
                full = v + step
                idx = int(np.argmax(full <= 0))
                raise PositivityLost(
                    f"Newton iterates cannot stay positive; first crossing near r = {grid.nodes[idx]:.6g}",
                    radius=float(grid.nodes[idx]),
                )
            if norm < config.tol:
                # rounding floor reached
                return v, iteration
            raise NoConvergence(f"damped Newton stalled at residual {norm:.3e}")
        v, res = trial, trial_res
    if np.max(np.abs(res)) < config.tol:
        return v, config.max_iter
    raise NoConvergence(f"no convergence in {config.max_iter} Newton iterations "
                        f"(residual {np.max(np.abs(res)):.3e})")


@dataclass(frozen=True, eq=False)
class SolveResult:
    v: ScalarProfile
    residual_max: float
    iterations: int
    slope0: float
    method: str


def _shoot(base, rho_B, theta, k, config):
    """Return (v sampled on the grid, slope used) for the shooting route."""
    nodes = base.grid.nodes

    def run(s):
        trace = integrate_ivp(base, rho_B, theta, k, config.v0, s, t_eval=nodes)
        if trace.crossing_radius is not None:
            raise PositivityLost(
                f"v reached zero at r = {trace.crossing_radius:.6g}",
                radius=trace.crossing_radius, trace=trace,
            )
        return trace

    def mismatch(trace):
        end = trace.dv[-1] if config.boundary == "free" else trace.v[-1]
        return end - config.target

    slope = config.initial_slope
    trace = run(slope)
    if config.target is None:
        return trace.v, slope
    prev_s, prev_m = slope, mismatch(trace)
    s = slope + max(1e-3, 1e-3 * abs(slope))
    for _ in range(config.max_iter):
        trace = run(s)
        cur = mismatch(trace)
        if abs(cur) < 1e-10 * max(1.0, abs(config.target)):
            return trace.v, s
        if cur == prev_m:
            raise NoConvergence("shooting secant iteration stalled")
        prev_s, prev_m, s = s, cur, s - cur * (s - prev_s) / (cur - prev_m)
    raise NoConvergence(f"shooting did not converge in {config.max_iter} iterations")


def solve_warp_ode(base: ModelBase, rho_B: ScalarProfile, theta: float, k: int,
                   config: SolveConfig | None = None) -> SolveResult:
    """Solve the radial warping equation for ``v`` on the base grid.

    ``shooting`` integrates the initial value problem with RK45 (matching
    the far-end condition by secant iteration when a target is set) and then
    settles the result onto the grid with Newton so the nodal residual is at
    rounding level.  ``collocation`` runs damped Newton on the grid equations
    directly, starting from a straight line.

    The returned profile always satisfies ``max |residual| < tol`` at the
    nodes where the equation is imposed (all but the two endpoints).
    """
    config = config or SolveConfig()
    if rho_B.grid != base.grid:
        raise GridMismatch("rho_B is not on the base grid")
    if int(k) != k or k < 1:
        raise ParamOutOfRange(f"fiber dimension k must be an integer >= 1, got {k}")
    slope0 = config.initial_slope
    if base.touches_origin() and slope0 != 0.0:
        raise DomainInvalid("grids through the pole with n >= 2 require slope0 = 0 (auto-zero)")
    nodes = base.grid.nodes
    if config.method == "shooting":
        guess, slope_used = _shoot(base, rho_B, theta, k, config)
    else:
        if config.target is not None and config.boundary == "dirichlet":
            guess = np.linspace(config.v0, config.target, nodes.size)
        else:
            guess = config.v0 + slope0 * (nodes - nodes[0])
        if np.any(guess <= 0):
            guess = np.full(nodes.size, config.v0)
        slope_used = slope0
    v, iterations = _solve_on_grid(base, rho_B, theta, k, config, guess, slope0)
    profile = ScalarProfile(base.grid, v, "v")
    origin = "even" if base.touches_origin() else "exclude"
    res = warp_residual(base, profile, rho_B, theta, k, origin).values[1:-1]
    worst = float(np.max(np.abs(res)))
    if worst >= config.tol:
        raise NoConvergence(f"solution residual {worst:.3e} exceeds tol {config.tol:.1e}")
    return SolveResult(profile, worst, iterations, float(slope_used), config.method)


def hyperbolic_decomposition(k: int = 2, r_min: float = 0.0, r_max: float = 1.0, count: int = 201,
                             n: int = 1) -> SolitonInstance:
    """``f = e^r`` over a flat line with ``rho = -k``; the fiber constant is 0."""
    if n != 1:
        raise ParamOutOfRange("the hyperbolic decomposition lives on a line (n = 1)")
    base = build_radial_base("line-segment", 1, r_min, r_max, count)
    f = ScalarProfile.from_function(base.grid, np.exp, "f")
    rho = ScalarProfile.constant(base.grid, -float(k), "rho_B")
    return SolitonInstance(base, f, rho, k, 0.0)


def spherical_decomposition(k: int = 2, r_min: float = 0.1, r_max: float = 3.0,
                            count: int = 291) -> SolitonInstance:
    """``f = sin r`` over a flat line with ``rho = k``; the fiber constant is ``k - 1``."""
    if not (0.0 < r_min < r_max < math.pi):
        raise DomainInvalid("sin r is positive only on (0, pi)")
    base = build_radial_base("line-segment", 1, r_min, r_max, count)
    f = ScalarProfile.from_function(base.grid, np.sin, "f")
    rho = ScalarProfile.constant(base.grid, float(k), "rho_B")
    return SolitonInstance(base, f, rho, k, float(k - 1))
