"""Nonexistence decisions for warped-product solitons and the sphere-product example."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import EstimateParams, beta_window, compute_constants, rhs_value
from .errors import ParamOutOfRange, PositivityLost, PreconditionError
from .geometry import ScalarProfile, build_radial_base, radial_derivative
from .warpfield import SolveConfig, solve_warp_ode

RHO_KINDS = ("zero", "positive-constant", "other")


@dataclass(frozen=True)
class Scenario:
    rho_kind: str
    theta: float
    K: float = 0.0
    gamma: float = 0.0
    k: int = 2
    n: int = 1
    m: float = 1.0
    f_bounded: bool = True
    rho_value: float | None = None

    def __post_init__(self):
        if self.rho_kind not in RHO_KINDS:
            raise ParamOutOfRange(f"rho_kind must be one of {RHO_KINDS}, got {self.rho_kind!r}")
        if self.K < 0 or self.gamma < 0:
            raise ParamOutOfRange("K and gamma must be >= 0")
        if self.k < 1 or self.n < 1 or not self.m > 0:
            raise ParamOutOfRange("need k >= 1, n >= 1, m > 0")
        if self.rho_kind == "positive-constant" and self.rho_value is not None and not self.rho_value > 0:
            raise ParamOutOfRange("positive-constant rho needs rho_value > 0")

    @property
    def rho(self) -> float | None:
        if self.rho_kind == "zero":
            return 0.0
        if self.rho_kind == "positive-constant":
            return 1.0 if self.rho_value is None else self.rho_value
        return self.rho_value


@dataclass(frozen=True)
class Verdict:
    outcome: str
    certificate: str
    constant_f_forced: bool = False
    Q: float | None = None
    global_rhs: float | None = None
    witness: dict | None = field(default=None, compare=False)

    @property
    def nonexistent(self) -> bool:
        return self.outcome == "nonexistent"

    def as_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "certificate": self.certificate,
            "constant_f_forced": self.constant_f_forced,
            "Q": self.Q,
            "global_rhs": self.global_rhs,
            "witness": self.witness,
        }


def _global_rhs(scenario: Scenario):
    lo, _ = beta_window(scenario.k)
    params = EstimateParams(
        n=scenario.n, m=scenario.m, k=scenario.k, beta=0.5 * (lo + 1.0), eps=0.5,
        theta=min(scenario.theta, 0.0), K=scenario.K, gamma=scenario.gamma, R=math.inf,
    )
    constants = compute_constants(params)
    return constants.Q, rhs_value(params, constants)


def nonexistence_probe(scenario: Scenario) -> Verdict:
    """Decide whether the global estimate rules the scenario out.

    With ``K = gamma = 0`` the global right-hand side vanishes, while the
    left-hand side is bounded below by ``-theta/(k f^2) > 0`` when ``rho = 0,
    theta < 0`` and by ``rho/k > 0`` when ``rho`` is a positive constant and
    ``theta = 0``.  For ``rho = 0, theta = 0`` the estimate only forces ``f``
    to be constant.
    """
    s = scenario
    flat = s.K == 0 and s.gamma == 0
    if not flat:
        return Verdict("no-obstruction", f"K = {s.K}, gamma = {s.gamma}: global bound is positive")
    Q, rhs = _global_rhs(s)
    if Q != 0.0 or rhs != 0.0:
        return Verdict("no-obstruction", f"global bound evaluates to {rhs!r}, not 0", Q=Q, global_rhs=rhs)
    if s.rho_kind == "zero" and s.theta < 0:
        cert = (
            f"K = gamma = 0 gives Q = 0 and global rhs = 0 for theta < 0, yet "
            f"lhs >= -theta/(k f^2) = {-s.theta}/({s.k} f^2) > 0 everywhere"
        )
        return Verdict("nonexistent", cert, Q=Q, global_rhs=rhs)
    if s.rho_kind == "positive-constant" and s.theta == 0:
        cert = (
            f"K = gamma = 0 gives Q = 0 and global rhs = 0 for theta = 0, yet "
            f"lhs >= rho/k = {s.rho}/{s.k} > 0 everywhere"
        )
        return Verdict("nonexistent", cert, Q=Q, global_rhs=rhs)
    if s.rho_kind == "zero" and s.theta == 0:
        cert = "global rhs = 0 forces beta |grad f|^2 / f^2 <= 0 for every beta: f must be constant"
        return Verdict("no-obstruction", cert, constant_f_forced=True, Q=Q, global_rhs=rhs)
    return Verdict("no-obstruction", "sign pattern of (rho, theta) yields no contradiction", Q=Q, global_rhs=rhs)


@dataclass(frozen=True)
class SphereProductReport:
    n: int
    s: np.ndarray
    sphere_eigenvalue: np.ndarray
    euclidean_eigenvalue: float
    anisotropy: float
    off_diagonal: float

    @property
    def min_eigenvalue(self) -> float:
        return float(np.min(self.sphere_eigenvalue))

    @property
    def argmin_s(self) -> float:
        return float(self.s[int(np.argmin(self.sphere_eigenvalue))])

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "min_eigenvalue": self.min_eigenvalue,
            "argmin_s": self.argmin_s,
            "euclidean_eigenvalue": self.euclidean_eigenvalue,
            "anisotropy": self.anisotropy,
            "off_diagonal": self.off_diagonal,
            "nonnegative": self.min_eigenvalue >= 0 and self.euclidean_eigenvalue >= 0,
        }


def sphere_block(n: int, s: float) -> np.ndarray:
    """Ric + Hess h - dh (x) dh on the unit n-sphere in a frame adapted to grad s.

    ``h = -log((3 - s)/n)`` with ``s`` the height function, so ``Hess s = -s g``
    and ``|grad s|^2 = 1 - s^2``; the first frame vector is along ``grad s``.
    """
    eye = np.eye(n)
    along = np.zeros((n, n))
    along[0, 0] = 1.0 - s * s
    ricci = (n - 1) * eye
    hess_h = (-s / (3.0 - s)) * eye + along / (3.0 - s) ** 2
    dh_dh = along / (3.0 - s) ** 2
    return ricci + hess_h - dh_dh


def example_sphere_product(n: int, sample_count: int = 1001) -> SphereProductReport:
    """Reduce the example tensor on S^n x R^n to the height ``s`` in [-1, 1].

    The coefficient of ``dh (x) dh`` is 1 here (``m = 1``).  Requires
    ``n >= 2``: on S^1 the block is ``-s/(3-s)``, negative for ``s > 0``.
    """
    if n < 2:
        raise ParamOutOfRange("example needs n >= 2; for n = 1 the sphere block is negative at s > 0")
    if sample_count < 100:
        raise ParamOutOfRange("sample_count must be >= 100")
    s = np.linspace(-1.0, 1.0, sample_count)
    eig = np.empty(sample_count)
    aniso = 0.0
    off = 0.0
    for i, si in enumerate(s):
        block = sphere_block(n, float(si))
        diag = np.diag(block)
        mean = float(np.trace(block)) / n
        aniso = max(aniso, float(np.max(np.abs(diag - mean))))
        off = max(off, float(np.max(np.abs(block - np.diag(diag)))))
        eig[i] = float(np.min(np.linalg.eigvalsh(block)))
    return SphereProductReport(n, s, eig, 0.0, aniso, off)


@dataclass(frozen=True)
class WitnessTrace:
    outcome: str
    crossing_radius: float | None
    r: np.ndarray
    v: np.ndarray
    log_slope: np.ndarray

    def as_dict(self) -> dict:
        finite = np.isfinite(self.log_slope)
        return {
            "outcome": self.outcome,
            "crossing_radius": self.crossing_radius,
            "max_abs_log_slope": float(np.max(np.abs(self.log_slope[finite]))) if finite.any() else None,
            "samples": int(self.r.size),
        }


def numeric_blowup_witness(scenario: Scenario, domain_length: float = 10.0, count: int = 1001,
                           v0: float = 1.0) -> WitnessTrace:
    """Integrate the warping equation on a flat unweighted line for a nonexistent scenario.

    The flat line realises ``K = gamma = 0``.  The outcome is
    ``"positivity-lost"`` when ``v`` reaches zero (reported with the crossing
    radius), ``"unbounded-growth"`` when ``|v'|/v`` increases monotonically
    along the whole trace, and ``"bounded"`` otherwise.
    """
    if not nonexistence_probe(scenario).nonexistent:
        raise PreconditionError("numeric witness only runs on scenarios certified nonexistent")
    if count % 2 == 0:
        count += 1
    base = build_radial_base("line-segment", 1, 0.0, domain_length, count)
    rho = ScalarProfile.constant(base.grid, scenario.rho, "rho_B")
    config = SolveConfig(v0=v0, slope0=0.0, method="shooting", tol=1e-6)
    try:
        result = solve_warp_ode(base, rho, scenario.theta, scenario.k, config)
    except PositivityLost as exc:
        trace = exc.trace
        v = np.asarray(trace.v)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_slope = np.abs(np.asarray(trace.dv)) / v
        return WitnessTrace("positivity-lost", exc.radius, np.asarray(trace.r), v, log_slope)
    v = result.v.values
    log_slope = np.abs(radial_derivative(base, result.v)) / v
    growing = bool(np.all(np.diff(log_slope[1:]) > 0))
    return WitnessTrace("unbounded-growth" if growing else "bounded", None, base.grid.nodes, v, log_slope)


def probe_with_witness(scenario: Scenario, domain_length: float = 10.0) -> Verdict:
    verdict = nonexistence_probe(scenario)
    if not verdict.nonexistent:
        return verdict
    witness = numeric_blowup_witness(scenario, domain_length).as_dict()
    return Verdict(verdict.outcome, verdict.certificate, verdict.constant_f_forced,
                   verdict.Q, verdict.global_rhs, witness)
