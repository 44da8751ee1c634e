"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are repeated in
the terminal summary) or directly with ``python3 tests/test_acceptance.py``.
"""

import math
from pathlib import Path

import numpy as np
import pytest

from warpsoliton.bounds import EstimateParams, compute_constants, global_estimate, local_estimate
from warpsoliton.cli import load_config, run
from warpsoliton.geometry import (
    RadialGrid,
    ScalarProfile,
    bakry_emery_lower_bound,
    build_radial_base,
    qian_comparison_check,
)
from warpsoliton.nonexist import Scenario, example_sphere_product, nonexistence_probe, numeric_blowup_witness
from warpsoliton.proofcheck import (
    bochner_check,
    build_cutoff,
    cutoff_gradient_check,
    delta_L_check,
    quadratic_positive_root,
    quadratic_root_bound,
)
from warpsoliton.warpfield import (
    SolveConfig,
    f_to_v,
    hyperbolic_decomposition,
    solve_warp_ode,
    spherical_decomposition,
    theta_profile,
    u_to_v,
    v_to_f,
    v_to_u,
    warp_residual,
)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
RESULTS: list[str] = []
BETA_GRID = np.linspace(0.1, 0.9, 9)  # admissible for k = 2


def record(number, title, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title} | {detail}"
    RESULTS.append(line)
    print(line)
    assert passed, line


def criterion_1():
    k = 2
    base = build_radial_base("line-segment", 1, 0.0, 3.0, 301)
    rho = ScalarProfile.constant(base.grid, -k, "rho_B")
    exact = np.exp(k * base.grid.nodes)
    worst_err = worst_res = 0.0
    for method in ("shooting", "collocation"):
        sol = solve_warp_ode(base, rho, 0.0, k, SolveConfig(v0=1.0, slope0=float(k), method=method))
        worst_err = max(worst_err, float(np.max(np.abs(sol.v.values / exact - 1))))
        res = warp_residual(base, sol.v, rho, 0.0, k).values[1:-1]
        worst_res = max(worst_res, float(np.max(np.abs(res))))
    ok = worst_err < 1e-6 and worst_res < 1e-8
    return ok, f"max rel err {worst_err:.2e} (< 1e-6), residual {worst_res:.2e} (< 1e-8)"


def criterion_2():
    sph = spherical_decomposition(2, 0.1, 3.0, 291)
    t_sph = theta_profile(sph).values
    hyp = hyperbolic_decomposition(2, 0.0, 1.0, 201)
    t_hyp = theta_profile(hyp).values
    std = float(np.std(t_sph))
    mean_dev = abs(float(np.mean(t_sph)) - 1.0)
    hyp_dev = float(np.max(np.abs(t_hyp)))
    ok = std < 1e-6 and mean_dev < 1e-6 and hyp_dev < 1e-8
    return ok, f"sphere std {std:.2e}, |mean-(k-1)| {mean_dev:.2e}; hyperbolic max|theta| {hyp_dev:.2e}"


def criterion_3():
    P = compute_constants(EstimateParams(n=2, m=1, k=2, beta=0.5, eps=0.5, c1=2, c2=16, R=1, K=0)).P
    Q = compute_constants(EstimateParams(n=2, m=2, k=2, beta=0.5, eps=0.5, gamma=1.0, K=0)).Q
    S = compute_constants(EstimateParams(n=2, m=2, k=2, beta=0.5, eps=0.5, theta=1.0, M=1.0, K=0)).S
    zero = compute_constants(EstimateParams(n=2, m=2, k=2, beta=0.5, eps=0.5, K=0.0, gamma=0.0))
    q_ref = 0.75 * 128 ** (1 / 3)
    errs = (abs(P / 38 - 1), abs(Q / q_ref - 1), abs(S / 8 - 1))
    ok = max(errs) < 1e-12 and zero.Q == 0.0 and zero.S == 0.0
    return ok, f"rel errs P {errs[0]:.1e}, Q {errs[1]:.1e}, S {errs[2]:.1e}; Q0={zero.Q}, S0={zero.S}"


def criterion_4():
    inst = hyperbolic_decomposition(2, 0.0, 4.0, 401)
    ok = True
    worst_lhs = 0.0
    for beta in BETA_GRID:
        rep = global_estimate(inst, EstimateParams(n=1, m=1, k=2, beta=beta, eps=0.5, K=0.0, gamma=0.0,
                                                   R=math.inf))
        worst_lhs = max(worst_lhs, float(np.max(np.abs(rep.lhs - (beta - 1)))))
        ok &= rep.passed and rep.rhs == 0.0
    cut = build_cutoff("cos4")
    margins = []
    for R in (1.0, 2.0):
        rep = local_estimate(inst, EstimateParams(n=1, m=1, k=2, beta=0.5, eps=0.5, K=0.0, gamma=0.0,
                                                  c1=cut.c1_certified, c2=cut.c2_certified, R=R))
        margins.append(rep.margin_min)
        ok &= rep.passed and rep.margin_min > 0
    ok &= worst_lhs < 1e-6
    return bool(ok), f"global: 9 betas, |lhs-(beta-1)| {worst_lhs:.1e}; local margins {margins[0]:.3g}, {margins[1]:.3g}"


def criterion_5():
    worst_cut = math.inf
    for kind in ("euclidean-cone", "hyperbolic"):
        base = build_radial_base(kind, 2, 0.01, 2.5, 249)
        for family in ("quartic-poly", "cos4"):
            chk = cutoff_gradient_check(build_cutoff(family), base, 1.0)
            worst_cut = min(worst_cut, chk.min_a2, chk.min_a3)
    worst_boch = math.inf
    for kind in ("euclidean-cone", "hyperbolic"):
        base = build_radial_base(kind, 2, 0.1, 3.0, 291)
        K = bakry_emery_lower_bound(base)
        r = base.grid.nodes
        for values in (r, r * r, r**3, np.sin(r), np.exp(r), np.ones_like(r)):
            worst_boch = min(worst_boch, bochner_check(base, ScalarProfile(base.grid, values), K).min_margin)
    worst_dl = math.inf
    for inst in (hyperbolic_decomposition(2, 0.0, 3.0, 301), spherical_decomposition(2)):
        K = bakry_emery_lower_bound(inst.base)
        for beta in BETA_GRID:
            worst_dl = min(worst_dl, delta_L_check(inst, beta, K).min_margin)
    ok = worst_cut >= -1e-6 and worst_boch >= -1e-6 and worst_dl >= -1e-5
    return ok, f"min cutoff {worst_cut:.2e}, bochner {worst_boch:.2e}, delta_L {worst_dl:.2e}"


def criterion_6():
    worst = math.inf
    flat_dev = 0.0
    for n in (2, 3, 4):
        samples = np.linspace(0.0, 3.0, 50)
        flat = qian_comparison_check(build_radial_base("euclidean-cone", n, 0.0, 3.0, 301), 0.0, samples,
                                     origin="even")
        hyp = qian_comparison_check(build_radial_base("hyperbolic", n, 0.0, 3.0, 301), n - 1.0, samples,
                                    origin="even")
        flat_dev = max(flat_dev, max(abs(s.margin) for s in flat))
        worst = min(worst, min(s.margin for s in flat), min(s.margin for s in hyp))
    ok = worst >= -1e-6 and flat_dev < 1e-8
    return ok, f"min margin {worst:.2e} (>= -1e-6), euclidean |margin| {flat_dev:.2e} (< 1e-8)"


def criterion_7():
    rng = np.random.default_rng(7)
    abc = 10.0 - rng.uniform(0.0, 10.0, size=(1000, 3))  # (0, 10]
    violations = sum(quadratic_root_bound(*t) < quadratic_positive_root(*t) for t in abc)
    return violations == 0, f"{violations} violations in 1000 triples"


def criterion_8():
    a = nonexistence_probe(Scenario("zero", theta=-1.0, k=2))
    b = nonexistence_probe(Scenario("positive-constant", theta=0.0, rho_value=1.0, k=2))
    c = nonexistence_probe(Scenario("other", theta=0.0, rho_value=-2.0, k=2))
    wa = numeric_blowup_witness(Scenario("zero", theta=-1.0, k=2))
    wb = numeric_blowup_witness(Scenario("positive-constant", theta=0.0, rho_value=1.0, k=2))
    good = ("positivity-lost", "unbounded-growth")
    ok = a.nonexistent and b.nonexistent and c.outcome == "no-obstruction"
    ok = ok and wa.outcome in good and wb.outcome in good
    return ok, (f"verdicts {a.outcome}/{b.outcome}/{c.outcome}; witnesses {wa.outcome} "
                f"at r={wa.crossing_radius:.4g}, {wb.outcome} at r={wb.crossing_radius:.4g}")


def criterion_9():
    worst_min = worst_aniso = 0.0
    for n in range(2, 7):
        rep = example_sphere_product(n, 1001)
        worst_min = max(worst_min, abs(rep.min_eigenvalue - (n - 1.5)))
        worst_aniso = max(worst_aniso, rep.anisotropy, rep.off_diagonal)
    ok = worst_min < 1e-9 and worst_aniso < 1e-12
    return ok, f"|min - (n - 3/2)| {worst_min:.1e}, anisotropy {worst_aniso:.1e}"


def criterion_10():
    same = True
    for sub, name in (("verify", "verify_hyperbolic"), ("proofcheck", "proofcheck_hyperbolic"),
                      ("example", "example"), ("solve", "solve_exp")):
        config = load_config(CONFIGS / f"{name}.toml", sub)
        hashes = {run(sub, config, seed=3)[0]["meta"]["content_hash"] for _ in range(2)}
        same &= len(hashes) == 1
    rng = np.random.default_rng(10)
    grid = RadialGrid(0.0, 1.0, 101)
    worst = 0.0
    for k in (1, 2, 3, 5, 8):
        for _ in range(20):
            f = ScalarProfile(grid, np.exp(rng.uniform(-5.0, 5.0, grid.count)), "f")
            v = f_to_v(f, k)
            worst = max(worst, float(np.max(np.abs(v_to_f(v, k).values / f.values - 1))))
            worst = max(worst, float(np.max(np.abs(u_to_v(v_to_u(v)).values / v.values - 1))))
    ok = bool(same) and worst < 1e-12
    return ok, f"hashes stable: {bool(same)}; worst round-trip rel err {worst:.1e}"


CRITERIA = [
    (1, "closed-form solution recovery", criterion_1),
    (2, "fiber constant is constant on the closed-form instances", criterion_2),
    (3, "constants arithmetic", criterion_3),
    (4, "global and local estimates hold on the hyperbolic instance", criterion_4),
    (5, "cutoff, Bochner and Delta_L margins", criterion_5),
    (6, "Laplacian comparison", criterion_6),
    (7, "quadratic-root lemma", criterion_7),
    (8, "nonexistence logic", criterion_8),
    (9, "sphere-product example", criterion_9),
    (10, "determinism and round-trips", criterion_10),
]


@pytest.mark.parametrize("number, title, check", CRITERIA, ids=[f"criterion_{c[0]}" for c in CRITERIA])
def test_criterion(number, title, check):
    passed, detail = check()
    record(number, title, passed, detail)


if __name__ == "__main__":
    failures = 0
    for number, title, check in CRITERIA:
        try:
            record(number, title, *check())
        except AssertionError:
            failures += 1
    raise SystemExit(1 if failures else 0)
