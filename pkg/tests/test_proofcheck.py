import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from warpsoliton.errors import NotASolution, ParamOutOfRange, UnsupportedFamily
from warpsoliton.geometry import ScalarProfile, build_radial_base
from warpsoliton.proofcheck import (
    FAMILIES,
    INFLATION,
    L_profile,
    bochner_check,
    build_cutoff,
    cutoff_condition_margins,
    cutoff_gradient_check,
    cutoff_values,
    delta_L_check,
    max_point_of,
    max_point_trace,
    quadratic_positive_root,
    quadratic_root_bound,
)
from warpsoliton.warpfield import SolitonInstance, hyperbolic_decomposition, spherical_decomposition

# sympy oracle: hyperbolic plane, m = 1, u = r^2, K = 1, margin at r = 1
BOCHNER_HYPERBOLIC_R2_AT_1 = 3.7627370012452777674

# subnormal inputs make 2b/a underflow to zero, which says nothing about the lemma
NORMAL_OR_ZERO = st.one_of(st.just(0.0), st.floats(1e-300, 10.0))


def battery(r):
    return {"r": r, "r2": r * r, "r3": r**3, "sin": np.sin(r), "exp": np.exp(r), "const": np.ones_like(r)}


class TestCutoffs:
    @pytest.mark.parametrize(
        "family, c1, c2",
        [("quartic-poly", 4.0, 4.0), ("cos4", math.pi, math.pi**2)],
    )
    def test_certified_constants(self, family, c1, c2):
        spec = build_cutoff(family)
        assert c1 <= spec.c1_certified <= INFLATION * c1 * (1 + 1e-9)
        assert c2 <= spec.c2_certified <= INFLATION * c2 * (1 + 1e-9)

    @pytest.mark.parametrize("family", FAMILIES)
    def test_boundary_values(self, family):
        xi, _, _ = cutoff_values(family, np.array([0.5, 1.0, 2.0, 2.5]))
        np.testing.assert_allclose(xi, [1.0, 1.0, 0.0, 0.0], atol=1e-15)

    def test_unknown_family(self):
        with pytest.raises(UnsupportedFamily):
            build_cutoff("gaussian")

    @pytest.mark.parametrize("family", FAMILIES)
    def test_conditions_at_fresh_random_points(self, family):
        spec = build_cutoff(family)
        t = np.random.default_rng(20261016).uniform(1.0, 2.0, 10_000)
        for name, margin in cutoff_condition_margins(spec, t).items():
            assert margin.min() >= -1e-12, name

    @settings(max_examples=100, deadline=None)
    @given(st.floats(1.0, 2.0))
    def test_conditions_pointwise(self, t):
        spec = build_cutoff("cos4")
        for margin in cutoff_condition_margins(spec, np.array([t])).values():
            assert margin[0] >= -1e-12

    @pytest.mark.parametrize("kind, n", [("euclidean-cone", 2), ("hyperbolic", 2), ("hyperbolic", 4)])
    @pytest.mark.parametrize("family", ["quartic-poly", "cos4"])
    def test_gradient_check_fd(self, kind, n, family):
        base = build_radial_base(kind, n, 0.01, 2.5, 249)
        chk = cutoff_gradient_check(build_cutoff(family), base, 1.0)
        assert chk.min_a2 >= -1e-6 and chk.min_a3 >= -1e-6

    @pytest.mark.parametrize("family", FAMILIES)
    def test_gradient_check_chain(self, family):
        base = build_radial_base("hyperbolic", 3, 0.01, 2.5, 249)
        chk = cutoff_gradient_check(build_cutoff(family), base, 1.0, derivatives="chain")
        assert chk.min_a2 >= -1e-6 and chk.min_a3 >= -1e-6

    def test_plateau_is_trivial(self):
        base = build_radial_base("euclidean-cone", 2, 0.01, 2.5, 249)
        chk = cutoff_gradient_check(build_cutoff("cos4"), base, 1.0, K=0.0)
        inner = chk.r < 0.9
        np.testing.assert_allclose(chk.a2_margin[inner], build_cutoff("cos4").c1_certified ** 2)


class TestBochner:
    def test_cone_r2(self):
        base = build_radial_base("euclidean-cone", 2, 0.1, 2.0, 191, m=2.0)
        u = ScalarProfile.from_function(base.grid, lambda r: r * r)
        prof = bochner_check(base, u, 0.0)
        np.testing.assert_allclose(prof.lhs, 8.0, atol=1e-8)
        np.testing.assert_allclose(prof.rhs, 4.0, atol=1e-8)

    def test_hyperbolic_oracle(self):
        base = build_radial_base("hyperbolic", 2, 0.1, 2.0, 381)
        u = ScalarProfile.from_function(base.grid, lambda r: r * r)
        prof = bochner_check(base, u, 1.0, samples=[1.0])
        assert prof.margin[0] == pytest.approx(BOCHNER_HYPERBOLIC_R2_AT_1, rel=1e-6)

    def test_linear_equality(self):
        base = build_radial_base("line-segment", 1, 0.0, 2.0, 201)
        u = ScalarProfile.from_function(base.grid, lambda r: 3 * r)
        assert np.max(np.abs(bochner_check(base, u, 0.0).margin)) < 1e-6

    @pytest.mark.parametrize("kind, K", [("euclidean-cone", 0.0), ("hyperbolic", 1.0)])
    @pytest.mark.parametrize("name", ["r", "r2", "r3", "sin", "exp", "const"])
    def test_battery(self, kind, K, name):
        base = build_radial_base(kind, 2, 0.1, 3.0, 291)
        u = ScalarProfile(base.grid, battery(base.grid.nodes)[name], name)
        assert bochner_check(base, u, K).min_margin >= -1e-6


class TestDeltaL:
    @pytest.mark.parametrize("beta", np.linspace(0.1, 0.9, 9))
    def test_hyperbolic_zero(self, beta):
        prof = delta_L_check(hyperbolic_decomposition(2, 0.0, 3.0, 301), beta, 0.0)
        assert np.max(np.abs(prof.margin)) < 1e-5

    @pytest.mark.parametrize("beta", np.linspace(0.1, 0.9, 9))
    def test_spherical(self, beta):
        prof = delta_L_check(spherical_decomposition(2), beta, 0.0, samples=np.linspace(0.5, 2.5, 21))
        assert prof.min_margin >= -1e-5

    def test_constant_instance(self):
        base = build_radial_base("line-segment", 1, 0.0, 1.0, 101)
        one = ScalarProfile.constant(base.grid, 1.0)
        inst = SolitonInstance(base, one, one, 2, 1.0)
        prof = delta_L_check(inst, 0.5, 0.0)
        np.testing.assert_allclose(prof.margin, 0.0, atol=1e-9)

    def test_refuses_non_solution(self):
        base = build_radial_base("line-segment", 1, 0.0, 1.0, 101)
        f = ScalarProfile.from_function(base.grid, lambda r: 1 + r * r)
        inst = SolitonInstance(base, f, ScalarProfile.constant(base.grid, 0.0), 2, 0.0)
        with pytest.raises(NotASolution):
            delta_L_check(inst, 0.5, 0.0)


class TestQuadratic:
    def test_examples(self):
        assert quadratic_root_bound(1, 0, 4) == 2.0
        assert quadratic_root_bound(2, 2, 8) == 4.0
        assert quadratic_positive_root(2, 2, 8) == pytest.approx((1 + math.sqrt(17)) / 2)

    def test_rejects_bad_leading(self):
        with pytest.raises(ParamOutOfRange):
            quadratic_root_bound(0.0, 1.0, 1.0)

    @settings(max_examples=500, deadline=None)
    @given(st.floats(1e-6, 10.0), NORMAL_OR_ZERO, NORMAL_OR_ZERO)
    def test_bound_dominates_root(self, a, b, c):
        with mpmath.workdps(50):
            A, B, C = mpmath.mpf(a), mpmath.mpf(b), mpmath.mpf(c)
            root = (B + mpmath.sqrt(B * B + 4 * A * C)) / (2 * A)
            assert quadratic_root_bound(a, b, c) >= root * (1 - mpmath.mpf("1e-15"))

    @settings(max_examples=200, deadline=None)
    @given(st.floats(1e-6, 10.0), st.floats(0.0, 10.0), st.floats(0.0, 10.0))
    def test_positive_root_solves_quadratic(self, a, b, c):
        z = quadratic_positive_root(a, b, c)
        assert a * z * z - b * z - c == pytest.approx(0.0, abs=1e-12 * (1 + a * z * z + b * z + c))


class TestMaxPoint:
    def test_trivial_branch(self):
        trace = max_point_trace(hyperbolic_decomposition(2, 0.0, 3.0, 301), 0.5, build_cutoff("cos4"), 1.0)
        assert not trace.nontrivial
        assert trace.as_dict()["branch"] == "trivial"

    def test_constant_L_on_plateau(self):
        base = build_radial_base("line-segment", 1, 0.0, 3.0, 301)
        one = ScalarProfile.constant(base.grid, 1.0)
        inst = SolitonInstance(base, one, one, 2, 0.0)
        np.testing.assert_allclose(L_profile(inst, 0.5).values, 2.0)
        trace = max_point_trace(inst, 0.5, build_cutoff("cos4"), 1.0)
        assert trace.nontrivial and trace.r <= 1.0

    def test_interior_maximum(self):
        base = build_radial_base("line-segment", 1, 0.0, 3.0, 301)
        L = ScalarProfile.from_function(base.grid, lambda r: 1 - (r - 1) ** 2)
        psi = ScalarProfile.constant(base.grid, 1.0)
        trace = max_point_of(base, L, psi, 2.0)
        assert trace.r == pytest.approx(1.0)
        assert trace.grad_norm <= 1e-6
