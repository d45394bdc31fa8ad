import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kslab.params import Parameters
from kslab.thresholds import (
    BRANCH_CONVEX,
    BRANCH_GENERAL,
    CoefficientSet3D,
    CoefficientSet45D,
    coefficient_recipe_3d,
    feasibility_floor_45d,
    gamma_rate,
    h_objective,
    minimize_h,
    mu0_3d,
    mu0_general,
    mu1,
    report,
    select_coefficients_3d,
    select_coefficients_45d,
    verify_system_3d,
    verify_system_45d,
)

from oracles import h_bruteforce

SQRT10 = math.sqrt(10.0)
MU0_UNIT_3D = 9.0 / (SQRT10 - 2.0)  # 7.743416490252569


def make_params(**kw):
    base = dict(d1=1, d2=1, chi=1, alpha=1, beta=1, kappa=1, mu=8, a=0, n=3)
    base.update(kw)
    return Parameters(**base)


class TestMu0:
    def test_unit_nonconvex_3d(self):
        value, branch = mu0_3d(make_params(), convex=False)
        assert branch == BRANCH_GENERAL
        assert value == pytest.approx(7.743416, abs=1e-6)
        assert value == pytest.approx(MU0_UNIT_3D, rel=1e-14)

    def test_unit_convex_3d(self):
        value, branch = mu0_3d(make_params(), convex=True)
        assert branch == BRANCH_CONVEX
        assert value == 0.75

    def test_convex_branch_needs_equal_diffusion_and_attraction(self):
        value, branch = mu0_3d(make_params(d2=2.0), convex=True)
        assert branch == BRANCH_GENERAL
        value, branch = mu0_3d(make_params(chi=-1.0), convex=True)
        assert branch == BRANCH_GENERAL

    def test_zero_chi(self):
        assert mu0_3d(make_params(chi=0.0), convex=False)[0] == 0.0
        assert mu0_3d(make_params(chi=0.0), convex=True)[0] == 0.0

    def test_hand_evaluated_general_point(self):
        # (3/(sqrt(10)-2)) (1/1 + 2/2) alpha |chi| with chi = -1
        value, _ = mu0_3d(make_params(d1=1, d2=2, chi=-1), convex=False)
        assert value == pytest.approx(6.0 / (SQRT10 - 2.0), rel=1e-14)
        assert value == pytest.approx(5.162277, abs=1e-6)

    def test_dimension_gate(self):
        with pytest.raises(ValueError, match="n = 3"):
            mu0_3d(make_params(n=4))
        with pytest.raises(ValueError, match="3, 4, or 5"):
            mu0_general(make_params(n=6))
        with pytest.raises(ValueError, match="3, 4, or 5"):
            mu0_general(make_params(n=2))

    def test_general_4d_convex(self):
        value, branch = mu0_general(make_params(n=4), convex=True)
        assert branch == BRANCH_CONVEX
        assert value == 1.0

    def test_general_4d_nonconvex_unit(self):
        # second max argument 12/(sqrt(12)-2) dominates h(4,1,1)/3
        value, branch = mu0_general(make_params(n=4), convex=False)
        assert branch == BRANCH_GENERAL
        assert value == pytest.approx(12.0 / (math.sqrt(12.0) - 2.0), rel=1e-12)
        assert value == pytest.approx(8.196152, abs=1e-6)
        assert minimize_h(4, 1.0, 1.0).value / 3.0 < value

    def test_delegates_to_3d(self):
        assert mu0_general(make_params())[0] == mu0_3d(make_params())[0]

    @given(c=st.floats(0.01, 100))
    @settings(max_examples=40, deadline=None)
    def test_homogeneous_in_alpha_and_chi(self, c):
        for n in (3, 4):
            base, _ = mu0_general(make_params(n=n), convex=False)
            scaled_alpha, _ = mu0_general(make_params(n=n, alpha=c), convex=False)
            scaled_chi, _ = mu0_general(make_params(n=n, chi=c), convex=False)
            flipped, _ = mu0_general(make_params(n=n, chi=-c), convex=False)
            assert scaled_alpha == pytest.approx(c * base, rel=1e-12)
            assert scaled_chi == pytest.approx(c * base, rel=1e-12)
            assert flipped == scaled_chi

    @pytest.mark.parametrize("n", [3, 4])
    def test_nonincreasing_in_diffusion(self, n):
        ds = [0.25, 0.5, 1.0, 2.0, 4.0]
        along_d1 = [mu0_general(make_params(n=n, d1=d))[0] for d in ds]
        along_d2 = [mu0_general(make_params(n=n, d2=d))[0] for d in ds]
        assert all(a >= b - 1e-12 for a, b in zip(along_d1, along_d1[1:]))
        assert all(a >= b - 1e-12 for a, b in zip(along_d2, along_d2[1:]))

    def test_divergence_at_small_diffusion(self):
        small = mu0_general(make_params(d1=1e-6))[0]
        unit = mu0_general(make_params())[0]
        assert small > 1e3 * unit


class TestMinimizeH:
    def test_matches_bruteforce_unit(self):
        oracle_value, _, _ = h_bruteforce(4, 1.0, 1.0, cells=600, refine=2)
        mine = minimize_h(4, 1.0, 1.0)
        assert abs(mine.value - oracle_value) / oracle_value < 1e-5
        assert mine.value == pytest.approx(13.58502712, rel=1e-6)

    def test_argmin_strictly_interior(self):
        m = minimize_h(5, 2.0, 0.5)
        assert 0.0 < m.eps < 2.0
        assert 0.0 < m.eta < 0.5
        assert m.value == h_objective(5, 2.0, 0.5, m.eps, m.eta)

    def test_objective_diverges_at_small_eps(self):
        assert h_objective(4, 1.0, 1.0, 1e-12, 0.5) > 1e3
        assert h_objective(4, 1.0, 1.0, 0.5, 1e-12) > 1e3
        assert h_objective(4, 1.0, 1.0, -0.1, 0.5) == math.inf

    def test_monotone_in_d1(self):
        hi, _, _ = h_bruteforce(4, 1.0, 1.0, cells=400, refine=1)
        lo, _, _ = h_bruteforce(4, 2.0, 1.0, cells=400, refine=1)
        assert lo <= hi
        assert minimize_h(4, 2.0, 1.0).value <= minimize_h(4, 1.0, 1.0).value

    def test_joint_scaling(self):
        # h(n, c d1, c d2) = h(n, d1, d2) / c
        base = minimize_h(4, 1.0, 1.0).value
        assert minimize_h(4, 0.1, 0.1).value == pytest.approx(10 * base, rel=1e-10)
        assert minimize_h(4, 4.0, 4.0).value == pytest.approx(base / 4, rel=1e-10)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError, match="4, 5"):
            minimize_h(3, 1.0, 1.0)
        with pytest.raises(ValueError, match="positive"):
            minimize_h(4, -1.0, 1.0)


class TestMu1AndGamma:
    def test_nonpositive_kappa(self):
        assert mu1(make_params(kappa=-1.0)) == 0.0
        assert mu1(make_params(kappa=0.0)) == 0.0

    def test_unit_value(self):
        assert mu1(make_params()) == 0.25

    def test_zero_chi(self):
        assert mu1(make_params(chi=0.0)) == 0.0

    def test_sqrt_kappa_scaling(self):
        base = mu1(make_params())
        assert mu1(make_params(kappa=4.0)) == pytest.approx(2 * base, rel=1e-12)

    def test_monotone_and_divergent(self):
        for field in ("d1", "d2", "beta"):
            hi = mu1(make_params(**{field: 0.25}))
            lo = mu1(make_params(**{field: 4.0}))
            assert hi > lo
            assert mu1(make_params(**{field: 1e-8})) > 1e3 * mu1(make_params())

    def test_gamma_unit_case(self):
        gamma, eps0 = gamma_rate(make_params())
        assert eps0 == pytest.approx(128.125, rel=1e-14)
        assert gamma == pytest.approx(7.797256097560976e-4, rel=1e-12)

    def test_gamma_positive_near_mu1(self):
        p = make_params(mu=0.2500001)
        gamma, eps0 = gamma_rate(p)
        assert gamma > 0.0 and eps0 > 0.0

    def test_gamma_even_in_chi(self):
        assert gamma_rate(make_params(chi=-1.0)) == gamma_rate(make_params(chi=1.0))

    def test_gamma_rejections(self):
        with pytest.raises(ValueError, match="kappa > 0"):
            gamma_rate(make_params(kappa=-1.0))
        with pytest.raises(ValueError, match="mu > mu1"):
            gamma_rate(make_params(mu=0.25))
        with pytest.raises(ValueError, match="chi = 0"):
            gamma_rate(make_params(chi=0.0))


class TestCoefficients3D:
    # lower bounds of the unit example: (d1+d2)^2/(8 eps4 (d1-eps1)) and
    # (eps3+eps4)/(2 (d2-eps2))
    DELTA1_FLOOR = 2.5811388300841898
    DELTA3_FLOOR = 0.4743416490252569

    def test_unit_eps_selection(self):
        c = select_coefficients_3d(make_params(), 8.0)
        root = SQRT10 - 2.0
        assert c.eps1 == 0.5
        assert c.eps2 == pytest.approx(root / 3.0, rel=1e-14)
        assert c.eps3 == pytest.approx(root / 6.0, rel=1e-14)
        assert c.eps4 == pytest.approx(root / 3.0, rel=1e-14)
        assert c.delta2 == 1.0

    def test_unit_delta_structure(self):
        c = select_coefficients_3d(make_params(), 8.0)
        s1 = c.delta1 - self.DELTA1_FLOOR
        s3 = c.delta3 - self.DELTA3_FLOOR
        assert s1 > 0.0 and s3 > 0.0
        assert s1 == pytest.approx(s3, rel=1e-10)

    def test_selected_set_verifies(self):
        p = make_params()
        c = select_coefficients_3d(p, 8.0)
        assert verify_system_3d(p, 8.0, c).passed

    def test_same_set_fails_fourth_inequality_below_threshold(self):
        p = make_params()
        c = select_coefficients_3d(p, 8.0)
        check = verify_system_3d(p, 7.0, c)
        assert not check.passed
        assert not check.checks[3].passed
        assert all(ch.passed for ch in check.checks[:3])

    def test_recipe_below_mu0_fails_fourth(self):
        p = make_params()
        c = coefficient_recipe_3d(p, 0.99 * MU0_UNIT_3D)
        check = verify_system_3d(p, 0.99 * MU0_UNIT_3D, c)
        assert not check.checks[3].passed

    def test_degenerate_eps1_fails_first(self):
        p = make_params()
        c = CoefficientSet3D(
            eps1=1.0, eps2=0.3, eps3=0.2, eps4=0.4,
            delta1=1.0, delta2=1.0, delta3=1.0,
        )
        check = verify_system_3d(p, 8.0, c)
        assert not check.checks[0].passed
        assert check.checks[0].margin < 0.0

    def test_fourth_margin_strictly_increasing_in_mu(self):
        p = make_params()
        c = select_coefficients_3d(p, 8.0)
        margins = [
            verify_system_3d(p, mu, c).checks[3].margin
            for mu in np.linspace(7.0, 12.0, 11)
        ]
        assert all(b > a for a, b in zip(margins, margins[1:]))
        others = [
            verify_system_3d(p, mu, c).checks[0].margin
            for mu in np.linspace(7.0, 12.0, 5)
        ]
        assert all(m == others[0] for m in others)

    def test_rejects_at_threshold_and_zero_chi(self):
        with pytest.raises(ValueError, match="mu > mu0"):
            select_coefficients_3d(make_params(), MU0_UNIT_3D)
        with pytest.raises(ValueError, match="chi = 0"):
            select_coefficients_3d(make_params(chi=0.0), 100.0)

    def test_random_draw_ladder(self):
        rng = np.random.default_rng(7)
        for _ in range(15):
            d1, d2, alpha = rng.uniform(0.1, 10, 3)
            chi = rng.uniform(0.1, 10) * rng.choice([-1, 1])
            p = make_params(d1=d1, d2=d2, alpha=alpha, chi=chi)
            m0, _ = mu0_3d(p, convex=False)
            for mult in (1.001, 1.1, 2.0, 10.0):
                c = select_coefficients_3d(p, mult * m0)
                assert verify_system_3d(p, mult * m0, c).passed


class TestCoefficients45D:
    def test_verify_flags_degenerate_eps(self):
        p = make_params(n=4)
        c = CoefficientSet45D(
            eps=1.0, eta=0.5, eps1=1, eps2=1, eps3=1, eps4=1,
            delta1=1, delta2=1, delta3=1, delta4=1,
        )
        check = verify_system_45d(p, 10.0, c)
        assert not check.checks[0].passed

    def test_verify_flags_ratio_constraint(self):
        p = make_params(n=4)
        c = CoefficientSet45D(
            eps=0.4, eta=0.4, eps1=1, eps2=1e-6, eps3=1, eps4=1,
            delta1=1, delta2=1, delta3=1, delta4=1,
        )
        check = verify_system_45d(p, 10.0, c)
        assert "delta-ratio-window" in check.failed_names()

    def test_certified_floor_exceeds_near_threshold_damping(self):
        # the additive threshold chain is not attainable by the verbatim
        # inequality system: feasibility starts well above mu0
        p = make_params(n=4)
        m0, _ = mu0_general(p, convex=False)
        floor = feasibility_floor_45d(p)
        assert floor > 1.2 * m0
        assert 1.6 * m0 < floor < 1.9 * m0

    def test_selection_refused_below_certified_floor(self):
        p = make_params(n=4)
        m0, _ = mu0_general(p, convex=False)
        with pytest.raises(RuntimeError, match="infeasible"):
            select_coefficients_45d(p, 1.2 * m0)

    @pytest.mark.parametrize("n", [4, 5])
    def test_selection_verifies_above_floor(self, n):
        p = make_params(n=n)
        floor = feasibility_floor_45d(p)
        mu = 4.0 * floor
        c = select_coefficients_45d(p, mu)
        check = verify_system_45d(p, mu, c)
        assert check.passed
        assert 0.0 < c.eps < p.d1 and 0.0 < c.eta < p.d2

    def test_unit_selection_at_twice_mu0(self):
        p = make_params(n=4)
        m0, _ = mu0_general(p, convex=False)
        c = select_coefficients_45d(p, 2.0 * m0)
        assert verify_system_45d(p, 2.0 * m0, c).passed

    def test_floor_scales_with_alpha_chi(self):
        p = make_params(n=4)
        base = feasibility_floor_45d(p)
        doubled = feasibility_floor_45d(make_params(n=4, alpha=2.0))
        assert doubled == pytest.approx(2.0 * base, rel=1e-3)
        assert feasibility_floor_45d(make_params(n=4, chi=0.0)) == 0.0

    def test_selection_rejects_threshold_and_zero_chi(self):
        p = make_params(n=4)
        m0, _ = mu0_general(p, convex=False)
        with pytest.raises(ValueError, match="mu > mu0"):
            select_coefficients_45d(p, m0)
        with pytest.raises(ValueError, match="chi = 0"):
            select_coefficients_45d(make_params(n=4, chi=0.0), 100.0)


class TestReport:
    def test_unit_composition(self):
        rep = report(make_params(), convex=False)
        assert rep.mu0 == pytest.approx(MU0_UNIT_3D, rel=1e-12)
        assert rep.mu1 == 0.25
        assert rep.gamma == pytest.approx(7.797256097560976e-4, rel=1e-12)
        assert rep.epsilon0 == pytest.approx(128.125)
        assert rep.coeffs3 is not None
        assert rep.applicability.n == 3

    def test_negative_kappa(self):
        rep = report(make_params(kappa=-1.0))
        assert rep.mu1 == 0.0
        assert rep.gamma is None and rep.epsilon0 is None

    def test_zero_chi(self):
        rep = report(make_params(chi=0.0))
        assert rep.mu0 == 0.0 and rep.mu1 == 0.0
        assert rep.gamma is None
        assert rep.coeffs3 is None

    def test_gamma_positive_whenever_defined(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            p = make_params(
                d1=rng.uniform(0.1, 5), d2=rng.uniform(0.1, 5),
                chi=rng.uniform(-3, 3), kappa=rng.uniform(0.1, 5),
                mu=rng.uniform(0.1, 20),
            )
            rep = report(p)
            if rep.gamma is not None:
                assert rep.gamma > 0.0
