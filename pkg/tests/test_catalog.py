import math

import pytest

from coneshrink.catalog import (
    COT_SUM,
    EQ030_LITERAL,
    CurvatureProfile,
    builtin_catalog,
    curvature_antiderivative,
    curvature_antiderivative_numeric,
    curvature_derivative,
    make_family,
    mean_curvature,
    minimal_distance,
)
from coneshrink.errors import (
    ConstraintViolation,
    NotMeanConvex,
    OutOfRange,
    RootNotBracketed,
    UnsupportedMode,
)


class TestMakeFamily:
    def test_g1_reference(self, fam1):
        assert fam1.theta == (math.pi / 4,)
        assert fam1.d_focal == pytest.approx(3 * math.pi / 4, abs=1e-15)
        assert fam1.d0 == pytest.approx(math.pi / 4, abs=1e-13)

    def test_g2_reference(self, fam2):
        assert fam2.theta == pytest.approx((math.pi / 6, math.pi / 6 + math.pi / 2))
        assert fam2.d_focal == pytest.approx(math.pi / 3)
        assert fam2.d0 == pytest.approx(math.pi / 12, abs=1e-13)

    def test_g_not_allowed(self):
        with pytest.raises(ConstraintViolation) as err:
            make_family(5, 1, 1, 6, 0.3)
        assert err.value.invariant == "g_allowed"

    def test_odd_g_needs_equal_multiplicities(self):
        with pytest.raises(ConstraintViolation) as err:
            make_family(3, 1, 2, 6, 0.2)
        assert err.value.invariant == "odd_g_equal_multiplicities"

    def test_multiplicity_sum(self):
        with pytest.raises(ConstraintViolation) as err:
            make_family(2, 1, 1, 5, 0.3)
        assert err.value.invariant == "multiplicity_sum"

    def test_abresch(self):
        with pytest.raises(ConstraintViolation) as err:
            make_family(6, 3, 3, 19, 0.05)
        assert err.value.invariant == "abresch_g6"

    def test_theta1_range(self):
        with pytest.raises(ConstraintViolation) as err:
            make_family(2, 1, 1, 3, math.pi / 2 + 0.01)
        assert err.value.invariant == "theta1_range"

    def test_not_mean_convex(self):
        # theta1 past the minimal angle: H(0) < 0
        with pytest.raises(NotMeanConvex):
            make_family(2, 1, 1, 3, math.pi / 3)

    def test_multiplicity_assignment_alternates(self):
        fam = make_family(4, 1, 2, 7, 0.1)
        assert fam.multiplicities == (2, 1, 2, 1)

    def test_builtin_catalog_all_valid(self):
        cat = builtin_catalog()
        assert len(cat) == 14
        for fam in cat.values():
            assert 0 < fam.d0 < fam.d_focal


class TestMeanCurvature:
    def test_g1_at_zero(self, fam1):
        assert mean_curvature(CurvatureProfile(fam1), 0.0) == pytest.approx(1.0, abs=1e-14)

    def test_g2_at_zero(self, fam2):
        assert mean_curvature(CurvatureProfile(fam2), 0.0) == pytest.approx(
            2 / math.sqrt(3), abs=1e-14)

    def test_zero_at_d0(self, fam1, fam2):
        for fam in (fam1, fam2):
            assert abs(mean_curvature(CurvatureProfile(fam), fam.d0)) < 1e-12

    def test_out_of_range(self, fam1):
        prof = CurvatureProfile(fam1)
        with pytest.raises(OutOfRange):
            mean_curvature(prof, -0.1)
        with pytest.raises(OutOfRange):
            mean_curvature(prof, fam1.d_focal)

    def test_geodesic_sphere_oracle(self):
        # every g=1 family matches (n-1) cot(theta1 + d)
        for n, theta1 in ((2, math.pi / 4), (3, 0.5), (5, 1.0)):
            fam = make_family(1, n - 1, n - 1, n, theta1)
            prof = CurvatureProfile(fam)
            for i in range(100):
                d = fam.d_focal * i / 101.0
                expect = (n - 1) / math.tan(theta1 + d)
                assert mean_curvature(prof, d) == pytest.approx(expect, rel=1e-12, abs=1e-12)

    def test_product_sphere_oracle(self):
        # g=2 with (p, q) = (m_minus, m_plus): q cot(theta1+d) - p tan(theta1+d)
        for p, q in ((1, 1), (1, 2), (2, 3)):
            fam = make_family(2, p, q, p + q + 1, math.pi / 6)
            prof = CurvatureProfile(fam)
            for i in range(100):
                d = fam.d_focal * i / 101.0
                expect = q / math.tan(math.pi / 6 + d) - p * math.tan(math.pi / 6 + d)
                assert mean_curvature(prof, d) == pytest.approx(expect, rel=1e-12, abs=1e-12)

    def test_strictly_decreasing(self):
        for fam in builtin_catalog().values():
            prof = CurvatureProfile(fam)
            for i in range(50):
                d = fam.d_focal * i / 51.0
                assert curvature_derivative(prof, d, 1) < 0


class TestCurvatureDerivative:
    def test_g1_first(self, fam1):
        assert curvature_derivative(CurvatureProfile(fam1), 0.0, 1) == pytest.approx(
            -2.0, abs=1e-13)

    def test_g2_first(self, fam2):
        assert curvature_derivative(CurvatureProfile(fam2), 0.0, 1) == pytest.approx(
            -16.0 / 3.0, abs=1e-12)

    def test_order_zero_is_value(self, fam2):
        prof = CurvatureProfile(fam2)
        assert curvature_derivative(prof, 0.21, 0) == mean_curvature(prof, 0.21)

    def test_against_finite_differences(self, fam2):
        prof = CurvatureProfile(fam2)
        d, h = 0.15, 1e-5
        for order in (1, 2, 3):
            fd = (curvature_derivative(prof, d + h, order - 1)
                  - curvature_derivative(prof, d - h, order - 1)) / (2 * h)
            assert curvature_derivative(prof, d, order) == pytest.approx(fd, rel=1e-8)

    def test_max_order_guard(self, fam1):
        with pytest.raises(OutOfRange):
            curvature_derivative(CurvatureProfile(fam1), 0.0, 500)

    def test_literal_mode_fd_matches_low_orders(self, fam1):
        # literal g=1 curvature is exactly 2x the cot-sum one, so its
        # derivatives are too; the FD route must reproduce that
        lit = CurvatureProfile(fam1, EQ030_LITERAL)
        cot = CurvatureProfile(fam1, COT_SUM)
        for order in (1, 2, 3):
            got = curvature_derivative(lit, 0.3, order)
            expect = 2.0 * curvature_derivative(cot, 0.3, order)
            assert got == pytest.approx(expect, rel=1e-6)

    def test_literal_mode_order_cap(self, fam1):
        lit = CurvatureProfile(fam1, EQ030_LITERAL)
        with pytest.raises(OutOfRange):
            curvature_derivative(lit, 0.1, 9)


class TestAntiderivative:
    def test_normalization(self, fam2):
        assert curvature_antiderivative(CurvatureProfile(fam2), 0.0) == 0.0

    def test_g1_closed_form(self, fam1):
        got = curvature_antiderivative(CurvatureProfile(fam1), math.pi / 4)
        assert got == pytest.approx(0.5 * math.log(2), abs=1e-14)

    def test_derivative_matches_h(self, fam2):
        prof = CurvatureProfile(fam2)
        x, h = 0.2, 1e-6
        fd = (curvature_antiderivative(prof, x + h)
              - curvature_antiderivative(prof, x - h)) / (2 * h)
        assert fd == pytest.approx(mean_curvature(prof, x), rel=1e-9)

    def test_concavity(self, fam1):
        # second difference of the antiderivative is H' < 0
        prof = CurvatureProfile(fam1)
        h = 1e-4
        for x in (0.1, 0.5, 1.0):
            second = (curvature_antiderivative(prof, x + h)
                      - 2 * curvature_antiderivative(prof, x)
                      + curvature_antiderivative(prof, x - h)) / h ** 2
            assert second < 0

    def test_literal_mode_unsupported(self, fam1):
        prof = CurvatureProfile(fam1, EQ030_LITERAL)
        with pytest.raises(UnsupportedMode):
            curvature_antiderivative(prof, 0.3)

    def test_numeric_fallback(self, fam1):
        lit = CurvatureProfile(fam1, EQ030_LITERAL)
        val, err = curvature_antiderivative_numeric(lit, 0.5)
        # literal g=1 curvature is n*cot, so the antiderivative is n*log-ratio
        expect = 2.0 * (math.log(math.sin(math.pi / 4 + 0.5)) - math.log(math.sin(math.pi / 4)))
        assert val == pytest.approx(expect, rel=1e-9)
        assert err < 1e-8


class TestMinimalDistance:
    def test_g1_analytic(self):
        fam = make_family(1, 1, 1, 2, math.pi / 4)
        assert abs(fam.d0 - math.pi / 4) < 1e-12

    def test_g2_equal_multiplicities(self):
        fam = make_family(2, 1, 1, 3, math.pi / 6)
        assert abs(fam.d0 - math.pi / 12) < 1e-12

    def test_g2_unequal(self):
        # tan^2(theta1 + d0) = m_plus / m_minus
        fam = make_family(2, 1, 2, 4, math.pi / 6)
        assert abs(fam.d0 - (math.atan(math.sqrt(2)) - math.pi / 6)) < 1e-12

    def test_swap_invariance_when_equal(self, fam2):
        again = make_family(2, 1, 1, 3, math.pi / 6)
        assert again.d0 == fam2.d0

    def test_root_not_bracketed(self, fam1):
        bad = make_family(2, 1, 1, 3, math.pi / 6)
        object.__setattr__(bad, "theta1", math.pi / 3)
        object.__setattr__(bad, "theta", (math.pi / 3, math.pi / 3 + math.pi / 2))
        with pytest.raises(RootNotBracketed):
            minimal_distance(bad)


class TestLiteralMode:
    def test_g1_coefficient_discrepancy(self, fam1):
        # the level-set formula carries coefficient n where the parallel
        # surface law has n-1; the ratio is exactly n/(n-1) for g = 1
        lit = CurvatureProfile(fam1, EQ030_LITERAL)
        cot = CurvatureProfile(fam1, COT_SUM)
        for d in (0.0, 0.2, 0.5):
            ratio = mean_curvature(lit, d) / mean_curvature(cot, d)
            assert ratio == pytest.approx(2.0, rel=1e-12)

    def test_g2_minimal_level_discrepancy(self):
        # literal zero at f = (p-q)/(p+q+2); classical at tan^2 = q/p
        fam = make_family(2, 1, 2, 4, math.pi / 6)
        d0_lit = minimal_distance(fam, mode=EQ030_LITERAL)
        f_star = (1 - 2) / (1 + 2 + 2)
        expect = math.acos(f_star) / 2 - math.pi / 6
        assert d0_lit == pytest.approx(expect, abs=1e-9)
        assert abs(d0_lit - fam.d0) > 0.01  # the documented disagreement

    def test_literal_monotone(self, fam1):
        lit = CurvatureProfile(fam1, EQ030_LITERAL)
        vals = [mean_curvature(lit, d) for d in
                [fam1.d_focal * i / 40 for i in range(39)]]
        assert all(a > b for a, b in zip(vals, vals[1:]))
