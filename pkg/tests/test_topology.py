import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from topowalk import bloch, topology
from topowalk.errors import DegeneratePoint, NonIntegerWinding

PI = math.pi


def winding_by_unwrapping(T, theta, samples=2001):
    """Count turns of n(k) about A from the unwrapped polar angle.

    The plane orthogonal to A = (cos a, 0, sin a) is spanned by
    e1 = (-sin a, 0, cos a) and e2 = (0, -1, 0), oriented so A = e1 x e2.
    """
    a = T * theta / 2
    k = np.linspace(-PI, PI, samples)
    n = bloch.bloch_vector(T, theta, k).n
    e1 = np.array([-math.sin(a), 0.0, math.cos(a)])
    e2 = np.array([0.0, -1.0, 0.0])
    phi = np.unwrap(np.arctan2(n @ e2, n @ e1))
    return (phi[-1] - phi[0]) / (2 * PI)


def l_by_quad(T, theta):
    c = math.cos(T * theta / 2)

    def v2(k):
        den = math.sin(k) ** 2 + math.sin(T * theta / 2) ** 2 * math.cos(k) ** 2
        return 1.0 if den == 0 else (c * math.sin(k)) ** 2 / den

    val, _ = quad(v2, -PI, PI, limit=400, epsabs=1e-13, epsrel=1e-13, points=[0.0])
    return val / (2 * PI)


class TestGroupVelocity:
    def test_flat_band_zero(self):
        k = np.linspace(-3, 3, 13)
        for T in (1, 2, 5):
            for theta in topology.flat_band_angles(T):
                assert np.abs(topology.group_velocity(T, theta, k)).max() < 1e-15

    def test_examples(self):
        assert topology.group_velocity(2, PI / 3, PI / 2) == pytest.approx(0.5, abs=1e-15)
        v = topology.group_velocity(1, PI / 2, PI / 4)
        assert v == pytest.approx(1 / math.sqrt(3), abs=1e-15)
        h = 1e-6
        fd = (bloch.quasi_energy(1, PI / 2, PI / 4 + h) - bloch.quasi_energy(1, PI / 2, PI / 4 - h)) / (2 * h)
        assert abs(fd - v) < 1e-6

    def test_negative_band(self):
        assert topology.group_velocity(2, PI / 3, PI / 2, band=-1) == pytest.approx(-0.5)

    def test_degenerate(self):
        with pytest.raises(DegeneratePoint):
            topology.group_velocity(20, PI / 10, 0.0)

    @settings(max_examples=500, deadline=None)
    @given(st.integers(1, 25), st.floats(0, 2 * PI), st.floats(-PI, PI))
    def test_bounded_and_odd(self, T, theta, k):
        v = topology.group_velocity(T, theta, k, strict=False)
        if np.isnan(v):
            return
        assert abs(v) <= 1.0
        assert abs(v + topology.group_velocity(T, theta, -k)) < 1e-12
        # n_z = -V on the positive band
        assert abs(bloch.bloch_vector(T, theta, k).n[2] + v) < 1e-12


class TestWinding:
    def test_first_phase(self):
        assert topology.winding_integral(1, PI, 4096) == pytest.approx(-1, abs=1e-6)

    def test_final_phase_even_steps(self):
        assert topology.winding_integral(2, 3 * PI / 2, 4096) == pytest.approx(1, abs=1e-6)

    def test_t3_middle_phase(self):
        assert topology.winding_integral(3, PI, 4096) == pytest.approx(1, abs=1e-6)
        assert topology.winding_rule(3, PI) == 1

    @pytest.mark.parametrize("T, theta", [(1, PI), (2, 3 * PI / 2), (3, PI), (5, PI), (7, 2.0), (12, 5.9)])
    def test_integral_matches_unwrapping_oracle(self, T, theta):
        assert topology.winding_integral(T, theta) == pytest.approx(winding_by_unwrapping(T, theta), abs=1e-6)

    def test_rule_examples(self):
        for theta in (0.1, 1.0, PI, 6.0):
            assert topology.winding_rule(1, theta) == -1
        # floor(5/2) = 2 is even; the integral agrees
        assert topology.winding_rule(5, PI) == -1
        assert topology.winding_integral(5, PI) == pytest.approx(-1, abs=1e-6)
        assert topology.winding_rule(4, 15 * PI / 8) == 1

    @pytest.mark.parametrize("T, theta", [(1, 0.0), (1, 2 * PI), (4, PI / 2), (20, PI / 10)])
    def test_gapless_raises(self, T, theta):
        with pytest.raises(DegeneratePoint):
            topology.winding_rule(T, theta)
        with pytest.raises(DegeneratePoint):
            topology.winding_integral(T, theta)

    def test_underresolved_raises(self):
        # close to a phase edge 16 samples cannot resolve the integrand
        with pytest.raises(NonIntegerWinding):
            topology.winding_integral(3, 2 * PI / 3 * 1.05, 16)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 20), st.floats(0.02, 0.98))
    def test_rule_equals_integral_inside_phases(self, T, frac):
        m = int(frac * T)
        theta = 2 * PI * (m + (frac * T - m) * 0.9 + 0.05) / T
        assert topology.winding_integral(T, theta) == pytest.approx(topology.winding_rule(T, theta), abs=1e-6)


class TestGapless:
    def test_t5(self):
        thetas = [p.theta for p in topology.gapless_angles(5)]
        np.testing.assert_allclose(thetas, [0, 2 * PI / 5, 4 * PI / 5, 6 * PI / 5, 8 * PI / 5, 2 * PI], atol=1e-15)

    def test_t1(self):
        assert [p.theta for p in topology.gapless_angles(1)] == [0.0, 2 * PI]

    def test_t20_classification(self):
        p = topology.gapless_angles(20)[1]
        assert p.theta == pytest.approx(PI / 10, abs=1e-15)
        assert (p.closing_at_k0, p.closing_at_kpi) == ("Epi", "E0")
        assert bloch.quasi_energy(20, PI / 10, 0.0) == pytest.approx(PI)
        assert bloch.quasi_energy(20, PI / 10, PI) == pytest.approx(0.0, abs=1e-15)

    def test_parity_classification(self):
        for p in topology.gapless_angles(9):
            if p.index_m % 2 == 0:
                assert (p.closing_at_k0, p.closing_at_kpi) == ("E0", "Epi")
            else:
                assert (p.closing_at_k0, p.closing_at_kpi) == ("Epi", "E0")

    def test_rational_gapless_test(self):
        assert topology.gapless_index(7, 2 * PI * 3 / 7) == 3
        assert topology.gapless_index(7, 2 * PI * 3 / 7 + 1e-6) is None

    @pytest.mark.parametrize(
        "T, expected",
        [(1, [PI]), (2, [PI / 2, 3 * PI / 2]), (3, [PI / 3, PI, 5 * PI / 3])],
    )
    def test_flat_band_angles(self, T, expected):
        np.testing.assert_allclose(topology.flat_band_angles(T), expected, atol=1e-15)
        for theta in expected:
            assert math.cos(T * theta / 2) == pytest.approx(0, abs=1e-15)
            np.testing.assert_allclose(bloch.quasi_energy(T, theta, np.linspace(-3, 3, 7)), PI / 2, atol=1e-15)

    def test_flat_band_cap(self):
        assert len(topology.flat_band_angles(9, c_max=2)) == 3


class TestPhaseDiagram:
    def test_t1(self):
        d = topology.phase_diagram(1)
        assert len(d.regions) == 1
        r = d.regions[0]
        assert (r.theta_min, r.theta_max, r.winding) == (0.0, 2 * PI, -1)

    def test_t2(self):
        d = topology.phase_diagram(2)
        assert [(r.theta_min, r.theta_max) for r in d.regions] == [(0.0, PI), (PI, 2 * PI)]
        assert d.windings() == [-1, 1]

    def test_t3(self):
        assert topology.phase_diagram(3).windings() == [-1, 1, -1]

    @pytest.mark.parametrize("T", range(1, 21))
    def test_invariants(self, T):
        d = topology.phase_diagram(T, verify=True)
        assert len(d.regions) == T and len(d.gapless) == T + 1
        w = d.windings()
        assert w[0] == -1
        if T % 2:
            assert (w.count(-1), w.count(1)) == ((T + 1) // 2, (T - 1) // 2)
        else:
            assert w.count(-1) == w.count(1) == T // 2
        for r in d.regions:
            assert r.theta_max - r.theta_min == pytest.approx(2 * PI / T, abs=1e-12)
            assert (r.winding == 1) == (r.index_m % 2 == 1)
            # phases opening at an E=0 touching at k=0 carry -1
            assert (r.left_boundary.closing_at_k0 == "E0") == (r.winding == -1)
        np.testing.assert_allclose(d.verified_windings, w, atol=1e-6)


class TestSecondMomentAsymptote:
    def test_examples(self):
        assert topology.l_analytic(7, 0.0) == 1.0
        assert topology.l_analytic(1, PI) == pytest.approx(0.0, abs=1e-15)
        assert topology.l_analytic(2, PI / 4) == pytest.approx(1 - math.sqrt(2) / 2, abs=1e-15)

    @pytest.mark.parametrize("T, theta", [(1, PI), (2, PI / 4), (3, 1.1), (6, 0.5), (11, 4.0)])
    def test_against_adaptive_quadrature(self, T, theta):
        assert topology.l_analytic(T, theta) == pytest.approx(l_by_quad(T, theta), abs=1e-8)
        assert topology.l_quadrature(T, theta) == pytest.approx(l_by_quad(T, theta), abs=1e-8)

    def test_quadrature_limits(self):
        for T in (1, 2, 3):
            for theta in topology.flat_band_angles(T):
                assert abs(topology.l_quadrature(T, theta)) < 1e-12
        assert topology.l_quadrature(1, 0.0) == pytest.approx(1.0, abs=1e-8)
        assert topology.l_quadrature(2, PI / 4, 4096) == pytest.approx(topology.l_analytic(2, PI / 4), abs=1e-8)

    def test_gapless_gives_one(self):
        for T in (1, 4, 9):
            for p in topology.gapless_angles(T):
                assert topology.l_analytic(T, p.theta) == pytest.approx(1.0, abs=1e-14)
                assert topology.l_quadrature(T, p.theta) == pytest.approx(1.0, abs=1e-8)

    def test_complex_formula_reading(self):
        # 1 + i sqrt((cos(T theta) - 1)/2) with the principal root is real
        for T, theta in [(1, 0.4), (3, 2.2), (8, 5.0)]:
            val = 1 + 1j * np.sqrt(complex((math.cos(T * theta) - 1) / 2))
            assert val.imag == pytest.approx(0.0, abs=1e-15)
            assert val.real == pytest.approx(topology.l_analytic(T, theta), abs=1e-12)


class TestTransitions:
    @pytest.mark.parametrize("T", [1, 2, 5, 13])
    def test_kinks_equal_gapless(self, T):
        found = topology.transition_points(T)
        expected = [p.theta for p in topology.gapless_angles(T)]
        assert len(found) == len(expected)
        np.testing.assert_allclose(found, expected, atol=1e-12, rtol=0)

    def test_t2_values(self):
        np.testing.assert_allclose(topology.transition_points(2), [0, PI, 2 * PI], atol=1e-12)


class TestNearGapless:
    @pytest.mark.parametrize("T", [1, 2])
    def test_velocity_saturates(self, T):
        for p in topology.gapless_angles(T):
            sign = -1.0 if p.closing_at_k0 == "E0" else 1.0
            for off in (-1e-4, 1e-4):
                theta = p.theta + off
                if not 0 <= theta <= 2 * PI:
                    continue
                assert topology.group_velocity(T, theta, -1e-3) == pytest.approx(sign, abs=1e-2)
                assert topology.group_velocity(T, theta, 1e-3) == pytest.approx(-sign, abs=1e-2)
