import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from oracles import cap_intersection_polar
from projunif.kernels import (
    AD,
    CvM,
    DensityCdf,
    Dirac,
    Rothman,
    cap_intersection,
    get_kernel,
    parse_weight,
    psi,
    psi_ad,
    psi_cvm,
    psi_generic,
    psi_rothman,
    rothman_cutoff,
)
from projunif.projdist import proj_cdf, proj_density, proj_quantile

QS = [1, 2, 3, 10]
GRID = np.linspace(0, math.pi, 50)


class TestCapIntersection:
    @pytest.mark.parametrize("q", QS)
    def test_zero_angle(self, q):
        x = np.linspace(-1, 1, 17)
        assert np.allclose(cap_intersection(q, 0.0, x), proj_cdf(q, x), atol=1e-13)

    @pytest.mark.parametrize("q", QS)
    def test_disjoint_complements(self, q):
        for x in (0.1, 0.5, 0.9):
            theta = np.linspace(2 * math.acos(x), math.pi, 5)
            assert np.allclose(cap_intersection(q, theta, x), 2 * proj_cdf(q, x) - 1, atol=1e-13)

    def test_circle_branch_boundary(self):
        assert cap_intersection(1, math.pi / 2, math.cos(math.pi / 4)) == pytest.approx(0.5, abs=1e-14)

    @pytest.mark.parametrize("q", [1, 2, 3, 5, 10])
    def test_against_polar_oracle(self, q):
        for theta in (0.05, 0.7, 1.6, 2.5, math.pi):
            for x in (-0.8, -0.3, 0.0, 0.2, 0.6, 0.95):
                assert cap_intersection(q, theta, x) == pytest.approx(cap_intersection_polar(q, theta, x), abs=1e-8)

    def test_reflection_identity(self):
        for q in (2, 3, 7):
            for x in (0.1, 0.4, 0.8):
                th = np.linspace(0, math.pi, 9)
                lhs = cap_intersection(q, th, -x)
                rhs = cap_intersection(q, th, x) + 1 - 2 * proj_cdf(q, x)
                assert np.allclose(lhs, rhs, atol=1e-12)

    def test_hemispheres(self):
        # two half-spaces through the origin meet in a wedge of angle pi - theta
        for q in QS:
            assert np.allclose(cap_intersection(q, GRID, 0.0), 0.5 - GRID / (2 * math.pi), atol=1e-12)

    @settings(max_examples=150, deadline=None)
    @given(q=st.sampled_from(QS), theta=st.floats(0, math.pi), x=st.floats(-1, 1))
    def test_bounded_by_each_cap(self, q, theta, x):
        A = cap_intersection(q, theta, x)
        F = proj_cdf(q, x)
        assert max(0.0, 2 * F - 1) - 1e-12 <= A <= F + 1e-12

    @pytest.mark.parametrize("q", QS)
    def test_non_increasing_in_angle(self, q):
        theta = np.linspace(0, math.pi, 200)
        for x in (0.0, 0.3, 0.7):
            assert np.all(np.diff(cap_intersection(q, theta, x)) <= 1e-12)


class TestKernelValues:
    def test_cvm_values(self):
        assert psi_cvm(1, math.pi) == pytest.approx(0.25, abs=1e-15)
        assert psi_cvm(2, math.pi) == pytest.approx(0.25, abs=1e-15)

    def test_cvm_three_sphere_quarter_turn(self):
        expected = 5 / 16 + (math.pi / 2 - 1) / (4 * math.pi**2)
        assert psi_cvm(3, math.pi / 2) == pytest.approx(expected, abs=1e-14)
        assert psi_generic(3, math.pi / 2, CvM()) == pytest.approx(expected, abs=1e-8)

    def test_circle_cvm_generic(self):
        tb = GRID / (2 * math.pi)
        assert np.allclose(psi_generic(1, GRID, CvM()), 0.5 + tb * (tb - 1), atol=1e-8)

    def test_half_atom_is_ajne_kernel(self):
        for q in QS:
            assert np.allclose(psi_generic(q, GRID, Dirac(0.5)), 0.5 - GRID / (2 * math.pi), atol=1e-10)

    @pytest.mark.parametrize("q", QS)
    def test_rothman_constant_branch(self, q):
        for t in (0.2, 1 / 3, 0.7):
            t_m = min(t, 1 - t)
            th = np.linspace(rothman_cutoff(q, t), math.pi, 6)
            assert np.allclose(psi_rothman(q, th, t), 0.5 - t_m, atol=1e-13)

    def test_rothman_circle_line(self):
        t = 1 / 3
        assert psi_rothman(1, 0.0, t) == pytest.approx(0.5, abs=1e-15)
        tb = GRID / (2 * math.pi)
        h = np.maximum(t - tb, 0) - t * t
        assert np.allclose(psi_rothman(1, GRID, t), h + 0.5 - t * (1 - t), atol=1e-15)

    def test_ad_values(self):
        assert psi_ad(1, math.pi) == pytest.approx(-2 * math.log(2), abs=1e-14)
        for q in QS:
            assert psi_ad(q, 0.0) == 0.0

    def test_ad_sphere_quarter_turn(self):
        c = math.cos(math.pi / 4)
        f = lambda t: math.log((1 + t) / (1 - t)) * math.acos(t / math.sqrt(1 - t * t))  # noqa: E731
        ref = -math.log(4) + 2 / math.pi * integrate.quad(f, 0, c, epsabs=1e-13, limit=200)[0]
        assert psi_ad(2, math.pi / 2) == pytest.approx(ref, abs=1e-9)
        assert psi_ad(2, math.pi / 2, method="generic") == pytest.approx(ref, abs=1e-7)

    @pytest.mark.parametrize("q", QS)
    def test_zero_angle_identities(self, q):
        assert psi_cvm(q, 0.0) == pytest.approx(0.5, abs=1e-12)
        assert psi_rothman(q, 0.0, 1 / 3) == pytest.approx(0.5, abs=1e-12)
        assert psi_ad(q, 0.0) == 0.0
        assert psi_generic(q, 0.0, DensityCdf(lambda u: u**2, "square")) == pytest.approx(0.5, abs=1e-10)

    def test_angle_domain(self):
        with pytest.raises(ValueError):
            psi_cvm(2, -0.1)
        with pytest.raises(ValueError):
            psi_cvm(2, 3.2)


class TestClosedVsGeneric:
    @pytest.mark.parametrize("q", [2, 3])
    def test_cvm(self, q):
        assert np.max(np.abs(psi_cvm(q, GRID) - psi_cvm(q, GRID, method="generic"))) <= 1e-7
        assert np.max(np.abs(psi_cvm(q, GRID) - psi_generic(q, GRID, CvM()))) <= 1e-7

    @pytest.mark.parametrize("q", [2, 3])
    @pytest.mark.parametrize("t", [0.1, 1 / 3, 0.5, 0.8])
    def test_rothman(self, q, t):
        diff = psi_rothman(q, GRID, t) - psi_generic(q, GRID, Rothman(t))
        assert np.max(np.abs(diff)) <= 1e-7
        assert np.max(np.abs(psi_rothman(q, GRID, t) - psi_rothman(q, GRID, t, method="generic"))) <= 1e-7

    @pytest.mark.parametrize("q", [2, 3])
    def test_ad(self, q):
        assert np.max(np.abs(psi_ad(q, GRID) - psi_ad(q, GRID, method="generic"))) <= 1e-7

    @pytest.mark.parametrize("q", [2, 3, 5])
    def test_rothman_through_polar_oracle(self, q):
        t = 1 / 3
        x = float(proj_quantile(q, t))
        for theta in (0.3, 1.1, 2.0):
            ref = 0.5 * (cap_intersection_polar(q, theta, x) + cap_intersection_polar(q, theta, -x))
            assert psi_rothman(q, theta, t) == pytest.approx(ref, abs=1e-8)

    def test_density_weight_matches_cvm(self):
        uniform = DensityCdf(lambda u: u, "identity")
        for q in (1, 2, 4):
            assert np.allclose(psi_generic(q, GRID, uniform), psi_cvm(q, GRID), atol=1e-8)


def _angle_density(q):
    # theta = acos(t) with t ~ F_q
    return lambda th: proj_density(q, math.cos(th)) * math.sin(th)


@pytest.mark.parametrize("q", QS)
def test_centered_kernels_have_zero_mean(q):
    t_m = 1 / 3
    dens = _angle_density(q)
    centred = {
        "cvm": lambda th: psi_cvm(q, th) - 1 / 3,
        "rt": lambda th: psi_rothman(q, th, t_m) + t_m * (1 - t_m) - 0.5,
        "ad": lambda th: psi_ad(q, th) + 1,
    }
    cut = rothman_cutoff(q, t_m)
    for name, f in centred.items():
        pts = [cut] if name == "rt" else None
        val = integrate.quad(lambda th: f(th) * dens(th), 0, math.pi, points=pts, epsabs=1e-10, limit=200)[0]
        assert abs(val) <= 1e-6, name


class TestKernelTables:
    @pytest.mark.parametrize("q", [2, 4, 10])
    @pytest.mark.parametrize("weight", [CvM(), AD(), Rothman(1 / 3), Dirac(0.3)], ids=str)
    def test_table_matches_direct(self, q, weight):
        kern = get_kernel(q, weight)
        th = np.concatenate([np.linspace(0, math.pi, 257), np.geomspace(1e-8, 1e-2, 20)])
        assert np.max(np.abs(kern(th) - psi(q, th, weight))) <= 1e-9

    def test_closed_forms_are_not_tabulated(self):
        assert get_kernel(2, CvM()).coef is None
        assert get_kernel(1, AD()).coef is None


class TestWeights:
    def test_parse(self):
        assert parse_weight("cvm") == CvM()
        assert parse_weight("AD") == AD()
        assert parse_weight("rt") == Rothman(1 / 3)
        assert parse_weight("rt:0.25") == Rothman(0.25)
        assert parse_weight("dirac:0.4") == Dirac(0.4)
        with pytest.raises(ValueError):
            parse_weight("kuiper")

    def test_domains(self):
        for bad in (0.0, 1.0, -0.2):
            with pytest.raises(ValueError):
                Rothman(bad)
        with pytest.raises(ValueError):
            Dirac(0.0)
        assert Rothman(0.8).t_m == pytest.approx(0.2)

    def test_single_point_bias(self):
        assert CvM().bias(1) == pytest.approx(1 / 6)
        assert AD().bias(1) == 1.0
        assert Rothman(0.25).bias(1) == pytest.approx(0.25 * 0.75)
