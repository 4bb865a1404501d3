import math

import numpy as np
import pytest
from scipy import integrate

from gbmo import (Box, CoreFunctional, PsiEvaluator, ReferenceCell, RotationGroup,
                  estimate_null_space, fields, gamma_np, limit_integral, norm_integral,
                  psi_closed_form, psi_generic, psi_iso_eigen, psi_property_check, rotation_2d,
                  scalar_psi)
from gbmo.errors import ParameterError, ShapeError, StructureError
from gbmo.psi import annihilator_basis, skew_basis

Q = ReferenceCell.cube(2)


def ev_for(variant, p=2.0, m=2, S=None, reference=Q, group=None, mode="auto"):
    return PsiEvaluator(CoreFunctional(variant, p, m, S), reference, group, mode)


class TestValues:
    def test_identity(self):
        assert ev_for("mean_oscillation")(np.eye(2)) == pytest.approx(1 / 6)
        assert psi_generic(ev_for("mean_oscillation"), np.eye(2)) == pytest.approx(1 / 6)

    @pytest.mark.parametrize("variant", ["mean_oscillation", "double_integral", "skew_inf",
                                         "inf_constant", "affine_inf", "trivial"])
    def test_zero_matrix(self, variant):
        assert ev_for(variant, mode="generic")(np.zeros((2, 2))) == 0

    def test_affine_inf_vanishes(self, rng):
        for p in (1.0, 2.0, 3.0):
            assert ev_for("affine_inf", p, mode="generic")(rng.normal(size=(2, 2))) <= 1e-12

    def test_closed_form_missing(self):
        assert psi_closed_form("mean_oscillation", np.eye(2), Q, 3.0) is None
        with pytest.raises(ParameterError):
            ev_for("mean_oscillation", 3.0, mode="closed_form")

    @pytest.mark.parametrize("p", [1.0, 1.5, 3.0])
    def test_generic_p_against_polar_oracle(self, p):
        A = np.array([[0.4, -1.0], [2.0, 0.7]])

        def radial(t):
            e = np.array([math.cos(t), math.sin(t)])
            R = 0.5 / max(abs(e[0]), abs(e[1]))
            return np.linalg.norm(A @ e) ** p * R ** (p + 2) / (p + 2)

        pts = [k * math.pi / 4 for k in range(1, 8)]
        oracle = integrate.quad(radial, 0, 2 * math.pi, points=pts, epsabs=1e-14,
                                epsrel=1e-12, limit=200)[0]
        assert ev_for("mean_oscillation", p)(A) == pytest.approx(oracle, rel=1e-5)

    def test_box_reference_scaling(self, rng):
        # psi = alpha / |D|, and alpha is an average, so psi on a 2x2 box is psi_Q / 4 * 4
        A = rng.normal(size=(2, 2))
        D = ReferenceCell.box((2.0, 2.0))
        assert ev_for("mean_oscillation", reference=D)(A) == pytest.approx(
            ev_for("mean_oscillation")(A) * 4 / 4)

    def test_shape_checked(self):
        with pytest.raises(ShapeError):
            ev_for("mean_oscillation")(np.eye(3))

    def test_rotations_refused_for_skew(self):
        with pytest.raises(ParameterError):
            ev_for("skew_inf", group=RotationGroup.sampled_SOn(2, 4))

    def test_ball_is_upper_bound_only(self):
        ev = ev_for("mean_oscillation", reference=ReferenceCell.ball(2, 0.5))
        assert ev.upper_bound_only
        # mean of |x|^2 over a ball of radius r is r^2 n / (n + 2), divided by |D|
        assert ev(np.eye(2)) == pytest.approx(0.25 * 2 / 4 / (math.pi * 0.25), rel=1e-12)


class TestIsotropic:
    def test_identity_consistency(self):
        s = scalar_psi(CoreFunctional("mean_oscillation", 2.0, 2), Q, RotationGroup.trivial(2))
        assert psi_iso_eigen(s, np.eye(2)) == pytest.approx(1 / 6)
        assert psi_iso_eigen(s, np.zeros((2, 2))) == 0

    def test_rotation_invariance(self):
        s = scalar_psi(CoreFunctional("mean_oscillation", 2.0, 2), Q, RotationGroup.trivial(2))
        assert psi_iso_eigen(s, rotation_2d(0.3)) == pytest.approx(1 / 6)

    def test_square_only(self):
        s = scalar_psi(CoreFunctional("mean_oscillation", 2.0, 2), Q, RotationGroup.trivial(2))
        with pytest.raises(ShapeError):
            psi_iso_eigen(s, np.ones((2, 3)))

    def test_sampled_group_lower_bound(self, rng):
        # max over sampled rotations never exceeds the max over a finer sample
        F = CoreFunctional("mean_oscillation", 3.0, 2)
        coarse = PsiEvaluator(F, Q, RotationGroup.sampled_SOn(2, 8, 1))
        fine = PsiEvaluator(F, Q, RotationGroup.finite(
            list(RotationGroup.sampled_SOn(2, 8, 1)) + [rotation_2d(t) for t in
                                                       np.linspace(0, 2 * np.pi, 64)]))
        A = rng.normal(size=(2, 2))
        assert coarse(A) <= fine(A) + 1e-15


class TestGamma:
    def test_known_values(self):
        assert gamma_np(2, 2) == pytest.approx(1 / 12, abs=1e-4)
        assert gamma_np(2, 1) == pytest.approx(1 / 4, abs=1e-3)
        assert gamma_np(3, 2) == pytest.approx(1 / 12, abs=1e-4)

    def test_one_dimension(self):
        # int_{-1/2}^{1/2} |x|^p dx = 2^-p / (p + 1)
        assert gamma_np(1, 3.0) == pytest.approx(2**-3 / 4, rel=1e-10)


class TestNullSpace:
    def test_mean_oscillation(self):
        rep = estimate_null_space(ev_for("mean_oscillation"))
        assert rep.null_dim == 0 and rep.min_on_unit_sphere > 0

    @pytest.mark.parametrize("n", [2, 3])
    def test_skew(self, n):
        ev = ev_for("skew_inf", m=n, reference=ReferenceCell.cube(n))
        rep = estimate_null_space(ev)
        assert rep.null_dim == n * (n - 1) // 2
        B = skew_basis(n)
        np.testing.assert_allclose(rep.project(B), 0, atol=1e-12)

    def test_directional(self):
        rep = estimate_null_space(ev_for("directional_sup", S=[[1.0, 0.0]]))
        assert rep.null_dim == 2
        for B in rep.null_basis:
            np.testing.assert_allclose(B[0], 0, atol=1e-12)

    def test_annihilator(self):
        N = annihilator_basis([[1.0, 1.0]], 2, 3)
        assert N.shape == (3, 2, 3)
        np.testing.assert_allclose(np.einsum("i,kij->kj", [1.0, 1.0], N), 0, atol=1e-14)

    def test_inconsistent_detection(self):
        class Stub:
            # vanishes on every canonical basis matrix but not on their sums
            m = n = 2
            functional = CoreFunctional("mean_oscillation")

            def many(self, As):
                As = np.asarray(As).reshape(-1, 2, 2)
                return (As[:, 0, 0] * As[:, 1, 1]) ** 2 + (As[:, 0, 1] * As[:, 1, 0]) ** 2

        with pytest.raises(StructureError) as info:
            estimate_null_space(Stub(), tol=1e-12)
        assert info.value.combination.shape == (2, 2)


class TestIntegrals:
    def test_linear_unit_box(self, rng):
        A = rng.normal(size=(2, 2))
        ev = ev_for("mean_oscillation")
        assert limit_integral(ev, fields.linear(A), Box.unit(2)) == pytest.approx(ev(A))

    def test_sine(self):
        got = limit_integral(ev_for("mean_oscillation"), fields.sine2d(), Box.unit(2))
        assert got == pytest.approx(math.pi**2 / 24, rel=1e-9)

    def test_rigid_symmetric(self):
        u = fields.rigid([[0, 1], [-1, 0]], [1, 1])
        assert limit_integral(ev_for("skew_inf"), u, Box.unit(2), "symmetric") == 0

    def test_projected_equals_full_for_skew(self):
        u = fields.trig(3)
        ev = ev_for("skew_inf")
        full = limit_integral(ev, u, Box.unit(2))
        proj = limit_integral(ev, u, Box.unit(2), "projected")
        assert proj == pytest.approx(full, rel=1e-10)

    def test_norm_integral(self):
        assert norm_integral(fields.sine2d(), Box.unit(2), 2.0) == pytest.approx(
            math.pi**2 / 2, rel=1e-9)


class TestProperties:
    def test_mean_oscillation(self):
        assert psi_property_check(ev_for("mean_oscillation"), 50).worst() <= 1e-8

    def test_skew_invariance_and_triangle(self, rng):
        ev = ev_for("skew_inf", mode="generic")
        for _ in range(50):
            A, B = rng.normal(size=(2, 2, 2))
            S = rng.normal() * np.array([[0, 1], [-1, 0]])
            assert ev(A + S) == pytest.approx(ev(A), rel=1e-10, abs=1e-14)
            assert math.sqrt(ev(A + B)) <= math.sqrt(ev(A)) + math.sqrt(ev(B)) + 1e-10

    @pytest.mark.parametrize("variant", ["skew_inf", "double_integral", "directional_sup"])
    @pytest.mark.parametrize("p", [1.5, 3.0])
    def test_generic_suites(self, variant, p):
        S = [[0.6, 0.8]] if variant == "directional_sup" else None
        rep = psi_property_check(ev_for(variant, p, S=S), 20)
        assert rep.passed(1e-8)
