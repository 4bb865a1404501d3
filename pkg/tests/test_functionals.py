import math

import numpy as np
import pytest
from scipy import integrate, optimize

from gbmo import (VARIANTS, CoreFunctional, ReferenceCell, SolverConfig, alpha_eval,
                  check_core_axioms, fields, make_cell, solve_matrix_inf)
from gbmo.errors import ParameterError, ShapeError, SolverError
from gbmo.field import QuadratureRule
from gbmo.functionals import full_basis, skew_basis
from gbmo.quadrature import box_rule

Q = ReferenceCell.cube(2)
QCELL = make_cell(Q, 1.0)
# independent fine rule on Q for oracles
XF, WF = box_rule(np.full(2, -0.5), np.full(2, 0.5), 24)


def fine_mean(f):
    return float(np.dot(WF, f(XF)))


class TestBasis:
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_skew_basis_orthonormal(self, n):
        B = skew_basis(n)
        assert len(B) == n * (n - 1) // 2
        G = np.einsum("aij,bij->ab", B, B)
        np.testing.assert_allclose(G, np.eye(len(B)), atol=1e-15)
        np.testing.assert_allclose(B, -np.swapaxes(B, 1, 2))

    def test_full_basis(self):
        assert full_basis(3, 2).shape == (6, 3, 2)


class TestAlphaEval:
    def test_constant_is_zero(self):
        for v in VARIANTS:
            F = CoreFunctional(v, 2.0, 2, [[1.0, 0.0]] if v == "directional_sup" else None)
            assert alpha_eval(F, fields.constant([1.0, -2.0]), make_cell(Q, 0.3)) <= 1e-28

    def test_mean_oscillation_identity(self):
        F = CoreFunctional("mean_oscillation", 2.0, 2)
        assert alpha_eval(F, fields.linear(np.eye(2)), QCELL) == pytest.approx(1 / 6, rel=1e-14)

    @pytest.mark.parametrize("p", [1.0, 1.5, 3.0])
    def test_mean_oscillation_general_p(self, p):
        A = np.array([[1.0, 0.5], [-0.3, 2.0]])
        F = CoreFunctional("mean_oscillation", p, 2)

        # polar form over Q: int |A e_t|^p R(t)^(p+2) / (p+2) dt
        def radial(t):
            e = np.array([math.cos(t), math.sin(t)])
            R = 0.5 / max(abs(e[0]), abs(e[1]))
            return np.linalg.norm(A @ e) ** p * R ** (p + 2) / (p + 2)

        oracle = integrate.quad(radial, 0, 2 * math.pi, points=[k * math.pi / 4 for k in range(1, 8)],
                                epsabs=1e-14, epsrel=1e-12, limit=200)[0]
        got = alpha_eval(F, fields.linear(A), QCELL, QuadratureRule(order=12))
        assert got == pytest.approx(oracle, rel=1e-6)

    def test_double_integral(self):
        A = np.array([[1.0, 2.0], [0.0, -1.0]])
        F = CoreFunctional("double_integral", 2.0, 2)
        assert alpha_eval(F, fields.linear(A), QCELL) == pytest.approx(np.sum(A * A) / 6)

    def test_skew_inf_of_skew_is_zero(self):
        F = CoreFunctional("skew_inf", 2.0, 2)
        assert alpha_eval(F, fields.linear([[0, 3], [-3, 0]]), QCELL) <= 1e-25

    def test_affine_inf_is_zero(self, rng):
        F = CoreFunctional("affine_inf", 3.0, 2)
        u = fields.linear(rng.normal(size=(2, 2)))
        assert alpha_eval(F, u, make_cell(Q, 0.2, translation=(0.4, 0.1))) <= 1e-20

    def test_skew_inf_p3_against_scipy(self):
        B = np.array([[1.0, 2.0], [-0.5, 0.3]])
        F = CoreFunctional("skew_inf", 3.0, 2)
        got = alpha_eval(F, fields.linear(B), QCELL, QuadratureRule(order=12))
        J = np.array([[0.0, 1.0], [-1.0, 0.0]])

        def obj(t):
            return fine_mean(lambda x: np.linalg.norm(x @ (B - t * J).T, axis=1) ** 3)

        oracle = optimize.minimize_scalar(obj, bracket=(-3, 3), tol=1e-12).fun
        assert got == pytest.approx(oracle, rel=1e-6)

    def test_inf_constant_p1_bias(self):
        u = fields.trig(3)
        cell = make_cell(Q, 0.5, translation=(0.1, 0.2))
        F = CoreFunctional("inf_constant", 1.0, 2)
        rule = QuadratureRule(order=8)
        got = alpha_eval(F, u, cell, rule)
        from gbmo.quadrature import cell_rule

        x, w = cell_rule(cell, 8)
        U = u.values(x)
        res = optimize.minimize(lambda c: np.dot(w, np.linalg.norm(U - c, axis=1)), w @ U,
                                method="Nelder-Mead",
                                options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
        assert abs(got - res.fun) / res.fun <= F.bias_bound + 1e-8

    def test_directional_sup(self):
        A = np.array([[1.0, 2.0], [3.0, -1.0]])
        S = [[1.0, 0.0], [0.0, 1.0]]
        F = CoreFunctional("directional_sup", 2.0, 2, S)
        # max over rows of |row|^2 / 12
        assert alpha_eval(F, fields.linear(A), QCELL) == pytest.approx(10 / 12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            alpha_eval(CoreFunctional("mean_oscillation", 2.0, 3), fields.sine2d(), QCELL)

    def test_unknown_variant(self):
        with pytest.raises(ParameterError):
            CoreFunctional("nope")

    def test_directional_needs_S(self):
        with pytest.raises(ParameterError):
            CoreFunctional("directional_sup", 2.0, 2)


class TestSolveMatrixInf:
    def test_skew_minimizer(self):
        B = np.array([[1.0, 2.0], [-0.5, 0.3]])
        A, c, val = solve_matrix_inf(fields.linear(B), QCELL, 2.0, "skew")
        np.testing.assert_allclose(A, (B - B.T) / 2, atol=1e-12)
        sym = (B + B.T) / 2
        assert val == pytest.approx(np.sum(sym * sym) / 12, rel=1e-12)

    def test_full_minimizer(self):
        B = np.array([[1.0, 2.0], [-0.5, 0.3]])
        A, _, val = solve_matrix_inf(fields.linear(B), QCELL, 2.0, "full")
        np.testing.assert_allclose(A, B, atol=1e-12)
        assert val <= 1e-25

    def test_rigid_with_constant(self):
        u = fields.rigid([[0, 1.5], [-1.5, 0]], [2.0, 1.0])
        cell = make_cell(Q, 0.25, translation=(0.3, 0.3))
        A, c, val = solve_matrix_inf(u, cell, 2.0, "skew", with_constant=True)
        assert val <= 1e-25
        np.testing.assert_allclose(A, [[0, 1.5], [-1.5, 0]], atol=1e-10)

    def test_iteration_limit(self):
        u = fields.trig(2)
        with pytest.raises(SolverError) as info:
            solve_matrix_inf(u, QCELL, 3.0, "full", solver=SolverConfig(tol=1e-14, max_iters=1))
        assert info.value.grad_norm > 1e-14 and info.value.iterate is not None


class TestAxioms:
    def test_mean_oscillation(self):
        rep = check_core_axioms(CoreFunctional("mean_oscillation", 2.0, 2), trials=50)
        assert rep.worst() <= 1e-9
        assert 0 < rep.gb_ratio < math.inf

    def test_trivial_exact(self):
        rep = check_core_axioms(CoreFunctional("trivial", 2.0, 2), trials=5)
        assert all(v == 0 for v in rep.violations.values()) and rep.gb_ratio == 0

    def test_skew_homogeneity(self):
        F = CoreFunctional("skew_inf", 2.0, 2)
        u = fields.trig(7)
        cell = make_cell(Q, 0.4, translation=(0.2, 0.1))
        ratio = alpha_eval(F, u.scaled(-2.0), cell) / alpha_eval(F, u, cell)
        assert ratio == pytest.approx(4.0, rel=1e-8)

    def test_no_rotation_variants_flagged(self):
        assert not CoreFunctional("skew_inf").admits_rotations
        assert CoreFunctional("mean_oscillation").admits_rotations


def test_double_integral_p2_shortcut_matches_pair_sum(rng):
    from gbmo import kernels

    U = rng.normal(size=(4, 30, 2))
    W = rng.random((4, 30))
    W /= W.sum(axis=1, keepdims=True)
    np.testing.assert_allclose(kernels.pair_oscillation(U, W, 2.0),
                               2 * kernels.mean_oscillation(U, W, 2.0), rtol=1e-12)
