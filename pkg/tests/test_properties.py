"""Randomized structural properties."""

import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from gbmo import CoreFunctional, PsiEvaluator, fields, kernels
from gbmo.cli import fmt, parse_epsilons, parse_matrix
from gbmo.field import QuadratureRule
from gbmo.functionals import alpha_eval
from gbmo.geometry import Cell, ReferenceCell

finite = st.floats(-5, 5, allow_nan=False, width=64)
mats = arrays(np.float64, (2, 2), elements=finite)
P = st.sampled_from([1.0, 1.5, 2.0, 3.0])
RULE = QuadratureRule(order=6)
FAST = settings(max_examples=25, deadline=None)


def _ev(variant, p):
    return PsiEvaluator(CoreFunctional(variant, p, 2), ReferenceCell.cube(2), rule=RULE)


@FAST
@given(A=mats, t=st.floats(-3, 3), p=P)
def test_psi_homogeneous(A, t, p):
    ev = _ev("mean_oscillation", p)
    assert np.isclose(ev(t * A), abs(t) ** p * ev(A), rtol=1e-9, atol=1e-12)


@FAST
@given(A=mats, B=mats, lam=st.floats(0, 1), p=P)
def test_psi_convex(A, B, lam, p):
    ev = _ev("mean_oscillation", p)
    mid = ev(lam * A + (1 - lam) * B)
    assert mid <= lam * ev(A) + (1 - lam) * ev(B) + 1e-9 * (1 + ev(A) + ev(B))


@FAST
@given(A=mats, h=arrays(np.float64, 2, elements=finite), shift=arrays(np.float64, 2, elements=finite))
def test_alpha_ignores_constants(A, h, shift):
    F = CoreFunctional("mean_oscillation", 1.5, 2)
    cell = Cell(ReferenceCell.cube(2), 0.3, np.eye(2), shift)
    a = alpha_eval(F, fields.affine(A, h), cell, RULE)
    b = alpha_eval(F, fields.linear(A), cell, RULE)
    assert np.isclose(a, b, rtol=1e-9, atol=1e-12)


@FAST
@given(U=arrays(np.float64, (3, 12, 2), elements=finite), p=P)
def test_kernels_nonnegative(U, p):
    W = np.full((3, 12), 1 / 12)
    assert np.all(kernels.mean_oscillation(U, W, p) >= 0)
    assert np.all(kernels.pair_oscillation(U, W, p) >= 0)


@FAST
@given(A=arrays(np.float64, (2, 3), elements=st.floats(-1e6, 1e6, allow_nan=False)))
def test_matrix_round_trip(A):
    text = ",".join(fmt(x) for x in A.ravel())
    np.testing.assert_array_equal(parse_matrix(text, (2, 3)), A)


@FAST
@given(st.lists(st.integers(1, 4096), min_size=2, max_size=6, unique=True))
def test_epsilon_round_trip(dens):
    eps = [1 / d for d in sorted(dens)]
    assert parse_epsilons(", ".join(fmt(e) for e in eps)) == eps
