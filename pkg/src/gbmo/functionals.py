"""Catalog of p-core functionals alpha_p(u, D') and their axiom checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import kernels, quadrature
from .errors import ParameterError, ShapeError, SolverError
from .field import Field, QuadratureRule, trig
from .geometry import Cell, ReferenceCell, RotationGroup, make_cell

VARIANTS = (
    "mean_oscillation",
    "inf_constant",
    "double_integral",
    "skew_inf",
    "skew_inf_constant",
    "affine_inf",
    "directional_sup",
    "trivial",
)
# variants whose admissible maps are only dilations and translations
_NO_ROTATIONS = {"skew_inf", "skew_inf_constant", "affine_inf"}


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iters: int = 500
    p1_smoothing: float = 1e-6

    def __post_init__(self):
        if not self.tol > 0:
            raise ParameterError("solver tolerance must be positive")
        if self.max_iters < 1 or not self.p1_smoothing > 0:
            raise ParameterError(f"invalid solver config {self}")


@dataclass(frozen=True, eq=False)
class CoreFunctional:
    """A tagged catalog functional with exponent ``p`` acting on R^m-valued fields."""

    variant: str
    p: float = 2.0
    m: int = 2
    S: tuple | None = None
    solver: SolverConfig = dc_field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ParameterError(f"unknown functional variant {self.variant!r}")
        if not self.p >= 1:
            raise ParameterError("p must be >= 1")
        if self.m < 1:
            raise ParameterError("m must be >= 1")
        object.__setattr__(self, "p", float(self.p))
        if self.variant == "directional_sup":
            if self.S is None or len(self.S) == 0:
                raise ParameterError("directional_sup needs a nonempty direction set S")
            S = np.atleast_2d(np.asarray(self.S, dtype=float))
            if S.shape[1] != self.m:
                raise ShapeError(f"directions must have length m={self.m}")
            object.__setattr__(self, "S", tuple(tuple(r) for r in S))

    @property
    def S_array(self) -> np.ndarray:
        return np.array(self.S, dtype=float)

    @property
    def admits_rotations(self) -> bool:
        return self.variant not in _NO_ROTATIONS

    @property
    def bias_bound(self) -> float:
        """Relative bound on the p=1 smoothing bias of infimum variants."""
        if self.p == 1.0 and self.variant in ("inf_constant", "skew_inf", "skew_inf_constant",
                                              "affine_inf"):
            return self.solver.p1_smoothing / 2
        return 0.0

    def with_p(self, p: float) -> "CoreFunctional":
        return CoreFunctional(self.variant, p, self.m, self.S, self.solver)

    def label(self) -> str:
        return f"{self.variant}[p={self.p:g}]"


# ---------------------------------------------------------------------------
# parametrized infima


def skew_basis(n: int) -> np.ndarray:
    """Frobenius-orthonormal basis of the skew n x n matrices, shape (k, n, n)."""
    out = []
    for i in range(n):
        for j in range(i + 1, n):
            E = np.zeros((n, n))
            E[i, j], E[j, i] = 1.0, -1.0
            out.append(E / math.sqrt(2))
    return np.array(out).reshape(-1, n, n)


def full_basis(m: int, n: int) -> np.ndarray:
    return np.eye(m * n).reshape(m * n, m, n)


def _design(X: np.ndarray, basis: np.ndarray, m: int, with_constant: bool) -> np.ndarray:
    """M[c, q, :, k] = basis[k] @ X[c, q] (plus identity columns for the constant)."""
    cols = [np.einsum("kmn,cqn->cqmk", basis, X)] if len(basis) else []
    if with_constant:
        C, Q = X.shape[:2]
        cols.append(np.broadcast_to(np.eye(m), (C, Q, m, m)))
    return np.concatenate(cols, axis=3)


def _linear_infimum(U, W, X, p, basis, with_constant, solver: SolverConfig):
    """min over theta of mean |U - u_mean - M theta|^p per cell.

    Returns (A per cell, c per cell, value per cell).
    """
    C, Q, m = U.shape
    mean = np.einsum("cq,cqm->cm", W, U)
    V = U - mean[:, None, :]
    s = np.sqrt(np.einsum("cq,cqn->c", W, X * X))
    s = np.where(s > 0, s, 1.0)
    Xn = X / s[:, None, None]
    M = _design(Xn, basis, m, with_constant)
    if M.shape[3] == 0:
        val = np.einsum("cq,cq->c", W, np.sqrt(np.sum(V * V, axis=2)) ** p)
        return np.zeros((C,) + basis.shape[1:]), mean, val
    theta, value, gn, iters = kernels.linear_inf(
        V, M, W, p, solver.p1_smoothing, solver.tol, solver.max_iters
    )
    bad = np.nonzero(gn > solver.tol)[0]
    if len(bad):
        c = int(bad[0])
        raise SolverError(
            f"infimum solver stopped with gradient norm {gn[c]:.3e} > tol {solver.tol:.1e} "
            f"after {iters[c]} iterations",
            iterate=theta[c].copy(), grad_norm=float(gn[c]), cell=c,
        )
    k = len(basis)
    A = np.einsum("ck,kmn->cmn", theta[:, :k], basis) / s[:, None, None] if k else \
        np.zeros((C,) + basis.shape[1:])
    c = mean + (theta[:, k:] if with_constant else 0.0)
    return A, c, value


def _subspace_basis(variant: str, m: int, n: int) -> tuple[np.ndarray, bool]:
    if variant == "inf_constant":
        return np.zeros((0, m, n)), True
    if variant in ("skew_inf", "skew_inf_constant"):
        if m != n:
            raise ShapeError("skew variants need m == n")
        return skew_basis(n), variant == "skew_inf_constant"
    if variant == "affine_inf":
        return full_basis(m, n), False
    raise ParameterError(f"{variant} is not an infimum variant")


def alpha_batch(F: CoreFunctional, U, W, X) -> np.ndarray:
    """alpha_p on a batch of cells from samples.

    ``U`` (C, Q, m) values, ``W`` (C, Q) normalized weights, ``X`` (C, Q, n)
    node positions relative to each cell barycenter.
    """
    U = np.asarray(U, dtype=float)
    if U.shape[2] != F.m:
        raise ShapeError(f"functional expects m={F.m}, field has m={U.shape[2]}")
    p = F.p
    v = F.variant
    if v == "trivial":
        return np.zeros(U.shape[0])
    if v == "mean_oscillation" or (v == "inf_constant" and p == 2.0):
        return kernels.mean_oscillation(U, W, p)
    if v == "double_integral":
        if p == 2.0:
            # mean over pairs of |u(x)-u(y)|^2 is twice the mean square deviation
            return 2.0 * kernels.mean_oscillation(U, W, 2.0)
        return kernels.pair_oscillation(U, W, p)
    if v == "directional_sup":
        return kernels.directional_oscillation(U, W, F.S_array, p)
    basis, with_c = _subspace_basis(v, F.m, X.shape[2])
    return _linear_infimum(U, W, X, p, basis, with_c, F.solver)[2]


# ---------------------------------------------------------------------------
# sampling cells


def sample_cells(u: Field, reference: ReferenceCell, epsilon: float, rotation, translations,
                 rule: QuadratureRule):
    """Yield ``(indices, U, W, X)`` batches covering the given cells.

    Cells holding a flagged singular point of ``u`` get their own refined rule.
    """
    translations = np.atleast_2d(np.asarray(translations, dtype=float))
    R = np.asarray(rotation, dtype=float)
    K, n = translations.shape
    refine = np.zeros(K, dtype=bool)
    if rule.adaptive_depth > 0:
        refine = quadrature.needs_refinement(reference, epsilon, R, translations,
                                             u.singular_array)
    plain = np.nonzero(~refine)[0]
    if len(plain):
        ref_nodes, w = quadrature.reference_rule(reference, rule.order, rule.ball_samples,
                                                 rule.split)
        X = epsilon * ref_nodes @ R.T
        Q = len(w)
        chunk = max(1, 400_000 // max(Q, 1))
        for a in range(0, len(plain), chunk):
            idx = plain[a:a + chunk]
            pts = translations[idx][:, None, :] + X[None]
            U = u.values(pts.reshape(-1, n)).reshape(len(idx), Q, u.m)
            yield idx, U, np.broadcast_to(w, (len(idx), Q)), np.broadcast_to(X, (len(idx), Q, n))
    for i in np.nonzero(refine)[0]:
        cell = Cell(reference, epsilon, R, translations[i])
        x, w = quadrature.cell_rule(cell, rule.order, rule.ball_samples, u.singular_points,
                                    rule.adaptive_depth, rule.split)
        # the singular point itself is a node only on a measure-zero set; u(0) is defined anyway
        U = u.values(x)[None]
        yield np.array([i]), U, w[None], (x - cell.barycenter)[None]


def alpha_cells(F: CoreFunctional, u: Field, reference: ReferenceCell, epsilon: float,
                rotation, translations, rule: QuadratureRule | None = None) -> np.ndarray:
    """alpha_p(u, eps R(D) + h) for each translation h."""
    rule = rule or QuadratureRule()
    translations = np.atleast_2d(np.asarray(translations, dtype=float))
    out = np.empty(len(translations))
    if F.variant == "trivial":
        out[:] = 0.0
        return out
    for idx, U, W, X in sample_cells(u, reference, epsilon, rotation, translations, rule):
        try:
            out[idx] = alpha_batch(F, U, W, X)
        except SolverError as err:
            if err.cell is not None:
                err.cell = translations[idx[err.cell]].tolist()
            raise
    return out


def alpha_eval(F: CoreFunctional, u: Field, cell: Cell, rule: QuadratureRule | None = None) -> float:
    """alpha_p(u, cell)."""
    if F.m != u.m:
        raise ShapeError(f"functional expects m={F.m}, field has m={u.m}")
    return float(alpha_cells(F, u, cell.reference, cell.epsilon, cell.rotation,
                             cell.translation[None], rule)[0])


def solve_matrix_inf(u: Field, cell: Cell, p: float, subspace: str = "skew",
                     with_constant: bool = False, rule: QuadratureRule | None = None,
                     solver: SolverConfig | None = None):
    """Minimize mean over the cell of |u(x) - A(x - bar) - c|^p.

    ``A`` ranges over the skew or the full matrices; ``c`` is optimized when
    ``with_constant`` and equals the cell mean of ``u`` otherwise. Returns
    ``(A, c, value)``.
    """
    if not p >= 1:
        raise ParameterError("p must be >= 1")
    if subspace not in ("skew", "full"):
        raise ParameterError("subspace must be 'skew' or 'full'")
    rule = rule or QuadratureRule()
    solver = solver or SolverConfig()
    if subspace == "skew":
        if u.m != u.n:
            raise ShapeError("skew subspace needs m == n")
        basis = skew_basis(u.n)
    else:
        basis = full_basis(u.m, u.n)
    x, w = quadrature.cell_rule(cell, rule.order, rule.ball_samples, u.singular_points,
                                rule.adaptive_depth, rule.split)
    U = u.values(x)[None]
    X = (x - cell.barycenter)[None]
    A, c, val = _linear_infimum(U, w[None], X, float(p), basis, with_constant, solver)
    return A[0], c[0], float(val[0])


# ---------------------------------------------------------------------------
# axiom suite


@dataclass
class AxiomReport:
    """Maximal relative violations per property over randomized trials."""

    functional: str
    trials: int
    violations: dict
    gb_ratio: float
    bias_bound: float = 0.0

    def worst(self) -> float:
        return max(self.violations.values(), default=0.0)

    def passed(self, tol: float = 1e-8) -> bool:
        return all(v <= tol + self.bias_bound for v in self.violations.values())


def _rel(diff: float, scale: float) -> float:
    return abs(diff) / max(abs(scale), 1e-300) if diff != 0 else 0.0


def _excess(lhs: float, rhs: float) -> float:
    """Relative amount by which ``lhs <= rhs`` fails (0 when it holds)."""
    if lhs <= rhs:
        return 0.0
    return (lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)


def _outside_perturbation(u: Field, cell: Cell) -> Field:
    c = cell.barycenter
    r = cell.diameter / 2 * (1 + 1e-9)

    def func(x, f=u.func):
        far = np.sqrt(np.sum((x - c) ** 2, axis=1)) > r
        out = f(x)
        out[far] += 1.0 + np.sum(x[far], axis=1)[:, None]
        return out

    return Field(u.n, u.m, func, u.domain, "analytic", None, u.singular_points, "perturbed")


def _gradient_integral(u: Field, cell: Cell, p: float, rule: QuadratureRule) -> float:
    x, w = quadrature.cell_rule(cell, rule.order + 3, rule.ball_samples,
                                split=rule.split)
    J = u.jacobian(x)
    return float(cell.measure * (w @ np.sqrt(np.sum(J * J, axis=(1, 2))) ** p))


def check_core_axioms(F: CoreFunctional, trials: int = 20, seed: int = 0, n: int = 2,
                      reference: ReferenceCell | None = None,
                      rule: QuadratureRule | None = None) -> AxiomReport:
    """Randomized checks of EI, CX, pH, T1, CV, ZC and the derived inequalities."""
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    reference = reference or ReferenceCell.cube(n)
    n = reference.n
    rule = rule or QuadratureRule()
    rng = np.random.default_rng(seed)
    group = RotationGroup.sampled_SOn(n, 8, seed) if F.admits_rotations \
        else RotationGroup.trivial(n)
    keys = ("EI", "CX", "pH", "T1", "CV", "ZC", "almost_triangle", "perturbation", "scaling")
    viol = dict.fromkeys(keys, 0.0)
    gb = 0.0
    p, m = F.p, F.m
    a = lambda u, cell: alpha_eval(F, u, cell, rule)  # noqa: E731
    for k in range(trials):
        eps = float(rng.uniform(0.1, 1.0))
        R = group.elements[int(rng.integers(len(group)))]
        cell = make_cell(reference, eps, R, rng.uniform(-1, 1, n))
        u = trig(int(rng.integers(2**31)), n, m)
        v = trig(int(rng.integers(2**31)), n, m)
        au, av = a(u, cell), a(v, cell)

        viol["EI"] = max(viol["EI"], _rel(a(_outside_perturbation(u, cell), cell) - au, au))

        both = u.plus(v)
        viol["CX"] = max(viol["CX"], _excess(a(both.scaled(0.5), cell), (au + av) / 2))
        viol["almost_triangle"] = max(viol["almost_triangle"],
                                      _excess(a(both, cell), 2 ** (p - 1) * (au + av)))
        diff = u.plus(v.scaled(-1.0))
        for d in (0.1, 0.5):
            lower = (1 + d) ** (-p) * au - d ** (-p) * av
            viol["perturbation"] = max(viol["perturbation"], _excess(lower, a(diff, cell)))

        for t in (-2.0, -1.0, 0.5, float(rng.uniform(-3, 3))):
            target = abs(t) ** p * au
            viol["pH"] = max(viol["pH"], _rel(a(u.scaled(t), cell) - target, target))

        h = rng.normal(size=m) * 3
        viol["T1"] = max(viol["T1"], _rel(a(u.plus_constant(h), cell) - au, au))

        zc = a(Field(n, m, lambda x, h=h: np.broadcast_to(h, (len(x), m)).copy(), u.domain), cell)
        viol["ZC"] = max(viol["ZC"], zc / max(float(h @ h) ** (p / 2), 1e-300))

        s = float(rng.uniform(0.5, 2.0))
        Rg = group.elements[int(rng.integers(len(group)))]
        b = rng.uniform(-1, 1, n)
        lhs = a(u.compose_affine(s * Rg, b), cell)
        rhs = a(u, cell.mapped(s, Rg, b))
        viol["CV"] = max(viol["CV"], _rel(lhs - rhs, rhs))

        t = 2.0 if k % 2 == 0 else 0.5
        lhs = a(u.compose_affine(np.eye(n) / t, np.zeros(n)), cell)
        rhs = a(u, cell.mapped(1 / t, np.eye(n), np.zeros(n)))
        viol["scaling"] = max(viol["scaling"], _rel(lhs - rhs, rhs))

        base = make_cell(reference, 1.0, None, cell.translation)
        grad = _gradient_integral(u, base, p, rule)
        if grad > 0:
            gb = max(gb, a(u, base) / grad)
    return AxiomReport(F.label(), trials, viol, gb, F.bias_bound)
