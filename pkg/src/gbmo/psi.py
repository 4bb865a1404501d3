"""The limit integrand psi, its null space, and the gamma(n, p) constants."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import quadrature
from .errors import NumericError, ParameterError, ShapeError, StructureError
from .field import Field, QuadratureRule
from .functionals import CoreFunctional, alpha_batch, skew_basis
from .geometry import Box, ReferenceCell, RotationGroup

MODES = ("auto", "closed_form", "generic", "iso_eigen")
_GOLDEN = (math.sqrt(5) - 1) / 2


def _fro2(A):
    return np.sum(A * A, axis=(-2, -1))


def psi_closed_form(variant: str, A, reference: ReferenceCell, p: float,
                    group: RotationGroup | None = None, S=None):
    """Closed-form psi for documented (variant, reference, p) triples, else ``None``.

    Accepts one matrix ``(m, n)`` or a stack ``(N, m, n)``.
    """
    A = np.asarray(A, dtype=float)
    single = A.ndim == 2
    As = A[None] if single else A
    out = _closed_form_many(variant, As, reference, float(p), group, S)
    if out is None:
        return None
    return float(out[0]) if single else out


def _closed_form_many(variant, As, reference, p, group, S):
    if variant in ("trivial", "affine_inf"):
        return np.zeros(len(As))
    if p != 2.0 or not reference.is_box:
        return None
    cube_like = len(set(reference.sides)) == 1
    trivial_group = group is None or len(group) == 1
    if not (cube_like or trivial_group):
        return None
    M = reference.second_moment()
    vol = reference.measure
    AMA = np.einsum("nij,jk,nlk->nil", As, M, As)
    if variant in ("mean_oscillation", "inf_constant"):
        return np.trace(AMA, axis1=1, axis2=2) / vol
    if variant == "double_integral":
        return 2 * np.trace(AMA, axis1=1, axis2=2) / vol
    if variant == "directional_sup":
        Sa = np.atleast_2d(np.asarray(S, dtype=float))
        return np.max(np.einsum("si,nij,sj->ns", Sa, AMA, Sa), axis=1) / vol
    if variant in ("skew_inf", "skew_inf_constant") and cube_like:
        sym = (As + np.swapaxes(As, 1, 2)) / 2
        return _fro2(sym) * M[0, 0] / vol
    return None


class PsiEvaluator:
    """psi(A) = (1/|D|) max over the group of alpha_p(l^{AR}, D).

    ``mode="auto"`` uses a closed form when one is documented for the
    triple and the generic formula otherwise. For a ball reference the
    generic value is only an upper bound of the limit integrand
    (``upper_bound_only`` is set).
    """

    def __init__(self, functional: CoreFunctional, reference: ReferenceCell | None = None,
                 group: RotationGroup | None = None, mode: str = "auto",
                 rule: QuadratureRule | None = None, n: int | None = None):
        if mode not in MODES:
            raise ParameterError(f"unknown psi mode {mode!r}")
        if reference is None:
            reference = ReferenceCell.cube(n if n is not None else functional.m)
        self.functional = functional
        self.reference = reference
        self.n = reference.n
        self.m = functional.m
        self.group = group or RotationGroup.trivial(self.n)
        if self.group.n != self.n:
            raise ShapeError("group and reference dimensions differ")
        if len(self.group) > 1 and not functional.admits_rotations:
            raise ParameterError(f"{functional.variant} is only defined for the trivial group")
        self.rule = rule or QuadratureRule(order=8, adaptive_depth=0)
        self.upper_bound_only = not reference.tessellates
        self.second_moment = reference.second_moment()
        nodes, w = quadrature.reference_rule(reference, self.rule.order, self.rule.ball_samples,
                                            self.rule.split)
        self._nodes, self._weights = np.asarray(nodes), np.asarray(w)
        has_cf = psi_closed_form(functional.variant, np.zeros((self.m, self.n)), reference,
                                 functional.p, self.group, functional.S) is not None
        if mode == "auto":
            mode = "closed_form" if has_cf else "generic"
        if mode == "closed_form" and not has_cf:
            raise ParameterError(f"no closed form for {functional.label()} on {reference.shape}")
        if mode == "iso_eigen":
            if self.m != self.n:
                raise ShapeError("iso_eigen needs m == n")
            self._scalar = scalar_psi(functional, reference, self.group)
        self.mode = mode

    @property
    def p(self) -> float:
        return self.functional.p

    def _stack(self, As) -> np.ndarray:
        As = np.asarray(As, dtype=float)
        if As.ndim < 2 or As.shape[-2:] != (self.m, self.n):
            raise ShapeError(f"expected {self.m}x{self.n} matrices, got shape {As.shape}")
        return As.reshape(-1, self.m, self.n)

    def generic_many(self, As) -> np.ndarray:
        As = self._stack(As)
        Y, w = self._nodes, self._weights
        G = np.array(self.group.elements)
        out = np.empty(len(As))
        per = len(G)
        chunk = max(1, 20_000 // (per * len(w)) + 1)
        for a in range(0, len(As), chunk):
            block = As[a:a + chunk]
            AR = np.einsum("bij,gjk->bgik", block, G).reshape(-1, self.m, self.n)
            U = np.einsum("qj,cij->cqi", Y, AR)
            W = np.broadcast_to(w, (len(AR), len(w)))
            X = np.broadcast_to(Y, (len(AR),) + Y.shape)
            vals = alpha_batch(self.functional, U, W, X).reshape(len(block), per)
            out[a:a + chunk] = vals.max(axis=1) / self.reference.measure
        return out

    def many(self, As) -> np.ndarray:
        """psi on a stack ``(N, m, n)`` using the evaluator's mode."""
        As = self._stack(As)
        if self.mode == "closed_form":
            return _closed_form_many(self.functional.variant, As, self.reference, self.p,
                                     self.group, self.functional.S)
        if self.mode == "iso_eigen":
            return np.array([psi_iso_eigen(self._scalar, A) for A in As])
        return self.generic_many(As)

    def __call__(self, A) -> float:
        return float(self.many(np.asarray(A, dtype=float)[None])[0])


def psi_generic(ev: PsiEvaluator, A) -> float:
    """(1/|D|) max over the group of alpha_p(l^{AR}, D)."""
    return float(ev.generic_many(np.asarray(A, dtype=float)[None])[0])


def scalar_psi(functional: CoreFunctional, reference: ReferenceCell, group: RotationGroup):
    """psi of the m = 1 version of ``functional`` as a function of a vector."""
    F1 = CoreFunctional(functional.variant, functional.p, 1,
                        None if functional.variant != "directional_sup" else ((1.0,),),
                        functional.solver)
    ev = PsiEvaluator(F1, reference, group, mode="generic")
    return lambda lam: psi_generic(ev, np.asarray(lam, dtype=float).reshape(1, -1))


def psi_iso_eigen(scalar, A) -> float:
    """Isotropic reduction: ``scalar`` applied to the singular values of ``A``."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError("psi_iso_eigen needs a square matrix")
    try:
        lam = np.linalg.svd(A, compute_uv=False)
    except np.linalg.LinAlgError as err:
        raise NumericError(f"SVD failed: {err}") from err
    return float(scalar(lam))


# ---------------------------------------------------------------------------
# gamma(n, p)


def _direction_integral(nu: np.ndarray, p: float) -> float:
    """int over Q of |x . nu|^p, exact along the dominant axis."""
    n = nu.size
    j = int(np.argmax(np.abs(nu)))
    a = abs(nu[j])
    rest = np.delete(nu, j) * (1 if nu[j] > 0 else -1)

    def F(s):
        return np.sign(s) * np.abs(s) ** (p + 1) / (p + 1)

    if n == 1:
        return float((F(a / 2) - F(-a / 2)) / a)
    pieces = {2: 256, 3: 16}.get(n, 6)
    x, w = quadrature.composite_box_rule(np.full(n - 1, -0.5), np.full(n - 1, 0.5), 6, pieces)
    b = x @ rest
    return float(w @ ((F(b + a / 2) - F(b - a / 2)) / a))


def _golden_max(f, lo, hi, iters=40):
    c, d = hi - _GOLDEN * (hi - lo), lo + _GOLDEN * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc > fd:
            hi, d, fd = d, c, fc
            c = hi - _GOLDEN * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLDEN * (hi - lo)
            fd = f(d)
    return (c, fc) if fc > fd else (d, fd)


def gamma_np(n: int, p: float, direction_samples: int = 64, seed: int = 0) -> float:
    """max over unit directions nu of int over Q of |x . nu|^p."""
    if direction_samples < 8:
        raise ParameterError("direction_samples must be >= 8")
    if n < 1 or p < 1:
        raise ParameterError("need n >= 1 and p >= 1")
    rng = np.random.default_rng(seed)
    cands = [np.eye(n)[i] for i in range(n)]
    for signs in itertools.product((1.0, -1.0, 0.0), repeat=n):
        v = np.array(signs)
        if np.count_nonzero(v) > 1 and v[np.nonzero(v)[0][0]] > 0:
            cands.append(v / np.linalg.norm(v))
    g = rng.normal(size=(direction_samples, n))
    cands.extend(g / np.linalg.norm(g, axis=1, keepdims=True))
    vals = [_direction_integral(c, p) for c in cands]
    best = cands[int(np.argmax(vals))]
    best_val = max(vals)
    if n == 1:
        return best_val
    width = math.pi / max(direction_samples, 8)
    for _ in range(2):
        basis = np.linalg.svd(best[None, :])[2][1:]  # tangent directions
        for t in basis:
            def f(s, nu=best, t=t):
                return _direction_integral(math.cos(s) * nu + math.sin(s) * t, p)
            s, val = _golden_max(f, -width, width)
            if val > best_val:
                best_val = val
                best = math.cos(s) * best + math.sin(s) * t
                best /= np.linalg.norm(best)
        width /= 4
    return float(best_val)


# ---------------------------------------------------------------------------
# null space


@dataclass
class SubspaceReport:
    null_basis: np.ndarray        # (k, m, n), Frobenius-orthonormal
    p_basis: np.ndarray           # (mn - k, m, n)
    projector: np.ndarray         # (mn, mn) acting on row-major vectorized matrices
    min_on_unit_sphere: float     # C; inf when P = {0}
    max_on_unit_sphere: float
    tol: float
    candidates: dict

    @property
    def null_dim(self) -> int:
        return len(self.null_basis)

    def project(self, A) -> np.ndarray:
        A = np.asarray(A, dtype=float)
        shape = A.shape
        flat = A.reshape(-1, shape[-2] * shape[-1])
        return (flat @ self.projector.T).reshape(shape)


def annihilator_basis(S, m: int, n: int) -> np.ndarray:
    """Basis of {A : nu^T A = 0 for nu in S} (rows orthogonal to span S)."""
    Sa = np.atleast_2d(np.asarray(S, dtype=float))
    _, sv, Vt = np.linalg.svd(Sa, full_matrices=True)
    rank = int(np.sum(sv > 1e-12 * max(sv.max(), 1.0)))
    perp = Vt[rank:]  # (m - rank, m)
    out = [np.outer(u, e) for u in perp for e in np.eye(n)]
    return np.array(out).reshape(-1, m, n)


def _orthonormal(mats: list, m: int, n: int) -> np.ndarray:
    if not mats:
        return np.zeros((0, m, n))
    B = np.array(mats).reshape(len(mats), m * n)
    _, sv, Vt = np.linalg.svd(B, full_matrices=False)
    rank = int(np.sum(sv > 1e-10 * sv.max()))
    return Vt[:rank].reshape(rank, m, n)


def _complement(N: np.ndarray, m: int, n: int) -> np.ndarray:
    if len(N) == 0:
        return np.eye(m * n).reshape(m * n, m, n)
    B = N.reshape(len(N), m * n)
    _, _, Vt = np.linalg.svd(B, full_matrices=True)
    return Vt[len(N):].reshape(-1, m, n)


def estimate_null_space(ev: PsiEvaluator, tol: float | None = None, samples: int = 200,
                        seed: int = 0) -> SubspaceReport:
    """Confirm which catalog-shaped subspace is the null space of psi."""
    m, n = ev.m, ev.n
    canon = np.eye(m * n).reshape(m * n, m, n)
    canon_vals = ev.many(canon)
    if tol is None:
        tol = 1e-9 * max(1.0, float(np.mean(canon_vals)))
    if not tol > 0:
        raise ParameterError("tol must be positive")
    cands = {"zero": np.zeros((0, m, n))}
    if m == n:
        cands["skew"] = skew_basis(n)
    if ev.functional.variant == "directional_sup":
        cands["annihilator"] = annihilator_basis(ev.functional.S, m, n)
    for k in range(m * n):
        cands[f"e{k // n}{k % n}"] = canon[k:k + 1]
    cands["full"] = canon
    passing = {}
    kept = []
    for name, basis in cands.items():
        ok = bool(len(basis) == 0 or np.all(ev.many(basis) <= tol))
        passing[name] = ok
        if ok:
            kept.extend(list(basis))
    N = _orthonormal(kept, m, n)
    rng = np.random.default_rng(seed)
    if len(N):
        coeff = rng.normal(size=(20, len(N)))
        combos = np.einsum("ck,kij->cij", coeff, N)
        vals = ev.many(combos)
        bad = np.nonzero(vals > 10 * tol)[0]
        if len(bad):
            raise StructureError(
                f"psi vanishes on candidate bases but equals {vals[bad[0]]:.3e} on a combination",
                combination=combos[bad[0]],
            )
    P = _complement(N, m, n)
    proj = np.eye(m * n)
    if len(N):
        B = N.reshape(len(N), m * n)
        proj = proj - B.T @ B
    if len(P) == 0:
        cmin, cmax = math.inf, math.inf
    else:
        g = rng.normal(size=(samples, len(P)))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        sph = np.concatenate([np.einsum("ck,kij->cij", g, P), P])
        vals = ev.many(sph)
        cmin, cmax = float(vals.min()), float(vals.max())
    return SubspaceReport(N, P, proj, cmin, cmax, float(tol), passing)


# ---------------------------------------------------------------------------
# limit integral


GRAD_SOURCES = ("full_gradient", "projected", "symmetric")


def limit_integral(ev: PsiEvaluator, u: Field, ambient: Box, grad_source: str = "full_gradient",
                   rule: QuadratureRule | None = None, pieces: int = 8,
                   report: SubspaceReport | None = None) -> float:
    """int over ``ambient`` of psi(X(x)) with X = grad u, pi_P(grad u) or E u."""
    if grad_source not in GRAD_SOURCES:
        raise ParameterError(f"grad_source must be one of {GRAD_SOURCES}")
    if (u.m, u.n) != (ev.m, ev.n):
        raise ShapeError("field and evaluator shapes differ")
    rule = rule or QuadratureRule()
    x, w = quadrature.composite_box_rule(ambient.lo_arr, ambient.hi_arr, rule.order, pieces)
    out = 0.0
    terms = []
    for a in range(0, len(x), 4096):
        J = u.jacobian(x[a:a + 4096])
        if grad_source == "projected":
            report = report or estimate_null_space(ev)
            J = report.project(J)
        elif grad_source == "symmetric":
            if u.m != u.n:
                raise ShapeError("symmetric gradient needs m == n")
            J = (J + np.swapaxes(J, 1, 2)) / 2
        terms.append(w[a:a + 4096] @ ev.many(J))
    out = math.fsum(terms)
    if not math.isfinite(out):
        raise NumericError("limit integral is not finite")
    return out


def norm_integral(u: Field, ambient: Box, p: float, report: SubspaceReport | None = None,
                  rule: QuadratureRule | None = None, pieces: int = 8) -> float:
    """int over ``ambient`` of |pi_P(grad u)|^p (full gradient when ``report`` is None)."""
    rule = rule or QuadratureRule()
    x, w = quadrature.composite_box_rule(ambient.lo_arr, ambient.hi_arr, rule.order, pieces)
    terms = []
    for a in range(0, len(x), 4096):
        J = u.jacobian(x[a:a + 4096])
        if report is not None:
            J = report.project(J)
        terms.append(w[a:a + 4096] @ _fro2(J) ** (p / 2))
    return math.fsum(terms)


# ---------------------------------------------------------------------------
# property suite


@dataclass
class PsiPropertyReport:
    functional: str
    trials: int
    violations: dict
    lipschitz_ratio: float
    bias_bound: float = 0.0

    def worst(self) -> float:
        return max(self.violations.values(), default=0.0)

    def passed(self, tol: float = 1e-8) -> bool:
        return all(v <= tol + self.bias_bound for v in self.violations.values())


def psi_property_check(ev: PsiEvaluator, trials: int = 50, seed: int = 0,
                       report: SubspaceReport | None = None) -> PsiPropertyReport:
    """Homogeneity, convexity, null-space invariance, triangle inequality of psi^(1/p)
    and a Lipschitz ratio on the unit ball."""
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    p, m, n = ev.p, ev.m, ev.n
    report = report or estimate_null_space(ev, seed=seed)
    A = rng.normal(size=(trials, m, n))
    B = rng.normal(size=(trials, m, n))
    pa, pb = ev.many(A), ev.many(B)
    scale = max(float(np.max(np.abs(pa))), 1e-300)
    v = {}
    worst = 0.0
    for t in (-2.0, -1.0, 0.5):
        target = abs(t) ** p * pa
        worst = max(worst, float(np.max(np.abs(ev.many(t * A) - target) /
                                        np.maximum(target, 1e-300 + 1e-12 * scale))))
    v["homogeneity"] = worst
    mid = ev.many((A + B) / 2)
    rhs = (pa + pb) / 2
    v["convexity"] = float(np.max(np.maximum(mid - rhs, 0) / np.maximum(rhs, 1e-300)))
    if report.null_dim:
        Nc = np.einsum("tk,kij->tij", rng.normal(size=(trials, report.null_dim)) * 2,
                       report.null_basis)
        shifted = ev.many(A + Nc)
        v["null_invariance"] = float(np.max(np.abs(shifted - pa) /
                                            np.maximum(pa, 1e-300 + 1e-12 * scale)))
    else:
        v["null_invariance"] = 0.0
    lhs = ev.many(A + B) ** (1 / p)
    rhs = pa ** (1 / p) + pb ** (1 / p)
    v["triangle"] = float(np.max(np.maximum(lhs - rhs, 0) / np.maximum(rhs, 1e-300)))
    Au = A / np.maximum(np.sqrt(_fro2(A)), 1e-300)[:, None, None]
    Bu = B / np.maximum(np.sqrt(_fro2(B)), 1e-300)[:, None, None] * rng.uniform(0, 1, trials)[
        :, None, None]
    dist = np.sqrt(_fro2(Au - Bu))
    lip = float(np.max(np.abs(ev.many(Au) - ev.many(Bu)) / np.maximum(dist, 1e-300)))
    return PsiPropertyReport(ev.functional.label(), trials, v, lip, ev.functional.bias_bound)
