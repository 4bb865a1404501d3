"""Verdicts from sweeps: membership indicators, divergence rates, constancy."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import quadrature
from .errors import ParameterError
from .field import Field
from .functionals import CoreFunctional
from .geometry import Box, ReferenceCell
from .psi import PsiEvaluator, estimate_null_space
from .seminorm import PackingConfig, SweepResult, dyadic, loglog_slope, sweep

KINDS = ("finite_limit", "divergent", "zero")
P1_WARNING = "p1_no_characterization"


@dataclass
class RigidFit:
    matrix: np.ndarray
    shift: np.ndarray
    residual: float

    def as_dict(self) -> dict:
        return {"A": self.matrix.tolist(), "h": self.shift.tolist(), "residual": self.residual}


@dataclass
class Verdict:
    """A numerical indicator, not a proof.

    ``value`` is the limit for ``finite_limit`` and ``zero`` and the fitted
    log-log rate for ``divergent``.
    """

    kind: str
    value: float
    evidence: SweepResult | None
    fitted_rate: float
    rigid_fit: RigidFit | None = None
    inconclusive: bool = False
    warnings: list = dc_field(default_factory=list)

    def as_dict(self, evidence_csv_path: str | None = None) -> dict:
        return {
            "kind": self.kind,
            "value_or_rate": self.value,
            "evidence_csv_path": evidence_csv_path,
            "rigid_fit": None if self.rigid_fit is None else self.rigid_fit.as_dict(),
            "inconclusive": self.inconclusive,
            "warnings": list(self.warnings),
        }


def membership_indicator(result: SweepResult, p: float | None = None, n: int | None = None,
                         plateau: float = 0.02, zero_tol: float = 1e-10) -> Verdict:
    """finite_limit on a plateau (relative steps <= ``plateau`` over the last three
    points), divergent when the sweep is flagged divergent, inconclusive otherwise."""
    vals = result.values
    if len(vals) < 3:
        raise ParameterError("membership_indicator needs at least three sweep points")
    p = result.p if p is None else p
    warnings = [P1_WARNING] if p == 1 else []
    last = vals[-3:]
    slope = result.loglog_slope
    if np.max(np.abs(last)) <= zero_tol:
        return Verdict("finite_limit", 0.0, result, slope, warnings=warnings)
    steps = np.abs(np.diff(last)) / np.maximum(np.abs(last[:-1]), zero_tol)
    if np.all(steps <= plateau):
        return Verdict("finite_limit", result.extrapolated_limit, result, slope,
                       warnings=warnings)
    if result.divergent:
        return Verdict("divergent", slope, result, slope, warnings=warnings)
    kind = "divergent" if slope < -0.1 else "finite_limit"
    value = slope if kind == "divergent" else result.extrapolated_limit
    return Verdict(kind, value, result, slope, inconclusive=True, warnings=warnings)


def divergence_exponent(result: SweepResult) -> float:
    """Log-log slope over the last ``k_fit`` points of a divergent sweep."""
    if not result.divergent:
        raise ParameterError("divergence_exponent needs a sweep flagged divergent")
    return loglog_slope(result.epsilons, result.values, result.k_fit)


def fit_null_affine(u: Field, ambient: Box, null_basis: np.ndarray, grid: int = 64) -> RigidFit:
    """Least-squares fit of x -> N x + h with N in span(null_basis) on a grid^n sample."""
    n, m = u.n, u.m
    x, _ = quadrature.composite_box_rule(ambient.lo_arr, ambient.hi_arr, 1, grid)
    vals = u.values(x)
    k = len(null_basis)
    # unknowns: coefficients of the null basis, then h
    cols = [np.einsum("kij,qj->qik", null_basis, x)] if k else []
    cols.append(np.broadcast_to(np.eye(m), (len(x), m, m)))
    M = np.concatenate(cols, axis=2).reshape(len(x) * m, k + m)
    coef, *_ = np.linalg.lstsq(M, vals.reshape(-1), rcond=None)
    N = np.einsum("k,kij->ij", coef[:k], null_basis) if k else np.zeros((m, n))
    h = coef[k:]
    resid = vals - x @ N.T - h
    return RigidFit(N, h, float(np.max(np.sqrt(np.sum(resid**2, axis=1)))))


def constancy_check(F: CoreFunctional, u: Field, ambient: Box, tol: float = 1e-8,
                    epsilons=None, config: PackingConfig | None = None) -> Verdict:
    """Zero verdict when every sweep value is <= tol and the best null-space
    affine model (a constant, or a rigid motion for the skew variants)
    reproduces ``u`` on a grid within ``10 * tol``."""
    if not tol > 0:
        raise ParameterError("tol must be positive")
    config = config or PackingConfig()
    epsilons = dyadic(8, 32) if epsilons is None else epsilons
    return verdict_from_sweep(F, u, ambient, sweep(F, u, ambient, epsilons, config), config, tol)


def verdict_from_sweep(F: CoreFunctional, u: Field, ambient: Box, result: SweepResult,
                       config: PackingConfig | None = None, tol: float = 1e-8,
                       plateau: float = 0.02) -> Verdict:
    """Constancy verdict for an all-small sweep, membership indicator otherwise."""
    config = config or PackingConfig()
    warnings = [P1_WARNING] if F.p == 1 else []
    if np.all(result.values <= tol):
        ev = PsiEvaluator(F, config.reference or ReferenceCell.cube(ambient.n), config.group)
        fit = fit_null_affine(u, ambient, estimate_null_space(ev).null_basis)
        if fit.residual <= 10 * tol:
            return Verdict("zero", 0.0, result, result.loglog_slope, fit, warnings=warnings)
        return Verdict("finite_limit", result.extrapolated_limit, result, result.loglog_slope,
                       fit, inconclusive=True, warnings=warnings)
    if len(result.rows) < 3:
        raise ParameterError("a verdict needs at least three sweep points")
    return membership_indicator(result, F.p, ambient.n, plateau)
